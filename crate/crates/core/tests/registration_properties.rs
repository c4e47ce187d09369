use proptest::prelude::*;
use radar_odom_core::registration::{
    associate, associate_all, frozen_cost, huber, huber_derivative, p2l_cost, register, register_observed, s2ks_cost,
    s2ks_gradient, Correspondence,
};
use radar_odom_core::scan::k_strongest_filter;
use radar_odom_core::sim::{presets, raycast_scan, SimNoise};
use radar_odom_core::surface::{extract_surface, Cov2};
use radar_odom_core::{OrientedPoint, Pose2, RadarConfig, RegConfig, SurfaceConfig, SurfacePointSet, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;

fn point(mean: Vec2, normal_angle: f64) -> OrientedPoint {
    OrientedPoint {
        mean,
        normal: Vec2::new(normal_angle.cos(), normal_angle.sin()),
        covariance: Cov2::default(),
        support_count: 6,
    }
}

fn random_set(rng: &mut ChaCha8Rng, count: usize, extent: f64) -> SurfacePointSet {
    SurfacePointSet::new(
        (0..count)
            .map(|_| {
                let m = Vec2::new(rng.random_range(-extent..extent), rng.random_range(-extent..extent));
                point(m, rng.random_range(-3.2..3.2))
            })
            .collect(),
        0.0,
    )
}

// Written out independently of the library: Σ L_δ(n_j · (R μ_i + t − μ_j)).
fn oracle_cost(
    keyframes: &[SurfacePointSet],
    source: &SurfacePointSet,
    x: [f64; 3],
    corrs: &[Correspondence],
    delta: f64,
) -> f64 {
    let (s, c) = x[2].sin_cos();
    corrs
        .iter()
        .map(|k| {
            let mu = source.points[k.source_index].mean;
            let t = &keyframes[k.keyframe_index].points[k.target_index];
            let px = c * mu.x - s * mu.y + x[0] - t.mean.x;
            let py = s * mu.x + c * mu.y + x[1] - t.mean.y;
            let r = t.normal.x * px + t.normal.y * py;
            if r.abs() <= delta {
                0.5 * r * r
            } else {
                delta * (r.abs() - 0.5 * delta)
            }
        })
        .sum()
}

fn residuals(
    keyframes: &[SurfacePointSet],
    source: &SurfacePointSet,
    pose: &Pose2,
    corrs: &[Correspondence],
) -> Vec<(f64, f64)> {
    corrs
        .iter()
        .map(|k| {
            let mu = source.points[k.source_index].mean;
            let t = &keyframes[k.keyframe_index].points[k.target_index];
            (t.normal.dot(pose.apply(mu) - t.mean), mu.norm())
        })
        .collect()
}

fn box_world_surface(pose: Pose2) -> SurfacePointSet {
    let radar = RadarConfig::new(400, 800, 0.175, 0.25);
    let scan = raycast_scan(&presets::box_world(), pose, &radar, &SimNoise::NONE, 0).unwrap();
    extract_surface(
        &k_strongest_filter(&scan, &Default::default()),
        &SurfaceConfig::default(),
    )
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = RegConfig::default();
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 150 {
        attempts += 1;
        assert!(attempts < 2000);
        let nk = rng.random_range(1..4);
        let keyframes: Vec<SurfacePointSet> = (0..nk).map(|_| random_set(&mut rng, 40, 6.0)).collect();
        let source = random_set(&mut rng, 40, 6.0);
        let pose = Pose2::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.3..0.3),
        );
        let corrs = associate_all(&keyframes, &source, &pose, &config);
        if corrs.is_empty() {
            continue;
        }
        // skip instances with a residual within 10 steps of the knee
        let near_knee = residuals(&keyframes, &source, &pose, &corrs)
            .iter()
            .any(|&(r, lever)| (r.abs() - config.huber_delta).abs() < 10.0 * STEP * (1.0 + lever));
        if near_knee {
            continue;
        }
        let x = [pose.x, pose.y, pose.theta];
        let lib = frozen_cost(&keyframes, &source, &pose, &corrs, &config);
        let f0 = oracle_cost(&keyframes, &source, x, &corrs, config.huber_delta);
        assert!((lib - f0).abs() <= 1e-12 * f0.max(1.0));

        let g = s2ks_gradient(&keyframes, &source, &pose, &corrs, &config);
        for i in 0..3 {
            let (mut hi, mut lo) = (x, x);
            hi[i] += STEP;
            lo[i] -= STEP;
            let fd = (oracle_cost(&keyframes, &source, hi, &corrs, config.huber_delta)
                - oracle_cost(&keyframes, &source, lo, &corrs, config.huber_delta))
                / (2.0 * STEP);
            let scale = g[i].abs().max(fd.abs()).max(1e-3);
            assert!(
                (g[i] - fd).abs() / scale < 1e-5,
                "component {i}: analytic {} vs fd {fd}",
                g[i]
            );
        }
        checked += 1;
    }
}

#[test]
fn gradient_examples() {
    let config = RegConfig::default();
    let target = SurfacePointSet::new(vec![point(Vec2::ZERO, std::f64::consts::FRAC_PI_2)], 0.0);
    let source = SurfacePointSet::new(vec![point(Vec2::new(0.0, 0.04), std::f64::consts::FRAC_PI_2)], 0.0);
    let corrs = [Correspondence {
        source_index: 0,
        target_index: 0,
        keyframe_index: 0,
    }];
    let g = s2ks_gradient(
        std::slice::from_ref(&target),
        &source,
        &Pose2::IDENTITY,
        &corrs,
        &config,
    );
    assert!(g[0].abs() < 1e-15);
    assert!((g[1] - 0.04).abs() < 1e-15);
    let aligned = s2ks_gradient(
        std::slice::from_ref(&target),
        &target,
        &Pose2::IDENTITY,
        &corrs,
        &config,
    );
    assert_eq!(aligned, [0.0; 3]);
}

#[test]
fn cost_examples() {
    let config = RegConfig::default();
    let target = SurfacePointSet::new(vec![point(Vec2::ZERO, std::f64::consts::FRAC_PI_2)], 0.0);
    let corrs = [Correspondence {
        source_index: 0,
        target_index: 0,
        keyframe_index: 0,
    }];
    let near = SurfacePointSet::new(vec![point(Vec2::new(5.0, 0.05), 0.0)], 0.0);
    let far = SurfacePointSet::new(vec![point(Vec2::new(5.0, 1.0), 0.0)], 0.0);
    assert!((p2l_cost(&target, &near, &Pose2::IDENTITY, &corrs, &config) - 0.00125).abs() < 1e-15);
    assert!((p2l_cost(&target, &far, &Pose2::IDENTITY, &corrs, &config) - 0.095).abs() < 1e-15);
}

#[test]
fn keyframe_costs_add_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = RegConfig::default();
    let source = random_set(&mut rng, 60, 5.0);
    let sets: Vec<SurfacePointSet> = (0..3).map(|_| random_set(&mut rng, 60, 5.0)).collect();
    let pose = Pose2::new(0.1, -0.2, 0.05);
    let each: Vec<f64> = sets
        .iter()
        .map(|k| p2l_cost(k, &source, &pose, &associate(&source, k, &pose, &config), &config))
        .collect();
    assert_eq!(s2ks_cost(&sets[..1], &source, &pose, &config), each[0]);
    let twice = s2ks_cost(&[sets[0].clone(), sets[0].clone()], &source, &pose, &config);
    assert_eq!(twice, 2.0 * each[0]);
    let all = s2ks_cost(&sets, &source, &pose, &config);
    assert!((all - each.iter().sum::<f64>()).abs() < 1e-12);
}

#[test]
fn association_prefers_the_nearest_compatible_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let config = RegConfig::default();
    let min_cos = config.normal_tolerance_deg.to_radians().cos();
    for _ in 0..50 {
        let source = random_set(&mut rng, 30, 8.0);
        let target = random_set(&mut rng, 30, 8.0);
        let pose = Pose2::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.5..0.5),
        );
        let got = associate(&source, &target, &pose, &config);
        let mut expected = Vec::new();
        for (i, p) in source.points.iter().enumerate() {
            let moved = pose.apply(p.mean);
            let nearest = target
                .points
                .iter()
                .enumerate()
                .map(|(j, t)| (j, (t.mean - moved).norm()))
                .filter(|&(_, d)| d <= config.association_radius)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((j, _)) = nearest {
                if pose.rotate(p.normal).dot(target.points[j].normal).abs() >= min_cos {
                    expected.push(Correspondence {
                        source_index: i,
                        target_index: j,
                        keyframe_index: 0,
                    });
                }
            }
        }
        assert_eq!(got, expected);
    }
}

#[test]
fn recovers_small_transforms_of_box_world_surfaces() {
    let keyframe = box_world_surface(Pose2::IDENTITY);
    assert!(keyframe.len() > 30);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let x = Pose2::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-5.0f64..5.0).to_radians(),
        );
        let source = keyframe.transformed(&x);
        let r = register(
            std::slice::from_ref(&keyframe),
            &source,
            Pose2::IDENTITY,
            &RegConfig::default(),
        )
        .unwrap();
        let err = x.inverse().between(&r.pose);
        assert!(r.converged);
        assert!(
            err.translation().norm() < 0.02 && err.theta.abs().to_degrees() < 0.1,
            "{x:?} -> {:?}",
            r.pose
        );
    }
}

#[test]
fn recovers_motion_between_separate_scans() {
    let keyframe = box_world_surface(Pose2::IDENTITY);
    let truth = Pose2::new(0.8, -0.3, 3f64.to_radians());
    let source = box_world_surface(truth);
    let r = register(
        std::slice::from_ref(&keyframe),
        &source,
        Pose2::IDENTITY,
        &RegConfig::default(),
    )
    .unwrap();
    let err = truth.between(&r.pose);
    assert!(r.converged);
    assert!(
        err.translation().norm() < 0.05 && err.theta.abs().to_degrees() < 0.2,
        "{:?}",
        r.pose
    );
}

#[test]
fn registration_is_equivariant() {
    let keyframe = box_world_surface(Pose2::IDENTITY);
    let source = box_world_surface(Pose2::new(0.4, 0.2, 0.03));
    let config = RegConfig::default();
    let init = Pose2::new(0.3, 0.1, 0.0);
    let base = register(std::slice::from_ref(&keyframe), &source, init, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let g = Pose2::new(
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(-3.0..3.0),
        );
        let moved = register(
            &[keyframe.transformed(&g)],
            &source.transformed(&g),
            g.compose(&init).compose(&g.inverse()),
            &config,
        )
        .unwrap();
        let expected = g.compose(&base.pose).compose(&g.inverse());
        let err = expected.between(&moved.pose);
        assert!(err.translation().norm() < 1e-6 && err.theta.abs() < 1e-6, "{err:?}");
        assert_eq!(moved.correspondence_count, base.correspondence_count);
    }
}

#[test]
fn inner_solves_never_increase_the_cost() {
    let keyframe = box_world_surface(Pose2::IDENTITY);
    let source = box_world_surface(Pose2::new(-0.5, 0.4, -0.06));
    let mut histories = Vec::new();
    register_observed(
        std::slice::from_ref(&keyframe),
        &source,
        Pose2::IDENTITY,
        &RegConfig::default(),
        &mut |_, h| histories.push(h.to_vec()),
    )
    .unwrap();
    assert!(!histories.is_empty());
    for h in &histories {
        assert!(h.windows(2).all(|w| w[1] <= w[0]), "{h:?}");
    }
}

#[test]
fn no_compatible_normals_means_no_convergence() {
    let target = SurfacePointSet::new((0..20).map(|i| point(Vec2::new(i as f64, 0.0), 0.0)).collect(), 0.0);
    let source = SurfacePointSet::new(
        (0..20)
            .map(|i| point(Vec2::new(i as f64, 0.0), std::f64::consts::FRAC_PI_4))
            .collect(),
        0.0,
    );
    let init = Pose2::new(0.1, 0.0, 0.0);
    let r = register(std::slice::from_ref(&target), &source, init, &RegConfig::default()).unwrap();
    assert!(!r.converged);
    assert_eq!(r.pose, init);
    assert_eq!(r.correspondence_count, 0);
}

#[test]
fn empty_inputs_are_errors() {
    let set = SurfacePointSet::new(vec![point(Vec2::ZERO, 0.0)], 0.0);
    let config = RegConfig::default();
    assert!(register(&[], &set, Pose2::IDENTITY, &config).is_err());
    assert!(register(
        std::slice::from_ref(&set),
        &SurfacePointSet::default(),
        Pose2::IDENTITY,
        &config
    )
    .is_err());
}

proptest! {
    #[test]
    fn huber_is_even_and_below_the_square(s in -10.0f64..10.0, delta in 0.001f64..2.0) {
        prop_assert_eq!(huber(s, delta), huber(-s, delta));
        prop_assert!(huber(s, delta) <= 0.5 * s * s + 1e-15);
        if s.abs() <= delta {
            prop_assert_eq!(huber(s, delta), 0.5 * s * s);
        }
        prop_assert_eq!(huber_derivative(-s, delta), -huber_derivative(s, delta));
    }

    #[test]
    fn huber_is_smooth_at_the_knee(delta in 0.001f64..2.0) {
        let eps = 1e-9 * delta;
        prop_assert!((huber(delta - eps, delta) - huber(delta + eps, delta)).abs() < 1e-8);
        prop_assert!((huber_derivative(delta - eps, delta) - huber_derivative(delta + eps, delta)).abs() < 1e-8);
    }

    #[test]
    fn cost_ignores_normal_signs(seed in any::<u64>(), flips in proptest::collection::vec(any::<bool>(), 40)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = RegConfig::default();
        let source = random_set(&mut rng, 40, 4.0);
        let target = random_set(&mut rng, 40, 4.0);
        let pose = Pose2::new(0.2, -0.1, 0.1);
        let corrs = associate(&source, &target, &pose, &config);
        let mut flipped = target.clone();
        for (p, f) in flipped.points.iter_mut().zip(&flips) {
            if *f {
                p.normal = -p.normal;
            }
        }
        let a = p2l_cost(&target, &source, &pose, &corrs, &config);
        let b = p2l_cost(&flipped, &source, &pose, &corrs, &config);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert_eq!(associate(&source, &flipped, &pose, &config), corrs);
    }
}

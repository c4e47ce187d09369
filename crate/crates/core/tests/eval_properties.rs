use radar_odom_core::eval::KITTI_LENGTHS;
use radar_odom_core::{kitti_relative_errors, Error, Pose2, Trajectory};

// Poses one meter apart along a curve; `scale` stretches the steps, `bias` adds
// heading in radians per meter without moving the positions.
fn path(n: usize, scale: f64, curvature: f64, bias: f64) -> Trajectory {
    let mut samples = Vec::with_capacity(n);
    let (mut x, mut y) = (0.0, 0.0);
    for i in 0..n {
        let theta = curvature * i as f64;
        samples.push((0.1 * i as f64, Pose2::new(x, y, theta + bias * i as f64)));
        x += scale * theta.cos();
        y += scale * theta.sin();
    }
    Trajectory::new(samples).unwrap()
}

#[test]
fn uniform_scale_gives_its_own_percentage_at_every_length() {
    let gt = path(901, 1.0, 0.0, 0.0);
    let est = path(901, 1.01, 0.0, 0.0);
    let r = kitti_relative_errors(&gt, &est, &KITTI_LENGTHS, 1).unwrap();
    assert!((r.translation_error_percent - 1.0).abs() < 1e-6);
    assert!(r.rotation_error_deg_per_100m.abs() < 1e-12);
    for l in &r.per_length {
        assert!(l.count > 0);
        assert!((l.translation_error_percent - 1.0).abs() < 1e-6, "{l:?}");
    }
}

#[test]
fn heading_bias_shows_up_as_rotation_error() {
    let per_meter = 0.1f64.to_radians() / 100.0;
    let gt = path(901, 1.0, 0.0, 0.0);
    let est = path(901, 1.0, 0.0, per_meter);
    let r = kitti_relative_errors(&gt, &est, &KITTI_LENGTHS, 1).unwrap();
    assert!((r.rotation_error_deg_per_100m - 0.1).abs() < 1e-9);
}

#[test]
fn identical_trajectories_have_no_error() {
    let gt = path(500, 1.0, 0.01, 0.0);
    let r = kitti_relative_errors(&gt, &gt, &[50.0, 100.0], 3).unwrap();
    assert_eq!(r.translation_error_percent, 0.0);
    assert_eq!(r.rotation_error_deg_per_100m, 0.0);
}

#[test]
fn rigid_motion_of_both_trajectories_changes_nothing() {
    let gt = path(700, 1.0, 0.004, 0.0);
    let est = path(700, 0.995, 0.0041, 2e-5);
    let base = kitti_relative_errors(&gt, &est, &KITTI_LENGTHS, 2).unwrap();
    for g in [Pose2::new(100.0, -40.0, 1.0), Pose2::new(-3.0, 7.0, -2.9)] {
        let moved = kitti_relative_errors(&gt.transformed(&g), &est.transformed(&g), &KITTI_LENGTHS, 2).unwrap();
        assert!(
            (moved.translation_error_percent - base.translation_error_percent).abs() < 1e-9,
            "{moved:?} vs {base:?}"
        );
        assert!((moved.rotation_error_deg_per_100m - base.rotation_error_deg_per_100m).abs() < 1e-9);
        assert_eq!(moved.segment_count, base.segment_count);
    }
}

#[test]
fn stride_thins_the_start_frames() {
    let gt = path(400, 1.0, 0.0, 0.0);
    let all = kitti_relative_errors(&gt, &gt, &[100.0], 1).unwrap();
    let thinned = kitti_relative_errors(&gt, &gt, &[100.0], 10).unwrap();
    assert_eq!(all.segment_count, 300);
    assert_eq!(thinned.segment_count, 30);
}

#[test]
fn misaligned_inputs_are_rejected() {
    let gt = path(300, 1.0, 0.0, 0.0);
    let short = path(299, 1.0, 0.0, 0.0);
    assert!(matches!(
        kitti_relative_errors(&gt, &short, &[100.0], 1),
        Err(Error::Alignment(_))
    ));
    let shifted = Trajectory::new(gt.samples().iter().map(|&(t, p)| (t + 0.05, p)).collect()).unwrap();
    assert!(matches!(
        kitti_relative_errors(&gt, &shifted, &[100.0], 1),
        Err(Error::Alignment(_))
    ));
    assert!(matches!(
        kitti_relative_errors(&gt, &gt, &[500.0], 1),
        Err(Error::InsufficientLength { .. })
    ));
    assert!(kitti_relative_errors(&gt, &gt, &[], 1).is_err());
}

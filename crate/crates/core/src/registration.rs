//! Scan-to-keyframes registration with a Huber-robust point-to-line cost.
//!
//! For a pose `x = (x, y, θ)` every source surface point `μᵢ` is moved into the
//! keyframe frame and paired with the nearest keyframe point `μⱼ` inside the
//! association radius whose normal agrees within `θ_max`. The residual is the
//! distance along the keyframe normal, `nⱼ · (R_θ μᵢ + t − μⱼ)`, and the cost
//! is the Huber-weighted sum over all keyframes of the window.
//!
//! [`register`] alternates association with a BFGS solve over frozen pairs
//! until the pose update drops under `param_tolerance`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose2, Vec2};
use crate::grid::PointGrid;
use crate::solver::{minimize_bfgs, BfgsOptions, Vec3};
use crate::surface::SurfacePointSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegConfig {
    /// Huber threshold δ in meters.
    pub huber_delta: f64,
    /// Largest angle between paired normals, degrees.
    pub normal_tolerance_deg: f64,
    /// Association radius in meters.
    pub association_radius: f64,
    pub max_outer_iterations: usize,
    /// Outer loop stops when `|Δt| + r·|Δθ|` drops below this.
    pub param_tolerance: f64,
    /// Fewer pairs than this at the final pose flags the result as not converged.
    pub min_correspondences: usize,
    pub max_inner_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self {
            huber_delta: 0.1,
            normal_tolerance_deg: 30.0,
            association_radius: 3.5,
            max_outer_iterations: 8,
            param_tolerance: 1e-4,
            min_correspondences: 10,
            max_inner_iterations: 50,
            gradient_tolerance: 1e-8,
        }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.huber_delta > 0.0) {
            return Err(Error::Config(format!(
                "huber delta must be positive, got {}",
                self.huber_delta
            )));
        }
        if !(self.normal_tolerance_deg > 0.0 && self.normal_tolerance_deg < 90.0) {
            return Err(Error::Config(format!(
                "normal tolerance must lie in (0, 90) degrees, got {}",
                self.normal_tolerance_deg
            )));
        }
        if !(self.association_radius > 0.0 && self.association_radius.is_finite()) {
            return Err(Error::Config(format!(
                "association radius must be positive, got {}",
                self.association_radius
            )));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::Config("need at least one outer iteration".into()));
        }
        Ok(())
    }

    fn min_normal_cosine(&self) -> f64 {
        libm::cos(self.normal_tolerance_deg.to_radians())
    }

    fn bfgs_options(&self) -> BfgsOptions {
        BfgsOptions {
            max_iterations: self.max_inner_iterations,
            gradient_tolerance: self.gradient_tolerance,
            ..BfgsOptions::default()
        }
    }
}

/// Source point `source_index` paired with point `target_index` of keyframe `keyframe_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Correspondence {
    pub source_index: usize,
    pub target_index: usize,
    pub keyframe_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationResult {
    pub pose: Pose2,
    /// Enough correspondences supported the final pose.
    pub converged: bool,
    pub final_cost: f64,
    pub correspondence_count: usize,
    pub outer_iterations: usize,
}

/// `R_θ p + t`.
#[inline]
pub fn pose_apply(pose: &Pose2, p: Vec2) -> Vec2 {
    pose.apply(p)
}

/// Huber loss: `½s²` for `|s| ≤ δ`, `δ(|s| − ½δ)` beyond.
#[inline]
pub fn huber(s: f64, delta: f64) -> f64 {
    let a = s.abs();
    if a <= delta {
        0.5 * s * s
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// `dℒ/ds`.
#[inline]
pub fn huber_derivative(s: f64, delta: f64) -> f64 {
    if s.abs() <= delta {
        s
    } else {
        delta * s.signum()
    }
}

/// Nearest-neighbour lookup over one target set.
struct TargetIndex<'a> {
    set: &'a SurfacePointSet,
    grid: PointGrid,
}

impl<'a> TargetIndex<'a> {
    fn new(set: &'a SurfacePointSet, radius: f64) -> Self {
        Self {
            set,
            grid: PointGrid::new(set.points.iter().map(|p| p.mean), radius),
        }
    }

    fn associate_into(
        &self,
        source: &SurfacePointSet,
        pose: &Pose2,
        config: &RegConfig,
        keyframe_index: usize,
        out: &mut Vec<Correspondence>,
    ) {
        let min_cos = config.min_normal_cosine();
        for (i, p) in source.points.iter().enumerate() {
            let moved = pose.apply(p.mean);
            let Some((j, _)) = self.grid.nearest_within(moved, config.association_radius) else {
                continue;
            };
            let normal = pose.rotate(p.normal);
            if normal.dot(self.set.points[j].normal).abs() >= min_cos {
                out.push(Correspondence {
                    source_index: i,
                    target_index: j,
                    keyframe_index,
                });
            }
        }
    }
}

/// Pairs every source point with its nearest compatible target point under `pose`.
pub fn associate(
    source: &SurfacePointSet,
    target: &SurfacePointSet,
    pose: &Pose2,
    config: &RegConfig,
) -> Vec<Correspondence> {
    let mut out = Vec::new();
    TargetIndex::new(target, config.association_radius).associate_into(source, pose, config, 0, &mut out);
    out
}

/// Associations against every keyframe; `keyframe_index` is the position in `keyframes`.
pub fn associate_all(
    keyframes: &[SurfacePointSet],
    source: &SurfacePointSet,
    pose: &Pose2,
    config: &RegConfig,
) -> Vec<Correspondence> {
    let mut out = Vec::new();
    for (k, target) in keyframes.iter().enumerate() {
        TargetIndex::new(target, config.association_radius).associate_into(source, pose, config, k, &mut out);
    }
    out
}

/// Point-to-line cost against a single target; `keyframe_index` of the pairs is ignored.
pub fn p2l_cost(
    target: &SurfacePointSet,
    source: &SurfacePointSet,
    pose: &Pose2,
    corrs: &[Correspondence],
    config: &RegConfig,
) -> f64 {
    corrs
        .iter()
        .map(|c| {
            let t = &target.points[c.target_index];
            let s = t.normal.dot(pose.apply(source.points[c.source_index].mean) - t.mean);
            huber(s, config.huber_delta)
        })
        .sum()
}

/// Sum of per-keyframe point-to-line costs, each with fresh associations at `pose`.
pub fn s2ks_cost(keyframes: &[SurfacePointSet], source: &SurfacePointSet, pose: &Pose2, config: &RegConfig) -> f64 {
    keyframes
        .iter()
        .map(|target| {
            let corrs = associate(source, target, pose, config);
            p2l_cost(target, source, pose, &corrs, config)
        })
        .sum()
}

/// Gradient of the frozen-association cost with respect to `(x, y, θ)`.
pub fn s2ks_gradient(
    keyframes: &[SurfacePointSet],
    source: &SurfacePointSet,
    pose: &Pose2,
    corrs: &[Correspondence],
    config: &RegConfig,
) -> Vec3 {
    let terms = frozen_terms(keyframes, source, corrs);
    evaluate(&terms, &[pose.x, pose.y, pose.theta], config.huber_delta).1
}

/// Frozen-association cost; equals `s2ks_cost` when `corrs` are the associations at `pose`.
pub fn frozen_cost(
    keyframes: &[SurfacePointSet],
    source: &SurfacePointSet,
    pose: &Pose2,
    corrs: &[Correspondence],
    config: &RegConfig,
) -> f64 {
    let terms = frozen_terms(keyframes, source, corrs);
    evaluate(&terms, &[pose.x, pose.y, pose.theta], config.huber_delta).0
}

/// One frozen pair: source mean, target normal, `nⱼ·μⱼ`.
struct Term {
    source: Vec2,
    normal: Vec2,
    offset: f64,
}

fn frozen_terms(keyframes: &[SurfacePointSet], source: &SurfacePointSet, corrs: &[Correspondence]) -> Vec<Term> {
    corrs
        .iter()
        .map(|c| {
            let t = &keyframes[c.keyframe_index].points[c.target_index];
            Term {
                source: source.points[c.source_index].mean,
                normal: t.normal,
                offset: t.normal.dot(t.mean),
            }
        })
        .collect()
}

fn evaluate(terms: &[Term], x: &Vec3, delta: f64) -> (f64, Vec3) {
    let (sin, cos) = libm::sincos(x[2]);
    let mut cost = 0.0;
    let mut grad = [0.0; 3];
    for term in terms {
        let mu = term.source;
        let moved = Vec2::new(cos * mu.x - sin * mu.y + x[0], sin * mu.x + cos * mu.y + x[1]);
        let dmoved = Vec2::new(-sin * mu.x - cos * mu.y, cos * mu.x - sin * mu.y);
        let s = term.normal.dot(moved) - term.offset;
        cost += huber(s, delta);
        let w = huber_derivative(s, delta);
        grad[0] += w * term.normal.x;
        grad[1] += w * term.normal.y;
        grad[2] += w * term.normal.dot(dmoved);
    }
    (cost, grad)
}

/// Aligns `source` to the keyframes starting from `init`.
pub fn register(
    keyframes: &[SurfacePointSet],
    source: &SurfacePointSet,
    init: Pose2,
    config: &RegConfig,
) -> Result<RegistrationResult> {
    register_observed(keyframes, source, init, config, &mut |_, _| {})
}

/// [`register`] that reports the inner objective history of every outer iteration.
pub fn register_observed(
    keyframes: &[SurfacePointSet],
    source: &SurfacePointSet,
    init: Pose2,
    config: &RegConfig,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<RegistrationResult> {
    config.validate()?;
    if keyframes.is_empty() {
        return Err(Error::Input("registration needs at least one keyframe".into()));
    }
    if source.is_empty() {
        return Err(Error::Input("registration source has no surface points".into()));
    }
    let targets: Vec<TargetIndex> = keyframes
        .iter()
        .map(|k| TargetIndex::new(k, config.association_radius))
        .collect();
    let associate = |pose: &Pose2, out: &mut Vec<Correspondence>| {
        out.clear();
        for (k, t) in targets.iter().enumerate() {
            t.associate_into(source, pose, config, k, out);
        }
    };

    let options = config.bfgs_options();
    let mut pose = init;
    let mut corrs = Vec::new();
    let mut outer_iterations = 0;
    while outer_iterations < config.max_outer_iterations {
        associate(&pose, &mut corrs);
        if corrs.is_empty() {
            break;
        }
        outer_iterations += 1;
        let terms = frozen_terms(keyframes, source, &corrs);
        let report = minimize_bfgs(
            |x| evaluate(&terms, x, config.huber_delta),
            [pose.x, pose.y, pose.theta],
            &options,
        );
        observer(outer_iterations - 1, &report.history);
        let next = Pose2::new(report.x[0], report.x[1], report.x[2]);
        let step = (next.translation() - pose.translation()).norm()
            + config.association_radius * normalize_angle(next.theta - pose.theta).abs();
        pose = next;
        if step < config.param_tolerance {
            break;
        }
    }

    associate(&pose, &mut corrs);
    let terms = frozen_terms(keyframes, source, &corrs);
    let final_cost = evaluate(&terms, &[pose.x, pose.y, pose.theta], config.huber_delta).0;
    Ok(RegistrationResult {
        pose,
        converged: corrs.len() >= config.min_correspondences,
        final_cost,
        correspondence_count: corrs.len(),
        outer_iterations,
    })
}

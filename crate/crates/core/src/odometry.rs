//! Per-scan odometry: prediction, de-skewing, surface extraction, registration
//! against the keyframe window and keyframe upkeep.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Velocity2};
use crate::registration::{register, RegConfig};
use crate::scan::{self, FilterConfig, PointCloud, PolarScan};
use crate::surface::{self, SurfaceConfig, SurfacePointSet};

/// Range interval kept by the filter, intersected with the scan's own gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeGate {
    pub min_range: f64,
    pub max_range: f64,
}

impl Default for RangeGate {
    fn default() -> Self {
        Self {
            min_range: 5.0,
            max_range: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryConfig {
    pub keyframe_min_translation: f64,
    pub keyframe_min_rotation_deg: f64,
    /// Keyframes kept in the sliding window (`s`).
    pub window_size: usize,
    pub motion_compensation: bool,
    pub prediction: bool,
    /// Run filtering and surface fitting on the rayon pool (needs the `parallel` feature).
    pub parallel: bool,
    pub range_gate: RangeGate,
    pub filter: FilterConfig,
    pub surface: SurfaceConfig,
    pub registration: RegConfig,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self {
            keyframe_min_translation: 1.5,
            keyframe_min_rotation_deg: 5.0,
            window_size: 3,
            motion_compensation: true,
            prediction: true,
            parallel: false,
            range_gate: RangeGate::default(),
            filter: FilterConfig::default(),
            surface: SurfaceConfig::default(),
            registration: RegConfig::default(),
        }
    }
}

impl OdometryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keyframe_min_translation > 0.0) || !(self.keyframe_min_rotation_deg > 0.0) {
            return Err(Error::Config("keyframe thresholds must be positive".into()));
        }
        if self.window_size < 1 {
            return Err(Error::Config("keyframe window needs room for one keyframe".into()));
        }
        if !(self.range_gate.min_range >= 0.0 && self.range_gate.min_range < self.range_gate.max_range) {
            return Err(Error::Config(format!(
                "range gate [{}, {}] is empty",
                self.range_gate.min_range, self.range_gate.max_range
            )));
        }
        self.filter.validate()?;
        self.surface.validate()?;
        self.registration.validate()
    }
}

/// A stored scan: its pose, its surface points in the sensor frame, and the
/// same points moved into the odometry frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pose: Pose2,
    surface: SurfacePointSet,
    world: SurfacePointSet,
    timestamp: f64,
}

impl Keyframe {
    pub fn new(pose: Pose2, surface: SurfacePointSet, timestamp: f64) -> Self {
        let world = surface.transformed(&pose);
        Self {
            pose,
            surface,
            world,
            timestamp,
        }
    }

    pub fn pose(&self) -> Pose2 {
        self.pose
    }

    pub fn surface(&self) -> &SurfacePointSet {
        &self.surface
    }

    pub fn world_surface(&self) -> &SurfacePointSet {
        &self.world
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }
}

/// The `s` most recent keyframes, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeWindow {
    frames: Vec<Keyframe>,
    worlds: Vec<SurfacePointSet>,
    capacity: usize,
}

impl KeyframeWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            frames: Vec::with_capacity(capacity + 1),
            worlds: Vec::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Keyframe] {
        &self.frames
    }

    pub fn newest(&self) -> Option<&Keyframe> {
        self.frames.last()
    }

    /// Keyframe surfaces in the odometry frame, oldest first.
    pub fn world_surfaces(&self) -> &[SurfacePointSet] {
        &self.worlds
    }

    fn push(&mut self, keyframe: Keyframe) {
        self.worlds.push(keyframe.world.clone());
        self.frames.push(keyframe);
        while self.frames.len() > self.capacity {
            self.frames.remove(0);
            self.worlds.remove(0);
        }
    }
}

/// Adds a keyframe when `pose` moved far enough from the newest one.
///
/// The window always accepts into an empty window. Empty surfaces and
/// timestamps that do not advance past the newest keyframe are never stored.
pub fn update_keyframes(
    window: &mut KeyframeWindow,
    pose: Pose2,
    surface: &SurfacePointSet,
    config: &OdometryConfig,
) -> bool {
    if surface.is_empty() || !pose.is_finite() {
        return false;
    }
    let accept = match window.newest() {
        None => true,
        Some(newest) => {
            if surface.timestamp <= newest.timestamp {
                return false;
            }
            let rel = newest.pose.between(&pose);
            rel.translation().norm() > config.keyframe_min_translation
                || rel.theta.abs().to_degrees() > config.keyframe_min_rotation_deg
        }
    };
    if accept {
        window.push(Keyframe::new(pose, surface.clone(), surface.timestamp));
    }
    accept
}

/// Mutable odometry state, owned by one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct OdometryState {
    pub window: KeyframeWindow,
    pub last_pose: Pose2,
    pub velocity: Velocity2,
    pub last_timestamp: f64,
    pub frame_count: usize,
}

impl OdometryState {
    pub fn new(config: &OdometryConfig) -> Self {
        Self {
            window: KeyframeWindow::new(config.window_size),
            last_pose: Pose2::IDENTITY,
            velocity: Velocity2::ZERO,
            last_timestamp: 0.0,
            frame_count: 0,
        }
    }
}

/// Constant-velocity extrapolation of the last pose to `timestamp`.
pub fn predict(state: &OdometryState, timestamp: f64) -> Result<Pose2> {
    let dt = timestamp - state.last_timestamp;
    if dt < 0.0 {
        return Err(Error::TimeRegression {
            previous: state.last_timestamp,
            current: timestamp,
        });
    }
    Ok(state.last_pose.compose(&Pose2::exp(state.velocity, dt)))
}

/// Millisecond wall clock used for per-stage timing.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Reports zero for every stage.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub filter_ms: f64,
    pub compensate_ms: f64,
    pub surface_ms: f64,
    pub register_ms: f64,
    pub total_ms: f64,
}

/// Outcome of one [`process_scan`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStatus {
    pub frame_index: usize,
    pub timestamp: f64,
    /// The pose fell back to the prediction.
    pub degraded: bool,
    pub converged: bool,
    pub correspondence_count: usize,
    pub final_cost: f64,
    pub filtered_points: usize,
    pub surface_points: usize,
    pub keyframe_created: bool,
    pub keyframe_count: usize,
    pub timings: StageTimings,
}

/// Runs the full pipeline on one scan and advances `state`.
pub fn process_scan(
    state: &mut OdometryState,
    scan: &PolarScan,
    config: &OdometryConfig,
) -> Result<(Pose2, FrameStatus)> {
    process_scan_timed(state, scan, config, &NoClock)
}

/// [`process_scan`] with per-stage timings read from `clock`.
pub fn process_scan_timed<C: Clock + ?Sized>(
    state: &mut OdometryState,
    scan: &PolarScan,
    config: &OdometryConfig,
    clock: &C,
) -> Result<(Pose2, FrameStatus)> {
    let timestamp = scan.timestamp();
    let first = state.frame_count == 0;
    if !first && timestamp < state.last_timestamp {
        return Err(Error::TimeRegression {
            previous: state.last_timestamp,
            current: timestamp,
        });
    }
    let mut timings = StageTimings::default();
    let start = clock.now_ms();

    let cloud = filter_scan(scan, config);
    let t_filter = clock.now_ms();
    timings.filter_ms = t_filter - start;

    let cloud = if config.motion_compensation && !first {
        scan::motion_compensate(&cloud, state.velocity, scan.config().sweep_period)
    } else {
        cloud
    };
    let t_comp = clock.now_ms();
    timings.compensate_ms = t_comp - t_filter;

    let surface = extract_surface(&cloud, config);
    let t_surface = clock.now_ms();
    timings.surface_ms = t_surface - t_comp;

    let mut status = FrameStatus {
        frame_index: state.frame_count,
        timestamp,
        degraded: false,
        converged: false,
        correspondence_count: 0,
        final_cost: 0.0,
        filtered_points: cloud.len(),
        surface_points: surface.len(),
        keyframe_created: false,
        keyframe_count: state.window.len(),
        timings,
    };

    let pose = if first {
        status.converged = true;
        Pose2::IDENTITY
    } else {
        let predicted = if config.prediction {
            predict(state, timestamp)?
        } else {
            state.last_pose
        };
        if surface.is_empty() || state.window.is_empty() {
            status.degraded = true;
            predicted
        } else {
            let result = register(state.window.world_surfaces(), &surface, predicted, &config.registration)?;
            status.converged = result.converged;
            status.correspondence_count = result.correspondence_count;
            status.final_cost = result.final_cost;
            if result.converged {
                result.pose
            } else {
                status.degraded = true;
                predicted
            }
        }
    };
    if first && surface.is_empty() {
        status.degraded = true;
        status.converged = false;
    }
    let t_register = clock.now_ms();
    status.timings.register_ms = t_register - t_surface;

    if !first {
        let dt = timestamp - state.last_timestamp;
        if dt > 0.0 {
            state.velocity = state.last_pose.between(&pose).log(dt);
        }
    }
    status.keyframe_created = update_keyframes(&mut state.window, pose, &surface, config);
    status.keyframe_count = state.window.len();
    state.last_pose = pose;
    state.last_timestamp = timestamp;
    state.frame_count += 1;
    status.timings.total_ms = clock.now_ms() - start;
    Ok((pose, status))
}

fn filter_scan(scan: &PolarScan, config: &OdometryConfig) -> PointCloud {
    let rc = scan.config();
    let min = rc.min_range.max(config.range_gate.min_range);
    let max = rc.max_range.min(config.range_gate.max_range);
    #[cfg(feature = "parallel")]
    if config.parallel {
        return scan::k_strongest_filter_gated_par(scan, &config.filter, min, max);
    }
    scan::k_strongest_filter_gated(scan, &config.filter, min, max)
}

fn extract_surface(cloud: &PointCloud, config: &OdometryConfig) -> SurfacePointSet {
    #[cfg(feature = "parallel")]
    if config.parallel {
        let centroids = surface::grid_downsample(cloud, config.surface.cell_size());
        return surface::estimate_oriented_points_par(&centroids, cloud, &config.surface);
    }
    surface::extract_surface(cloud, &config.surface)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::surface::{Cov2, OrientedPoint};
    use alloc::vec;
    use core::f64::consts::FRAC_PI_2;

    fn surface_at(t: f64) -> SurfacePointSet {
        SurfacePointSet::new(
            vec![OrientedPoint {
                mean: Vec2::new(1.0, 2.0),
                normal: Vec2::new(0.0, 1.0),
                covariance: Cov2::default(),
                support_count: 6,
            }],
            t,
        )
    }

    #[test]
    fn prediction_examples() {
        let cfg = OdometryConfig::default();
        let mut state = OdometryState::new(&cfg);
        state.last_pose = Pose2::new(1.0, 2.0, 0.3);
        state.last_timestamp = 10.0;
        assert_eq!(predict(&state, 10.25).unwrap(), state.last_pose);

        state.last_pose = Pose2::IDENTITY;
        state.velocity = Velocity2::new(2.0, 0.0, 0.0);
        let p = predict(&state, 10.25).unwrap();
        assert!((p.x - 0.5).abs() < 1e-15 && p.y == 0.0 && p.theta == 0.0);

        state.last_pose = Pose2::new(0.0, 0.0, FRAC_PI_2);
        let p = predict(&state, 10.25).unwrap();
        assert!(p.x.abs() < 1e-15 && (p.y - 0.5).abs() < 1e-15 && (p.theta - FRAC_PI_2).abs() < 1e-15);

        assert!(matches!(predict(&state, 9.0), Err(Error::TimeRegression { .. })));
    }

    #[test]
    fn keyframe_policy() {
        let cfg = OdometryConfig::default();
        let mut w = KeyframeWindow::new(3);
        assert!(update_keyframes(&mut w, Pose2::IDENTITY, &surface_at(0.0), &cfg));
        assert!(!update_keyframes(
            &mut w,
            Pose2::new(0.5, 0.0, 0.0),
            &surface_at(1.0),
            &cfg
        ));
        assert!(update_keyframes(
            &mut w,
            Pose2::new(0.1, 0.0, 6f64.to_radians()),
            &surface_at(2.0),
            &cfg
        ));
        assert!(update_keyframes(
            &mut w,
            Pose2::new(1.7, 0.0, 6f64.to_radians()),
            &surface_at(3.0),
            &cfg
        ));
        assert_eq!(w.len(), 3);
        assert!(update_keyframes(
            &mut w,
            Pose2::new(3.5, 0.0, 6f64.to_radians()),
            &surface_at(4.0),
            &cfg
        ));
        assert_eq!(w.len(), 3);
        let stamps: Vec<f64> = w.frames().iter().map(|k| k.timestamp()).collect();
        assert_eq!(stamps, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn keyframes_store_world_surfaces() {
        let cfg = OdometryConfig::default();
        let mut w = KeyframeWindow::new(1);
        let pose = Pose2::new(10.0, 0.0, FRAC_PI_2);
        update_keyframes(&mut w, pose, &surface_at(0.0), &cfg);
        let p = w.world_surfaces()[0].points[0];
        assert!((p.mean.x - 8.0).abs() < 1e-12 && (p.mean.y - 1.0).abs() < 1e-12);
        assert!((p.normal.x + 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_surface_never_becomes_keyframe() {
        let cfg = OdometryConfig::default();
        let mut w = KeyframeWindow::new(3);
        assert!(!update_keyframes(
            &mut w,
            Pose2::IDENTITY,
            &SurfacePointSet::default(),
            &cfg
        ));
        assert!(w.is_empty());
    }
}

//! Ray-casting simulator for a rotating radar in a world of line segments.
//!
//! Each azimuth casts one ray; the first wall it hits returns a peak of
//! `1800·reflectivity/d` raw units (≈180 for a perfect reflector at 10 m),
//! spread over ±2 range bins. Gaussian power noise, speckle spikes and
//! first-order multipath ghosts at twice the true range can be switched on.
//! When generating a sequence every azimuth is cast from the pose the sensor
//! had at that instant, so moving sequences carry real motion distortion.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::Trajectory;
use crate::geometry::{normalize_angle, Pose2, Vec2, Velocity2};
use crate::scan::{uniform_azimuth_timestamps, PolarScan, RadarConfig};

/// Raw power of a reflectivity-1 wall at 1 m.
pub const POWER_AT_ONE_METER: f64 = 1800.0;
/// Ghost amplitude relative to the direct return.
pub const MULTIPATH_GAIN: f64 = 0.5;
/// Bins on each side of the peak that receive energy.
pub const PEAK_HALF_WIDTH: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
    /// In `[0, 1]`.
    pub reflectivity: f64,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2, reflectivity: f64) -> Self {
        Self { a, b, reflectivity }
    }

    /// Distance along the unit ray `origin + t·dir` to this segment, if hit.
    pub fn intersect(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let e = self.b - self.a;
        let denom = cross(dir, e);
        if denom.abs() < 1e-15 {
            return None;
        }
        let w = self.a - origin;
        let t = cross(w, e) / denom;
        let u = cross(w, dir) / denom;
        (t > 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
    }
}

#[inline]
fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorldModel {
    segments: Vec<Segment>,
}

impl WorldModel {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for (i, s) in segments.iter().enumerate() {
            if !(s.a.is_finite() && s.b.is_finite()) || s.a == s.b {
                return Err(Error::Input(format!("segment {i} is degenerate")));
            }
            if !(0.0..=1.0).contains(&s.reflectivity) {
                return Err(Error::Input(format!(
                    "segment {i} reflectivity {} outside [0, 1]",
                    s.reflectivity
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Adds the four walls of an axis-aligned rectangle.
    pub fn push_box(&mut self, min: Vec2, max: Vec2, reflectivity: f64) {
        let corners = [min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)];
        for i in 0..4 {
            self.segments
                .push(Segment::new(corners[i], corners[(i + 1) % 4], reflectivity));
        }
    }

    /// Nearest hit along a ray: `(distance, reflectivity)`.
    pub fn cast(&self, origin: Vec2, dir: Vec2, max_range: f64) -> Option<(f64, f64)> {
        self.segments
            .iter()
            .filter_map(|s| s.intersect(origin, dir).map(|t| (t, s.reflectivity)))
            .filter(|&(t, _)| t <= max_range)
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimNoise {
    pub power_noise_std: f64,
    pub range_jitter_std: f64,
    /// Per-bin probability of a speckle spike.
    pub speckle_rate: f64,
    /// Speckle amplitude is uniform in `[0, speckle_power_max]`.
    pub speckle_power_max: f64,
    /// Per-detection probability of a ghost at twice the range.
    pub multipath_rate: f64,
}

impl Default for SimNoise {
    fn default() -> Self {
        Self::NONE
    }
}

impl SimNoise {
    pub const NONE: SimNoise = SimNoise {
        power_noise_std: 0.0,
        range_jitter_std: 0.0,
        speckle_rate: 0.0,
        speckle_power_max: 150.0,
        multipath_rate: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.speckle_rate) || !prob(self.multipath_rate) {
            return Err(Error::Config("noise rates must lie in [0, 1]".into()));
        }
        if !(self.power_noise_std >= 0.0 && self.range_jitter_std >= 0.0 && self.speckle_power_max >= 0.0) {
            return Err(Error::Config("noise magnitudes must be non-negative".into()));
        }
        Ok(())
    }
}

/// Constant-twist piece of a parametric trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSegment {
    pub speed: f64,
    pub turn_rate: f64,
    pub duration: f64,
}

/// Ground-truth motion of the simulated sensor.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    /// Unicycle motion from the identity at `t = 0`, one constant twist per segment.
    Parametric {
        segments: Vec<MotionSegment>,
        scan_rate: f64,
    },
    /// Piecewise-linear interpolation between timestamped poses.
    Waypoints { samples: Vec<(f64, Pose2)>, scan_rate: f64 },
}

impl TrajectorySpec {
    pub fn constant(speed: f64, turn_rate: f64, duration: f64, scan_rate: f64) -> Self {
        TrajectorySpec::Parametric {
            segments: vec![MotionSegment {
                speed,
                turn_rate,
                duration,
            }],
            scan_rate,
        }
    }

    pub fn scan_rate(&self) -> f64 {
        match self {
            TrajectorySpec::Parametric { scan_rate, .. } | TrajectorySpec::Waypoints { scan_rate, .. } => *scan_rate,
        }
    }

    pub fn start_time(&self) -> f64 {
        match self {
            TrajectorySpec::Parametric { .. } => 0.0,
            TrajectorySpec::Waypoints { samples, .. } => samples.first().map_or(0.0, |s| s.0),
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            TrajectorySpec::Parametric { segments, .. } => segments.iter().map(|s| s.duration).sum(),
            TrajectorySpec::Waypoints { samples, .. } => match (samples.first(), samples.last()) {
                (Some(a), Some(b)) => b.0 - a.0,
                _ => 0.0,
            },
        }
    }

    /// Whole sweeps that fit in the trajectory.
    pub fn num_scans(&self) -> usize {
        libm::floor(self.duration() * self.scan_rate() + 1e-9).max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let rate = self.scan_rate();
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Input(format!("scan rate must be positive, got {rate}")));
        }
        match self {
            TrajectorySpec::Parametric { segments, .. } => {
                for s in segments {
                    if !(s.duration >= 0.0 && s.speed.is_finite() && s.turn_rate.is_finite()) {
                        return Err(Error::Input(format!("invalid motion segment {s:?}")));
                    }
                }
            }
            TrajectorySpec::Waypoints { samples, .. } => {
                if let Some(i) = samples.windows(2).position(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::NonMonotonicTimestamps(i + 1));
                }
            }
        }
        if self.num_scans() == 0 {
            return Err(Error::Input("trajectory is too short for a single sweep".into()));
        }
        Ok(())
    }

    /// Ground-truth pose at absolute time `t`; extrapolates past either end.
    pub fn pose_at(&self, t: f64) -> Pose2 {
        match self {
            TrajectorySpec::Parametric { segments, .. } => {
                let mut pose = Pose2::IDENTITY;
                let mut remaining = t;
                for (i, s) in segments.iter().enumerate() {
                    let last = i + 1 == segments.len();
                    let dt = if last { remaining } else { remaining.min(s.duration) };
                    pose = pose.compose(&Pose2::exp(Velocity2::new(s.speed, 0.0, s.turn_rate), dt));
                    remaining -= dt;
                    if remaining <= 0.0 {
                        break;
                    }
                }
                pose
            }
            TrajectorySpec::Waypoints { samples, .. } => interpolate_waypoints(samples, t),
        }
    }
}

fn interpolate_waypoints(samples: &[(f64, Pose2)], t: f64) -> Pose2 {
    match samples {
        [] => Pose2::IDENTITY,
        [only] => only.1,
        _ => {
            let i = samples.partition_point(|s| s.0 <= t).clamp(1, samples.len() - 1);
            let (t0, p0) = samples[i - 1];
            let (t1, p1) = samples[i];
            let w = (t - t0) / (t1 - t0);
            let dtheta = normalize_angle(p1.theta - p0.theta);
            Pose2::new(
                p0.x + w * (p1.x - p0.x),
                p0.y + w * (p1.y - p0.y),
                p0.theta + w * dtheta,
            )
        }
    }
}

fn scan_rng(seed: u64, index: u64) -> ChaCha8Rng {
    // splitmix64 finalizer to decorrelate consecutive scan seeds
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Simulates one sweep from a stationary pose; stamped at `t = 0`.
pub fn raycast_scan(
    world: &WorldModel,
    pose: Pose2,
    radar: &RadarConfig,
    noise: &SimNoise,
    seed: u64,
) -> Result<PolarScan> {
    radar.validate()?;
    noise.validate()?;
    let mut rng = scan_rng(seed, 0);
    let power = render_sweep(world, radar, noise, &mut rng, |_| pose);
    PolarScan::with_uniform_timing(*radar, power, 0.0)
}

/// Simulates one sweep per trajectory sample.
///
/// Sweep `i` starts at `start + i/scan_rate` and lasts `radar.sweep_period`;
/// it is stamped, and its ground truth taken, at mid-sweep.
pub fn generate_sequence(
    world: &WorldModel,
    traj: &TrajectorySpec,
    radar: &RadarConfig,
    noise: &SimNoise,
    seed: u64,
) -> Result<(Vec<PolarScan>, Trajectory)> {
    radar.validate()?;
    noise.validate()?;
    traj.validate()?;
    let count = traj.num_scans();
    let mut scans = Vec::with_capacity(count);
    let mut truth = Vec::with_capacity(count);
    for i in 0..count {
        let (scan, pose) = sequence_scan(world, traj, radar, noise, seed, i)?;
        truth.push((scan.timestamp(), pose));
        scans.push(scan);
    }
    Ok((scans, Trajectory::new(truth)?))
}

/// Scan `index` of [`generate_sequence`] and its mid-sweep ground-truth pose.
pub fn sequence_scan(
    world: &WorldModel,
    traj: &TrajectorySpec,
    radar: &RadarConfig,
    noise: &SimNoise,
    seed: u64,
    index: usize,
) -> Result<(PolarScan, Pose2)> {
    let sweep_start = traj.start_time() + index as f64 / traj.scan_rate();
    let mid = sweep_start + 0.5 * radar.sweep_period;
    let stamps = uniform_azimuth_timestamps(radar, mid);
    let mut rng = scan_rng(seed, index as u64);
    let power = render_sweep(world, radar, noise, &mut rng, |a| traj.pose_at(stamps[a]));
    let scan = PolarScan::new(*radar, power, stamps, mid)?;
    Ok((scan, traj.pose_at(mid)))
}

fn render_sweep(
    world: &WorldModel,
    radar: &RadarConfig,
    noise: &SimNoise,
    rng: &mut ChaCha8Rng,
    pose_of_azimuth: impl Fn(usize) -> Pose2,
) -> Vec<f64> {
    let (m, n) = (radar.num_azimuths, radar.num_bins);
    let gamma = radar.range_resolution;
    let max_range = radar.max_measurable_range();
    let mut power = vec![0.0; m * n];
    let jitter = (noise.range_jitter_std > 0.0).then(|| Normal::new(0.0, noise.range_jitter_std).unwrap());
    let power_noise = (noise.power_noise_std > 0.0).then(|| Normal::new(0.0, noise.power_noise_std).unwrap());

    for a in 0..m {
        let pose = pose_of_azimuth(a);
        let dir = Vec2::new(1.0, 0.0).rotated(pose.theta + radar.azimuth_angle(a));
        let row = &mut power[a * n..(a + 1) * n];
        if let Some((range, reflectivity)) = world.cast(pose.translation(), dir, max_range) {
            let range = match &jitter {
                Some(j) => (range + j.sample(rng)).max(0.0),
                None => range,
            };
            let amplitude = POWER_AT_ONE_METER * reflectivity / range.max(gamma);
            deposit_peak(row, range / gamma, amplitude);
            if noise.multipath_rate > 0.0 && rng.random::<f64>() < noise.multipath_rate {
                deposit_peak(row, 2.0 * range / gamma, MULTIPATH_GAIN * amplitude);
            }
        }
        if noise.speckle_rate > 0.0 {
            for p in row.iter_mut() {
                if rng.random::<f64>() < noise.speckle_rate {
                    *p += rng.random::<f64>() * noise.speckle_power_max;
                }
            }
        }
        if let Some(dist) = &power_noise {
            for p in row.iter_mut() {
                *p = (*p + dist.sample(rng)).max(0.0);
            }
        }
    }
    power
}

// Gaussian-shaped peak (σ = 1 bin) centred on fractional bin `center`,
// truncated to ±PEAK_HALF_WIDTH bins around the nearest bin.
fn deposit_peak(row: &mut [f64], center: f64, amplitude: f64) {
    let c = libm::round(center) as i64;
    for b in c - PEAK_HALF_WIDTH..=c + PEAK_HALF_WIDTH {
        if b < 0 || b as usize >= row.len() {
            continue;
        }
        let d = b as f64 - center;
        row[b as usize] += amplitude * libm::exp(-0.5 * d * d);
    }
}


/// Ready-made worlds and trajectories for desk-scale experiments.
pub mod presets {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    /// Corner radius of [`rectangular_loop`].
    pub const LOOP_TURN_RADIUS: f64 = 5.0;
    /// Straight legs of [`rectangular_loop`]; with the four quarter turns the loop is 200 m long.
    pub const LOOP_LEGS: (f64, f64) = (50.0, 34.292_036_732_051_03);

    /// Closed 200 m loop: two pairs of straight legs joined by quarter circles,
    /// driven counter-clockwise from the origin along +x.
    pub fn rectangular_loop(speed: f64, scan_rate: f64) -> TrajectorySpec {
        let turn = MotionSegment {
            speed,
            turn_rate: speed / LOOP_TURN_RADIUS,
            duration: FRAC_PI_2 * LOOP_TURN_RADIUS / speed,
        };
        let leg = |length: f64| MotionSegment {
            speed,
            turn_rate: 0.0,
            duration: length / speed,
        };
        let (a, b) = LOOP_LEGS;
        TrajectorySpec::Parametric {
            segments: vec![leg(a), turn, leg(b), turn, leg(a), turn, leg(b), turn],
            scan_rate,
        }
    }

    /// Walled yard around [`rectangular_loop`] with a central building and clutter.
    pub fn loop_yard() -> WorldModel {
        let mut world = WorldModel::default();
        world.push_box(Vec2::new(-16.0, -11.0), Vec2::new(66.0, 56.0), 1.0);
        world.push_box(Vec2::new(8.0, 9.0), Vec2::new(42.0, 35.0), 0.9);
        // pillars and crates
        for &(x, y, s) in &[
            (12.0, -6.0, 1.0),
            (30.0, -7.5, 1.5),
            (47.0, -6.0, 1.0),
            (61.0, 12.0, 1.2),
            (60.5, 30.0, 1.0),
            (45.0, 50.0, 1.5),
            (22.0, 51.0, 1.0),
            (3.0, 50.5, 1.2),
            (-11.0, 30.0, 1.0),
            (-11.5, 12.0, 1.5),
            (25.0, 4.0, 0.8),
            (48.0, 22.0, 0.8),
            (14.0, 38.5, 1.0),
            (36.0, 39.0, 1.2),
            (33.0, 51.5, 1.0),
            (12.0, 52.0, 1.0),
            (1.0, 20.0, 1.0),
            (-12.0, 21.0, 1.0),
            (38.0, 4.5, 1.0),
            (51.0, 36.0, 1.0),
        ] {
            world.push_box(Vec2::new(x, y), Vec2::new(x + s, y + s), 0.8);
        }
        // slanted walls in the corners of the yard
        for &(ax, ay, bx, by) in &[
            (-16.0, 46.0, -6.0, 56.0),
            (56.0, -11.0, 66.0, -1.0),
            (-16.0, -1.0, -6.0, -11.0),
            (56.0, 56.0, 66.0, 46.0),
        ] {
            world
                .segments
                .push(Segment::new(Vec2::new(ax, ay), Vec2::new(bx, by), 1.0));
        }
        world
    }

    /// 40 m × 30 m room with a few free-standing obstacles, sensor near the middle.
    pub fn box_world() -> WorldModel {
        let mut world = WorldModel::default();
        world.push_box(Vec2::new(-18.0, -13.0), Vec2::new(22.0, 17.0), 1.0);
        world.push_box(Vec2::new(6.0, 5.0), Vec2::new(8.0, 7.0), 0.8);
        world.push_box(Vec2::new(-9.0, -8.0), Vec2::new(-7.5, -6.5), 0.8);
        world
            .segments
            .push(Segment::new(Vec2::new(-12.0, 8.0), Vec2::new(-6.0, 12.0), 0.9));
        world
    }
}

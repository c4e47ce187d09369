//! Polar radar sweeps, polar→Cartesian conversion and per-azimuth filtering.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Vec2, Velocity2};

/// Geometry and timing of a rotating radar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarConfig {
    pub num_azimuths: usize,
    pub num_bins: usize,
    /// Meters per range bin.
    pub range_resolution: f64,
    pub min_range: f64,
    pub max_range: f64,
    /// Duration of one full rotation in seconds.
    pub sweep_period: f64,
}

impl RadarConfig {
    /// Full-range configuration: gate `[0, n·γ]`.
    pub fn new(num_azimuths: usize, num_bins: usize, range_resolution: f64, sweep_period: f64) -> Self {
        Self {
            num_azimuths,
            num_bins,
            range_resolution,
            min_range: 0.0,
            max_range: num_bins as f64 * range_resolution,
            sweep_period,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_azimuths < 4 {
            return Err(Error::Config(format!(
                "need at least 4 azimuths, got {}",
                self.num_azimuths
            )));
        }
        if self.num_bins < 1 {
            return Err(Error::Config("need at least one range bin".into()));
        }
        if !(self.range_resolution > 0.0 && self.range_resolution.is_finite()) {
            return Err(Error::Config(format!(
                "range resolution must be positive, got {}",
                self.range_resolution
            )));
        }
        let full = self.max_measurable_range();
        if !(self.min_range >= 0.0 && self.min_range < self.max_range && self.max_range <= full * (1.0 + 1e-12)) {
            return Err(Error::Config(format!(
                "range gate [{}, {}] must satisfy 0 <= min < max <= {}",
                self.min_range, self.max_range, full
            )));
        }
        if !(self.sweep_period > 0.0 && self.sweep_period.is_finite()) {
            return Err(Error::Config(format!(
                "sweep period must be positive, got {}",
                self.sweep_period
            )));
        }
        Ok(())
    }

    /// `n·γ`.
    pub fn max_measurable_range(&self) -> f64 {
        self.num_bins as f64 * self.range_resolution
    }

    /// Beam angle of azimuth `a`: `2πa/m`.
    #[inline]
    pub fn azimuth_angle(&self, azimuth: usize) -> f64 {
        TAU * azimuth as f64 / self.num_azimuths as f64
    }
}

/// One full sweep of polar power returns, `m` azimuths by `n` range bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarScan {
    config: RadarConfig,
    power: Vec<f64>,
    azimuth_timestamps: Vec<f64>,
    timestamp: f64,
}

impl PolarScan {
    /// Builds a scan from row-major `power` (`m·n` values).
    pub fn new(config: RadarConfig, power: Vec<f64>, azimuth_timestamps: Vec<f64>, timestamp: f64) -> Result<Self> {
        config.validate()?;
        let (m, n) = (config.num_azimuths, config.num_bins);
        if power.len() != m * n {
            return Err(Error::DimensionMismatch {
                rows: power.len() / n,
                cols: n,
                expected_rows: m,
                expected_cols: n,
            });
        }
        if azimuth_timestamps.len() != m {
            return Err(Error::DimensionMismatch {
                rows: azimuth_timestamps.len(),
                cols: 1,
                expected_rows: m,
                expected_cols: 1,
            });
        }
        if let Some(i) = azimuth_timestamps.windows(2).position(|w| !(w[1] >= w[0])) {
            return Err(Error::NonMonotonicTimestamps(i + 1));
        }
        if let Some(i) = power.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::Input(format!(
                "power at azimuth {} bin {} is not a finite non-negative value",
                i / n,
                i % n
            )));
        }
        Ok(Self {
            config,
            power,
            azimuth_timestamps,
            timestamp,
        })
    }

    /// Scan whose azimuths are evenly spread over one sweep centred on `timestamp`.
    pub fn with_uniform_timing(config: RadarConfig, power: Vec<f64>, timestamp: f64) -> Result<Self> {
        let stamps = uniform_azimuth_timestamps(&config, timestamp);
        Self::new(config, power, stamps, timestamp)
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn azimuth_timestamps(&self) -> &[f64] {
        &self.azimuth_timestamps
    }

    /// Power returns of azimuth `a`.
    pub fn row(&self, azimuth: usize) -> &[f64] {
        let n = self.config.num_bins;
        &self.power[azimuth * n..(azimuth + 1) * n]
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    /// Normalized time within the sweep for every azimuth.
    ///
    /// `a/m` unless the azimuth timestamps are strictly increasing, in which
    /// case `(t_a − t_0) / sweep_period` (clamped to `[0, 1]`) is used. Both
    /// agree for a sensor with evenly spaced azimuth stamps.
    pub fn sweep_fractions(&self) -> Vec<f64> {
        let m = self.config.num_azimuths;
        let t = &self.azimuth_timestamps;
        let strictly_increasing = t.windows(2).all(|w| w[1] > w[0]);
        if strictly_increasing {
            let period = self.config.sweep_period;
            t.iter().map(|ta| ((ta - t[0]) / period).clamp(0.0, 1.0)).collect()
        } else {
            (0..m).map(|a| a as f64 / m as f64).collect()
        }
    }
}

/// Azimuth stamps `t_mid − T/2 + a·T/m`.
pub fn uniform_azimuth_timestamps(config: &RadarConfig, mid_sweep_time: f64) -> Vec<f64> {
    let m = config.num_azimuths;
    let start = mid_sweep_time - 0.5 * config.sweep_period;
    (0..m)
        .map(|a| start + config.sweep_period * a as f64 / m as f64)
        .collect()
}

/// A filtered radar return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
    pub intensity: f64,
    pub azimuth_index: usize,
    /// Normalized acquisition time within the sweep, in `[0, 1]`.
    pub sweep_fraction: f64,
}

impl Point2 {
    #[inline]
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Filtered Cartesian points of one sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point2>,
    pub source_timestamp: f64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Converts polar cell `(a, d)` to a Cartesian point at angle `2πa/m` and range `d·γ`.
pub fn polar_to_cartesian(azimuth: usize, bin: usize, config: &RadarConfig) -> Result<Point2> {
    if azimuth >= config.num_azimuths || bin >= config.num_bins {
        return Err(Error::OutOfBounds {
            azimuth,
            bin,
            num_azimuths: config.num_azimuths,
            num_bins: config.num_bins,
        });
    }
    let range = bin as f64 * config.range_resolution;
    let (s, c) = libm::sincos(config.azimuth_angle(azimuth));
    Ok(Point2 {
        x: range * c,
        y: range * s,
        intensity: 0.0,
        azimuth_index: azimuth,
        sweep_fraction: azimuth as f64 / config.num_azimuths as f64,
    })
}

/// Parameters of the k-strongest filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Returns kept per azimuth.
    pub k: usize,
    /// Noise floor in raw power units; returns must be strictly above it.
    pub z_min: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { k: 12, z_min: 55.0 }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.z_min >= 0.0) {
            return Err(Error::Config(format!("z_min must be non-negative, got {}", self.z_min)));
        }
        Ok(())
    }
}

// Per-azimuth trigonometry and timing shared by the filters.
struct RowFrame {
    cos: f64,
    sin: f64,
    sweep_fraction: f64,
}

fn row_frames(scan: &PolarScan) -> Vec<RowFrame> {
    let config = scan.config();
    scan.sweep_fractions()
        .into_iter()
        .enumerate()
        .map(|(a, sweep_fraction)| {
            let (sin, cos) = libm::sincos(config.azimuth_angle(a));
            RowFrame {
                cos,
                sin,
                sweep_fraction,
            }
        })
        .collect()
}

#[inline]
fn make_point(frame: &RowFrame, azimuth: usize, bin: usize, gamma: f64, power: f64) -> Point2 {
    let range = bin as f64 * gamma;
    Point2 {
        x: range * frame.cos,
        y: range * frame.sin,
        intensity: power,
        azimuth_index: azimuth,
        sweep_fraction: frame.sweep_fraction,
    }
}

/// Inclusive bin interval whose ranges `d·γ` lie inside `[min_range, max_range]`.
fn gated_bins(config: &RadarConfig, min_range: f64, max_range: f64) -> Option<(usize, usize)> {
    let gamma = config.range_resolution;
    let mut inside = (0..config.num_bins).filter(|&d| {
        let r = d as f64 * gamma;
        r >= min_range && r <= max_range
    });
    let first = inside.next()?;
    let last = inside.next_back().unwrap_or(first);
    Some((first, last))
}

/// Keeps, per azimuth, the `k` strongest returns above `z_min` inside the scan's range gate.
///
/// Points of one azimuth are emitted strongest first; equal powers favour the
/// nearer bin. Azimuths are emitted in index order.
pub fn k_strongest_filter(scan: &PolarScan, filter: &FilterConfig) -> PointCloud {
    let c = scan.config();
    k_strongest_filter_gated(scan, filter, c.min_range, c.max_range)
}

/// [`k_strongest_filter`] with an explicit range gate instead of the scan's own.
pub fn k_strongest_filter_gated(scan: &PolarScan, filter: &FilterConfig, min_range: f64, max_range: f64) -> PointCloud {
    let config = scan.config();
    let frames = row_frames(scan);
    let gate = gated_bins(config, min_range, max_range);
    let mut points = Vec::with_capacity(config.num_azimuths * filter.k.min(config.num_bins));
    if let Some(gate) = gate {
        let mut best = Vec::with_capacity(filter.k + 1);
        for (a, frame) in frames.iter().enumerate() {
            strongest_in_row(scan.row(a), gate, filter, &mut best);
            points.extend(
                best.iter()
                    .map(|&(p, d)| make_point(frame, a, d, config.range_resolution, p)),
            );
        }
    }
    PointCloud {
        points,
        source_timestamp: scan.timestamp(),
    }
}

/// Parallel [`k_strongest_filter_gated`]; output is identical to the sequential version.
#[cfg(feature = "parallel")]
pub fn k_strongest_filter_gated_par(
    scan: &PolarScan,
    filter: &FilterConfig,
    min_range: f64,
    max_range: f64,
) -> PointCloud {
    use rayon::prelude::*;

    let config = scan.config();
    let frames = row_frames(scan);
    let Some(gate) = gated_bins(config, min_range, max_range) else {
        return PointCloud {
            points: Vec::new(),
            source_timestamp: scan.timestamp(),
        };
    };
    let rows: Vec<Vec<Point2>> = frames
        .par_iter()
        .enumerate()
        .map(|(a, frame)| {
            let mut best = Vec::with_capacity(filter.k + 1);
            strongest_in_row(scan.row(a), gate, filter, &mut best);
            best.iter()
                .map(|&(p, d)| make_point(frame, a, d, config.range_resolution, p))
                .collect()
        })
        .collect();
    PointCloud {
        points: rows.into_iter().flatten().collect(),
        source_timestamp: scan.timestamp(),
    }
}

// Bounded insertion into `best`, ordered by (power desc, bin asc). Bins are
// visited in increasing order, so an equal-power newcomer always ranks last.
fn strongest_in_row(row: &[f64], (lo, hi): (usize, usize), filter: &FilterConfig, best: &mut Vec<(f64, usize)>) {
    best.clear();
    let k = filter.k;
    for (d, &p) in row.iter().enumerate().take(hi + 1).skip(lo) {
        if p <= filter.z_min {
            continue;
        }
        if best.len() == k && p <= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(q, _)| q >= p);
        best.insert(pos, (p, d));
        best.truncate(k);
    }
}

/// Cell-averaging CFAR parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarConfig {
    /// Half-width of the reference window in bins, guard cells included.
    pub window: usize,
    /// Bins on each side of the cell under test excluded from the average.
    pub guard: usize,
    /// Detection threshold as a multiple of the local mean.
    pub scale: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            window: 40,
            guard: 2,
            scale: 1.2,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window <= self.guard {
            return Err(Error::Config(format!(
                "CFAR window {} leaves no training cells beyond guard {}",
                self.window, self.guard
            )));
        }
        if !(self.scale > 0.0) {
            return Err(Error::Config(format!(
                "CFAR scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

/// 1D cell-averaging CFAR along range, applied per azimuth.
///
/// Bin `d` is a detection when its power exceeds `scale` times the mean of the
/// training cells `guard < |j − d| <= window`. Cells near the ends of the row
/// use whatever training cells exist on either side.
pub fn cfar_filter(scan: &PolarScan, cfar: &CfarConfig) -> Result<PointCloud> {
    cfar.validate()?;
    let config = scan.config();
    let n = config.num_bins;
    let frames = row_frames(scan);
    let gate = gated_bins(config, config.min_range, config.max_range);
    let mut points = Vec::new();
    let mut prefix = Vec::with_capacity(n + 1);
    if let Some((lo, hi)) = gate {
        for (a, frame) in frames.iter().enumerate() {
            let row = scan.row(a);
            prefix.clear();
            prefix.push(0.0);
            let mut acc = 0.0;
            for &p in row {
                acc += p;
                prefix.push(acc);
            }
            // sum of row[i..j]
            let sum = |i: usize, j: usize| prefix[j] - prefix[i];
            for d in lo..=hi {
                let left_end = d.saturating_sub(cfar.guard);
                let left_start = d.saturating_sub(cfar.window);
                let right_start = (d + cfar.guard + 1).min(n);
                let right_end = (d + cfar.window + 1).min(n);
                let count = (left_end - left_start) + (right_end - right_start);
                if count == 0 {
                    continue;
                }
                let mean = (sum(left_start, left_end) + sum(right_start, right_end)) / count as f64;
                if row[d] > cfar.scale * mean {
                    points.push(make_point(frame, a, d, config.range_resolution, row[d]));
                }
            }
        }
    }
    Ok(PointCloud {
        points,
        source_timestamp: scan.timestamp(),
    })
}

/// Re-expresses every point in the sensor frame at mid-sweep (`τ = 0.5`),
/// assuming the sensor moved with constant body-frame `velocity`.
pub fn motion_compensate(cloud: &PointCloud, velocity: Velocity2, sweep_period: f64) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let dt = (p.sweep_fraction - 0.5) * sweep_period;
            let q = Pose2::exp(velocity, dt).apply(p.position());
            Point2 { x: q.x, y: q.y, ..*p }
        })
        .collect();
    PointCloud {
        points,
        source_timestamp: cloud.source_timestamp,
    }
}

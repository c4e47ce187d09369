//! Oriented surface points: a sparse `{μ, n}` description of a filtered scan.
//!
//! The cloud is downsampled on a grid of side `r/f`; around every centroid the
//! points within `r` give a sample mean and covariance. Ill-conditioned or
//! under-supported neighbourhoods are dropped, the rest contribute a surface
//! point whose normal is the minor eigenvector of the covariance.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Vec2};
use crate::grid::{cell_of, PointGrid};
use crate::scan::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceConfig {
    /// Neighbourhood radius in meters.
    pub radius: f64,
    /// Grid side is `radius / resample_factor`.
    pub resample_factor: f64,
    /// Largest accepted `λ_max / λ_min`.
    pub condition_max: f64,
    /// Fewest points a neighbourhood may hold.
    pub min_neighbors: usize,
    /// Fewest distinct azimuths a neighbourhood must span.
    pub min_azimuths: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            radius: 3.5,
            resample_factor: 1.0,
            condition_max: 1e5,
            min_neighbors: 6,
            min_azimuths: 2,
        }
    }
}

impl SurfaceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!(
                "surface radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.resample_factor > 0.0 && self.resample_factor.is_finite()) {
            return Err(Error::Config(format!(
                "resample factor must be positive, got {}",
                self.resample_factor
            )));
        }
        if !(self.condition_max > 1.0) {
            return Err(Error::Config(format!(
                "condition bound must exceed 1, got {}",
                self.condition_max
            )));
        }
        if self.min_neighbors < 2 {
            return Err(Error::Config("min_neighbors must be at least 2".into()));
        }
        Ok(())
    }

    /// Downsampling grid side `r/f`.
    pub fn cell_size(&self) -> f64 {
        self.radius / self.resample_factor
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// `R Σ Rᵀ`.
    pub fn rotated(&self, angle: f64) -> Cov2 {
        let (s, c) = libm::sincos(angle);
        let (a, b, d) = (self.xx, self.xy, self.yy);
        Cov2 {
            xx: c * c * a - 2.0 * c * s * b + s * s * d,
            xy: c * s * (a - d) + (c * c - s * s) * b,
            yy: s * s * a + 2.0 * c * s * b + c * c * d,
        }
    }

    /// Eigenvalues `(λ_min, λ_max)` and the unit eigenvector of `λ_min`.
    pub fn eigen(&self) -> (f64, f64, Vec2) {
        let (a, b, c) = (self.xx, self.xy, self.yy);
        let mid = 0.5 * (a + c);
        let rad = libm::hypot(0.5 * (a - c), b);
        let lmax = mid + rad;
        let lmin = mid - rad;
        let v = if b == 0.0 {
            if a <= c {
                Vec2::new(1.0, 0.0)
            } else {
                Vec2::new(0.0, 1.0)
            }
        } else {
            let v1 = Vec2::new(b, lmin - a);
            let v2 = Vec2::new(lmin - c, b);
            let v = if v1.norm_squared() >= v2.norm_squared() { v1 } else { v2 };
            v.scale(1.0 / v.norm())
        };
        (lmin, lmax, v)
    }
}

/// Flips `n` so its first nonzero component is positive.
pub fn canonical_normal(n: Vec2) -> Vec2 {
    if n.x < 0.0 || (n.x == 0.0 && n.y < 0.0) {
        -n
    } else {
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint {
    pub mean: Vec2,
    /// Unit normal, sign canonicalized.
    pub normal: Vec2,
    pub covariance: Cov2,
    pub support_count: usize,
}

impl OrientedPoint {
    pub fn transformed(&self, pose: &Pose2) -> OrientedPoint {
        OrientedPoint {
            mean: pose.apply(self.mean),
            normal: pose.rotate(self.normal),
            covariance: self.covariance.rotated(pose.theta),
            support_count: self.support_count,
        }
    }
}

/// Sparse scan representation: all oriented surface points of one scan.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfacePointSet {
    pub points: Vec<OrientedPoint>,
    pub origin_pose_hint: Option<Pose2>,
    pub timestamp: f64,
}

impl SurfacePointSet {
    pub fn new(points: Vec<OrientedPoint>, timestamp: f64) -> Self {
        Self {
            points,
            origin_pose_hint: None,
            timestamp,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rigidly moves every surface point by `pose`.
    pub fn transformed(&self, pose: &Pose2) -> SurfacePointSet {
        SurfacePointSet {
            points: self.points.iter().map(|p| p.transformed(pose)).collect(),
            origin_pose_hint: Some(match self.origin_pose_hint {
                Some(hint) => pose.compose(&hint),
                None => *pose,
            }),
            timestamp: self.timestamp,
        }
    }
}

/// Centroids of the non-empty cells of an origin-anchored grid, ordered by cell index.
pub fn grid_downsample(cloud: &PointCloud, cell_size: f64) -> Vec<Vec2> {
    let mut cells: BTreeMap<(i64, i64), (Vec2, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let pos = p.position();
        let entry = cells.entry(cell_of(pos, cell_size)).or_insert((Vec2::ZERO, 0));
        entry.0 += pos;
        entry.1 += 1;
    }
    cells
        .into_values()
        .map(|(sum, count)| sum.scale(1.0 / count as f64))
        .collect()
}

/// Fits an oriented point to the cloud neighbourhood of every centroid.
pub fn estimate_oriented_points(centroids: &[Vec2], cloud: &PointCloud, config: &SurfaceConfig) -> SurfacePointSet {
    let grid = PointGrid::new(cloud.points.iter().map(|p| p.position()), config.radius);
    let mut scratch = Scratch::default();
    let points = centroids
        .iter()
        .filter_map(|&c| fit_neighbourhood(c, cloud, &grid, config, &mut scratch))
        .collect();
    SurfacePointSet::new(points, cloud.source_timestamp)
}

/// Parallel [`estimate_oriented_points`]; output order and values are identical.
#[cfg(feature = "parallel")]
pub fn estimate_oriented_points_par(centroids: &[Vec2], cloud: &PointCloud, config: &SurfaceConfig) -> SurfacePointSet {
    use rayon::prelude::*;

    let grid = PointGrid::new(cloud.points.iter().map(|p| p.position()), config.radius);
    let points: Vec<Option<OrientedPoint>> = centroids
        .par_iter()
        .map_init(Scratch::default, |scratch, &c| {
            fit_neighbourhood(c, cloud, &grid, config, scratch)
        })
        .collect();
    SurfacePointSet::new(points.into_iter().flatten().collect(), cloud.source_timestamp)
}

/// Downsample on the `r/f` grid, then fit oriented points.
pub fn extract_surface(cloud: &PointCloud, config: &SurfaceConfig) -> SurfacePointSet {
    let centroids = grid_downsample(cloud, config.cell_size());
    estimate_oriented_points(&centroids, cloud, config)
}

#[derive(Default)]
struct Scratch {
    positions: Vec<Vec2>,
    azimuths: Vec<usize>,
}

fn fit_neighbourhood(
    center: Vec2,
    cloud: &PointCloud,
    grid: &PointGrid,
    config: &SurfaceConfig,
    scratch: &mut Scratch,
) -> Option<OrientedPoint> {
    scratch.positions.clear();
    scratch.azimuths.clear();
    grid.for_each_within(center, config.radius, |i, _| {
        let p = &cloud.points[i];
        scratch.positions.push(p.position());
        scratch.azimuths.push(p.azimuth_index);
    });
    let count = scratch.positions.len();
    if count < config.min_neighbors {
        return None;
    }
    if config.min_azimuths > 1 {
        scratch.azimuths.sort_unstable();
        scratch.azimuths.dedup();
        if scratch.azimuths.len() < config.min_azimuths {
            return None;
        }
    }
    let (mean, covariance) = mean_and_covariance(&scratch.positions);
    let (lmin, lmax, normal) = covariance.eigen();
    if !(lmin > 0.0) || lmax > config.condition_max * lmin {
        return None;
    }
    Some(OrientedPoint {
        mean,
        normal: canonical_normal(normal),
        covariance,
        support_count: count,
    })
}

/// Sample mean and unbiased (`1/(N−1)`) sample covariance. Needs at least two points.
pub fn mean_and_covariance(points: &[Vec2]) -> (Vec2, Cov2) {
    let n = points.len() as f64;
    let mut sum = Vec2::ZERO;
    for &p in points {
        sum += p;
    }
    let mean = sum.scale(1.0 / n);
    let mut cov = Cov2::default();
    for &p in points {
        let d = p - mean;
        cov.xx += d.x * d.x;
        cov.xy += d.x * d.y;
        cov.yy += d.y * d.y;
    }
    let norm = 1.0 / (n - 1.0);
    cov.xx *= norm;
    cov.xy *= norm;
    cov.yy *= norm;
    (mean, cov)
}

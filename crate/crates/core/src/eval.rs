//! KITTI-style relative drift over fixed-length sub-paths, adapted to SE(2).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Pose2;

/// Timestamped poses with strictly increasing stamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    samples: Vec<(f64, Pose2)>,
}

impl Trajectory {
    pub fn new(samples: Vec<(f64, Pose2)>) -> Result<Self> {
        if let Some(i) = samples.windows(2).position(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::NonMonotonicTimestamps(i + 1));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, Pose2)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = Pose2> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    /// Cumulative path length at every sample.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.samples.len());
        let mut prev: Option<Pose2> = None;
        for &(_, p) in &self.samples {
            if let Some(q) = prev {
                acc += (p.translation() - q.translation()).norm();
            }
            out.push(acc);
            prev = Some(p);
        }
        out
    }

    /// Every pose pre-multiplied by `g`.
    pub fn transformed(&self, g: &Pose2) -> Trajectory {
        Trajectory {
            samples: self.samples.iter().map(|&(t, p)| (t, g.compose(&p))).collect(),
        }
    }
}

const ARC_TOLERANCE: f64 = 1e-12;

/// Sub-path lengths used by the KITTI odometry benchmark.
pub const KITTI_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthError {
    pub length: f64,
    pub translation_error_percent: f64,
    pub rotation_error_deg_per_100m: f64,
    /// Sub-paths averaged for this length; zero when the trajectory is too short.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub translation_error_percent: f64,
    pub rotation_error_deg_per_100m: f64,
    /// Total sub-paths averaged.
    pub segment_count: usize,
    pub per_length: Vec<LengthError>,
}

/// Mean relative translation (%) and rotation (deg/100 m) error over all
/// sub-paths of the given lengths, starting at every `stride`-th sample.
pub fn kitti_relative_errors(
    ground_truth: &Trajectory,
    estimate: &Trajectory,
    lengths: &[f64],
    stride: usize,
) -> Result<EvalResult> {
    if ground_truth.len() != estimate.len() {
        return Err(Error::Alignment(format!(
            "{} ground-truth samples vs {} estimated",
            ground_truth.len(),
            estimate.len()
        )));
    }
    for (i, (g, e)) in ground_truth.samples.iter().zip(&estimate.samples).enumerate() {
        if (g.0 - e.0).abs() > 1e-6 * g.0.abs().max(1.0) {
            return Err(Error::Alignment(format!(
                "sample {i}: ground truth at {} but estimate at {}",
                g.0, e.0
            )));
        }
    }
    if lengths.is_empty() || lengths.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Input("sub-path lengths must be positive".into()));
    }
    let stride = stride.max(1);
    let dist = ground_truth.arc_lengths();
    let available = dist.last().copied().unwrap_or(0.0);
    let shortest = lengths.iter().copied().fold(f64::INFINITY, f64::min);

    let gt: Vec<Pose2> = ground_truth.poses().collect();
    let est: Vec<Pose2> = estimate.poses().collect();
    let mut per_length = Vec::with_capacity(lengths.len());
    let (mut t_sum, mut r_sum, mut total) = (0.0, 0.0, 0usize);
    for &length in lengths {
        let (mut t_acc, mut r_acc, mut count) = (0.0, 0.0, 0usize);
        for start in (0..gt.len()).step_by(stride) {
            // a shortfall at rounding level counts as reaching the length, so ties
            // between evenly spaced samples do not depend on the world frame
            let target = dist[start] + length - ARC_TOLERANCE * (dist[start] + length).max(1.0);
            let end = start + dist[start..].partition_point(|&d| d < target);
            if end >= gt.len() {
                break;
            }
            let gt_rel = gt[start].between(&gt[end]);
            let est_rel = est[start].between(&est[end]);
            let err = gt_rel.between(&est_rel);
            t_acc += err.translation().norm() / length;
            r_acc += err.theta.abs() / length;
            count += 1;
        }
        t_sum += t_acc;
        r_sum += r_acc;
        total += count;
        per_length.push(LengthError {
            length,
            translation_error_percent: if count > 0 { 100.0 * t_acc / count as f64 } else { 0.0 },
            rotation_error_deg_per_100m: if count > 0 {
                100.0 * (r_acc / count as f64).to_degrees()
            } else {
                0.0
            },
            count,
        });
    }
    if total == 0 {
        return Err(Error::InsufficientLength {
            available,
            required: shortest,
        });
    }
    Ok(EvalResult {
        translation_error_percent: 100.0 * t_sum / total as f64,
        rotation_error_deg_per_100m: 100.0 * (r_sum / total as f64).to_degrees(),
        segment_count: total,
        per_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn straight(n: usize, scale: f64, heading_rate: f64) -> Trajectory {
        // heading_rate in radians per meter of travel
        let mut samples = Vec::with_capacity(n);
        let (mut x, mut y) = (0.0, 0.0);
        for i in 0..n {
            let theta = heading_rate * i as f64;
            samples.push((i as f64, Pose2::new(x, y, theta)));
            x += scale * libm::cos(theta);
            y += scale * libm::sin(theta);
        }
        Trajectory::new(samples).unwrap()
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let gt = straight(901, 1.0, 0.0);
        let r = kitti_relative_errors(&gt, &gt, &KITTI_LENGTHS, 1).unwrap();
        assert_eq!(r.translation_error_percent, 0.0);
        assert_eq!(r.rotation_error_deg_per_100m, 0.0);
        assert!(r.per_length.iter().all(|l| l.count > 0));
    }

    #[test]
    fn scaled_straight_line() {
        let gt = straight(901, 1.0, 0.0);
        let est = straight(901, 1.01, 0.0);
        let r = kitti_relative_errors(&gt, &est, &KITTI_LENGTHS, 1).unwrap();
        assert!((r.translation_error_percent - 1.0).abs() < 1e-6);
        assert_eq!(r.rotation_error_deg_per_100m, 0.0);
        for l in &r.per_length {
            assert!((l.translation_error_percent - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_heading_bias() {
        let gt = straight(901, 1.0, 0.0);
        let rate = (0.1f64 / 100.0).to_radians();
        let est = Trajectory::new(
            gt.samples()
                .iter()
                .enumerate()
                .map(|(i, &(t, p))| (t, Pose2::new(p.x, p.y, rate * i as f64)))
                .collect(),
        )
        .unwrap();
        let r = kitti_relative_errors(&gt, &est, &KITTI_LENGTHS, 1).unwrap();
        assert!((r.rotation_error_deg_per_100m - 0.1).abs() < 1e-9);
    }

    #[test]
    fn rejects_misaligned_or_short_inputs() {
        let gt = straight(50, 1.0, 0.0);
        assert!(matches!(
            kitti_relative_errors(&gt, &straight(49, 1.0, 0.0), &KITTI_LENGTHS, 1),
            Err(Error::Alignment(_))
        ));
        assert!(matches!(
            kitti_relative_errors(&gt, &gt, &KITTI_LENGTHS, 1),
            Err(Error::InsufficientLength { .. })
        ));
        let shifted = Trajectory::new(gt.samples().iter().map(|&(t, p)| (t + 0.5, p)).collect()).unwrap();
        assert!(matches!(
            kitti_relative_errors(&gt, &shifted, &[10.0], 1),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn stride_thins_start_points() {
        let gt = straight(301, 1.0, 0.0);
        let all = kitti_relative_errors(&gt, &gt, &[100.0], 1).unwrap();
        let every_tenth = kitti_relative_errors(&gt, &gt, &[100.0], 10).unwrap();
        assert_eq!(all.segment_count, 201);
        assert_eq!(every_tenth.segment_count, 21);
    }

    #[test]
    fn trajectory_requires_increasing_stamps() {
        assert!(Trajectory::new(vec![(1.0, Pose2::IDENTITY), (1.0, Pose2::IDENTITY)]).is_err());
        assert!(Trajectory::new(vec![]).unwrap().is_empty());
    }
}

//! Learning-free 2D radar odometry for rotating FMCW sensors.
//!
//! The pipeline keeps the `k` strongest returns per azimuth, condenses the
//! filtered cloud into oriented surface points and registers each scan
//! against a sliding window of keyframes with a Huber-robust point-to-line
//! cost. A ray-casting simulator and a KITTI-style drift metric live next to
//! the pipeline so every stage can be checked without a dataset.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line front end live in the `radar-odom` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod geometry;
pub mod odometry;
pub mod registration;
pub mod scan;
pub mod sim;
pub mod solver;
pub mod surface;

mod grid;

pub use crate::error::{Error, Result};
pub use crate::eval::{kitti_relative_errors, EvalResult, LengthError, Trajectory};
pub use crate::geometry::{Pose2, Vec2, Velocity2};
pub use crate::odometry::{
    Clock, FrameStatus, Keyframe, KeyframeWindow, NoClock, OdometryConfig, OdometryState, RangeGate, StageTimings,
};
pub use crate::registration::{Correspondence, RegConfig, RegistrationResult};
pub use crate::scan::{FilterConfig, Point2, PointCloud, PolarScan, RadarConfig};
pub use crate::sim::{MotionSegment, Segment, SimNoise, TrajectorySpec, WorldModel};
pub use crate::surface::{OrientedPoint, SurfaceConfig, SurfacePointSet};

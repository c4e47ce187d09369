use alloc::string::String;

/// Errors raised by the odometry core.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index out of bounds: azimuth {azimuth} of {num_azimuths}, bin {bin} of {num_bins}")]
    OutOfBounds {
        azimuth: usize,
        bin: usize,
        num_azimuths: usize,
        num_bins: usize,
    },

    #[error("power grid is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("timestamps are not monotonic at index {0}")]
    NonMonotonicTimestamps(usize),

    #[error("time went backwards: {previous} -> {current}")]
    TimeRegression { previous: f64, current: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("trajectories are not aligned: {0}")]
    Alignment(String),

    #[error("trajectory is {available:.3} m long, shorter than the {required:.3} m sub-sequence")]
    InsufficientLength { available: f64, required: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

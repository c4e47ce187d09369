//! Flat `key = value` run configuration with dotted section prefixes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use radar_odom_core::sim::SimNoise;
use radar_odom_core::{OdometryConfig, RadarConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("{0}")]
    Invalid(String),
}

/// Everything a run needs besides file paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub odometry: OdometryConfig,
    /// `None` keeps the association radius equal to the surface radius.
    pub association_radius: Option<f64>,
    /// Sensor model used by `simulate`.
    pub radar: RadarConfig,
    pub noise: SimNoise,
    pub seed: u64,
    /// Worker threads; 1 keeps every stage sequential.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            odometry: OdometryConfig::default(),
            association_radius: None,
            radar: RadarConfig::new(400, 800, 0.175, 0.25),
            noise: SimNoise::NONE,
            seed: 0,
            threads: 1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("{key}: cannot parse {value:?}"))
}

// One table drives both `set` and `dump`.
macro_rules! keys {
    ($($key:literal => $($field:ident).+;)*) => {
        impl RunConfig {
            /// Sets one dotted key from its text value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
                match key {
                    $($key => self.$($field).+ = parse_value(key, value)?,)*
                    "registration.association_radius" => {
                        self.association_radius = Some(parse_value(key, value)?)
                    }
                    _ => return Err(format!("unknown key {key:?}")),
                }
                // the simulated sensor always sees its full range
                self.radar.max_range = self.radar.max_measurable_range();
                Ok(())
            }

            /// Every key with its current value, in a form [`RunConfig::parse`] reads back.
            pub fn dump(&self) -> String {
                let mut out = String::new();
                $(let _ = writeln!(out, "{} = {}", $key, self.$($field).+);)*
                match self.association_radius {
                    Some(r) => {
                        let _ = writeln!(out, "registration.association_radius = {r}");
                    }
                    None => out.push_str("# registration.association_radius follows surface.radius\n"),
                }
                out
            }
        }
    };
}

keys! {
    "radar.num_azimuths" => radar.num_azimuths;
    "radar.num_bins" => radar.num_bins;
    "radar.range_resolution" => radar.range_resolution;
    "radar.sweep_period" => radar.sweep_period;
    "radar.min_range" => odometry.range_gate.min_range;
    "radar.max_range" => odometry.range_gate.max_range;
    "filter.k" => odometry.filter.k;
    "filter.z_min" => odometry.filter.z_min;
    "surface.radius" => odometry.surface.radius;
    "surface.resample_factor" => odometry.surface.resample_factor;
    "surface.condition_max" => odometry.surface.condition_max;
    "surface.min_neighbors" => odometry.surface.min_neighbors;
    "surface.min_azimuths" => odometry.surface.min_azimuths;
    "registration.huber_delta" => odometry.registration.huber_delta;
    "registration.normal_tolerance_deg" => odometry.registration.normal_tolerance_deg;
    "registration.max_outer_iterations" => odometry.registration.max_outer_iterations;
    "registration.param_tolerance" => odometry.registration.param_tolerance;
    "registration.min_correspondences" => odometry.registration.min_correspondences;
    "registration.max_inner_iterations" => odometry.registration.max_inner_iterations;
    "registration.gradient_tolerance" => odometry.registration.gradient_tolerance;
    "keyframe.min_translation" => odometry.keyframe_min_translation;
    "keyframe.min_rotation_deg" => odometry.keyframe_min_rotation_deg;
    "keyframe.window_size" => odometry.window_size;
    "odometry.motion_compensation" => odometry.motion_compensation;
    "odometry.prediction" => odometry.prediction;
    "sim.power_noise_std" => noise.power_noise_std;
    "sim.range_jitter_std" => noise.range_jitter_std;
    "sim.speckle_rate" => noise.speckle_rate;
    "sim.speckle_power_max" => noise.speckle_power_max;
    "sim.multipath_rate" => noise.multipath_rate;
    "run.seed" => seed;
    "run.threads" => threads;
}

impl RunConfig {
    /// Reads `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Line { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            config.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("override {assignment:?} is not `key=value`")))?;
        self.set(key.trim(), value.trim()).map_err(ConfigError::Invalid)
    }

    /// The odometry configuration actually run, validated.
    pub fn effective_odometry(&self) -> Result<OdometryConfig, ConfigError> {
        let mut cfg = self.odometry;
        cfg.registration.association_radius = self.association_radius.unwrap_or(cfg.surface.radius);
        cfg.parallel = self.threads > 1;
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.effective_odometry()?;
        self.radar.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.noise.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.threads == 0 {
            return Err(ConfigError::Invalid("run.threads must be at least 1".into()));
        }
        Ok(())
    }
}

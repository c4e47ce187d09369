//! Text file formats: polar scans, trajectories, worlds and trajectory specs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use radar_odom_core::sim::{MotionSegment, Segment, TrajectorySpec, WorldModel};
use radar_odom_core::{Error as CoreError, PolarScan, Pose2, RadarConfig, Trajectory, Vec2};

/// Sweep period assumed when a scan header omits it.
pub const DEFAULT_SWEEP_PERIOD: f64 = 0.25;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed scan header: {0}")]
    MalformedHeader(String),

    #[error("scan dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("azimuth timestamps decrease at row {0}")]
    NonMonotonicTimestamps(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Invalid(#[from] CoreError),

    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn number(token: &str, line: usize, what: &str) -> Result<f64> {
    token.parse::<f64>().map_err(|_| FormatError::Parse {
        line,
        message: format!("{what}: cannot parse {token:?} as a number"),
    })
}

// Lines that carry data, with 1-based line numbers; blank lines and `#` comments are skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses a portable polar scan.
///
/// The header is `m n gamma min_range max_range [sweep_period scan_timestamp]`.
/// Each of the `m` rows holds `azimuth_timestamp p_0 .. p_{n-1}`, or only the
/// `n` powers, in which case the azimuths are spread evenly over the sweep.
/// Without a scan timestamp the midpoint of the azimuth stamps is used.
pub fn parse_scan(text: &str) -> Result<PolarScan> {
    let mut lines = content_lines(text);
    let (_, header) = lines
        .next()
        .ok_or_else(|| FormatError::MalformedHeader("file is empty".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 && fields.len() != 7 {
        return Err(FormatError::MalformedHeader(format!(
            "expected 5 or 7 fields, found {}",
            fields.len()
        )));
    }
    let count = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| FormatError::MalformedHeader(format!("{what} {s:?} is not a non-negative integer")))
    };
    let real = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| FormatError::MalformedHeader(format!("{what} {s:?} is not a number")))
    };
    let m = count(fields[0], "azimuth count")?;
    let n = count(fields[1], "bin count")?;
    let config = RadarConfig {
        num_azimuths: m,
        num_bins: n,
        range_resolution: real(fields[2], "range resolution")?,
        min_range: real(fields[3], "min range")?,
        max_range: real(fields[4], "max range")?,
        sweep_period: if fields.len() == 7 {
            real(fields[5], "sweep period")?
        } else {
            DEFAULT_SWEEP_PERIOD
        },
    };
    config
        .validate()
        .map_err(|e| FormatError::MalformedHeader(e.to_string()))?;
    let header_stamp = if fields.len() == 7 {
        Some(real(fields[6], "scan timestamp")?)
    } else {
        None
    };

    let mut power = Vec::with_capacity(m * n);
    let mut stamps = Vec::with_capacity(m);
    let mut with_stamps = None;
    let mut rows = 0;
    for (line, row) in lines {
        rows += 1;
        if rows > m {
            continue;
        }
        let tokens: Vec<&str> = row.split_whitespace().collect();
        let stamped = match tokens.len() {
            len if len == n + 1 => true,
            len if len == n => false,
            len => {
                return Err(FormatError::DimensionMismatch(format!(
                    "line {line} has {len} values, expected {} or {n}",
                    n + 1
                )))
            }
        };
        if *with_stamps.get_or_insert(stamped) != stamped {
            return Err(FormatError::DimensionMismatch(format!(
                "line {line}: rows mix stamped and unstamped layouts"
            )));
        }
        let (stamp, values) = if stamped {
            (Some(number(tokens[0], line, "azimuth timestamp")?), &tokens[1..])
        } else {
            (None, &tokens[..])
        };
        if let Some(t) = stamp {
            stamps.push(t);
        }
        for v in values {
            let p = number(v, line, "power")?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(FormatError::Parse {
                    line,
                    message: format!("power {v} is not a finite non-negative value"),
                });
            }
            power.push(p);
        }
    }
    if rows != m {
        return Err(FormatError::DimensionMismatch(format!(
            "found {rows} azimuth rows, expected {m}"
        )));
    }

    let result = if with_stamps == Some(true) {
        let timestamp = header_stamp.unwrap_or_else(|| 0.5 * (stamps[0] + stamps[m - 1]));
        PolarScan::new(config, power, stamps, timestamp)
    } else {
        PolarScan::with_uniform_timing(config, power, header_stamp.unwrap_or(0.0))
    };
    result.map_err(|e| match e {
        CoreError::NonMonotonicTimestamps(i) => FormatError::NonMonotonicTimestamps(i),
        CoreError::DimensionMismatch { .. } => FormatError::DimensionMismatch(e.to_string()),
        other => FormatError::Invalid(other),
    })
}

/// Renders a scan in the 7-field header layout with per-azimuth stamps.
pub fn format_scan(scan: &PolarScan) -> String {
    let c = scan.config();
    let mut out = String::with_capacity(c.num_azimuths * c.num_bins * 4);
    let _ = writeln!(
        out,
        "{} {} {} {} {} {} {}",
        c.num_azimuths,
        c.num_bins,
        c.range_resolution,
        c.min_range,
        c.max_range,
        c.sweep_period,
        scan.timestamp()
    );
    for (a, t) in scan.azimuth_timestamps().iter().enumerate() {
        let _ = write!(out, "{t}");
        for p in scan.row(a) {
            let _ = write!(out, " {p}");
        }
        out.push('\n');
    }
    out
}

pub fn read_scan(path: &Path) -> Result<PolarScan> {
    parse_scan(&read(path)?)
}

pub fn write_scan(path: &Path, scan: &PolarScan) -> Result<()> {
    write(path, &format_scan(scan))
}

/// Regular files in `dir`, sorted by file name.
pub fn list_scan_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |source| FormatError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        if entry.file_type().map_err(io)?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Parses `timestamp x y theta` lines.
pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let mut samples = Vec::new();
    for (line, row) in content_lines(text) {
        let tokens: Vec<&str> = row.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(FormatError::Parse {
                line,
                message: format!("expected `timestamp x y theta`, found {} fields", tokens.len()),
            });
        }
        let t = number(tokens[0], line, "timestamp")?;
        let x = number(tokens[1], line, "x")?;
        let y = number(tokens[2], line, "y")?;
        let theta = number(tokens[3], line, "theta")?;
        if let Some(&(prev, _)) = samples.last() {
            if !(t > prev) {
                return Err(FormatError::Parse {
                    line,
                    message: format!("timestamp {t} does not follow {prev}"),
                });
            }
        }
        samples.push((t, Pose2 { x, y, theta }));
    }
    Ok(Trajectory::new(samples)?)
}

/// Shortest round-trip decimal representation, one sample per line.
pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut out = String::new();
    for (t, p) in traj.samples() {
        let _ = writeln!(out, "{} {} {} {}", t, p.x, p.y, p.theta);
    }
    out
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory(&read(path)?)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write(path, &format_trajectory(traj))
}

/// Parses `ax ay bx by reflectivity` lines.
pub fn parse_world(text: &str) -> Result<WorldModel> {
    let mut segments = Vec::new();
    for (line, row) in content_lines(text) {
        let tokens: Vec<&str> = row.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(FormatError::Parse {
                line,
                message: format!("expected `ax ay bx by reflectivity`, found {} fields", tokens.len()),
            });
        }
        let v: Vec<f64> = tokens
            .iter()
            .map(|t| number(t, line, "segment"))
            .collect::<Result<_>>()?;
        if !(0.0..=1.0).contains(&v[4]) {
            return Err(FormatError::Parse {
                line,
                message: format!("reflectivity {} is outside [0, 1]", v[4]),
            });
        }
        let (a, b) = (Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]));
        if a == b || !a.is_finite() || !b.is_finite() {
            return Err(FormatError::Parse {
                line,
                message: "segment endpoints must be finite and distinct".into(),
            });
        }
        segments.push(Segment::new(a, b, v[4]));
    }
    Ok(WorldModel::new(segments)?)
}

pub fn format_world(world: &WorldModel) -> String {
    let mut out = String::new();
    for s in world.segments() {
        let _ = writeln!(out, "{} {} {} {} {}", s.a.x, s.a.y, s.b.x, s.b.y, s.reflectivity);
    }
    out
}

pub fn read_world(path: &Path) -> Result<WorldModel> {
    parse_world(&read(path)?)
}

/// Parses a trajectory spec.
///
/// ```text
/// scan_rate = 4
/// segment = 5.0 0.0 10.0      # speed turn_rate duration
/// ```
///
/// or `waypoints = path` naming a trajectory file, resolved against `base_dir`.
pub fn parse_trajectory_spec(text: &str, base_dir: &Path) -> Result<TrajectorySpec> {
    let mut scan_rate = None;
    let mut segments = Vec::new();
    let mut waypoints = None;
    for (line, row) in content_lines(text) {
        let row = row.split('#').next().unwrap_or("").trim();
        let (key, value) = row.split_once('=').ok_or_else(|| FormatError::Parse {
            line,
            message: "expected `key = value`".into(),
        })?;
        let value = value.trim();
        match key.trim() {
            "scan_rate" => scan_rate = Some(number(value, line, "scan_rate")?),
            "segment" => {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(|t| number(t, line, "segment"))
                    .collect::<Result<_>>()?;
                if v.len() != 3 {
                    return Err(FormatError::Parse {
                        line,
                        message: "segment needs `speed turn_rate duration`".into(),
                    });
                }
                segments.push(MotionSegment {
                    speed: v[0],
                    turn_rate: v[1],
                    duration: v[2],
                });
            }
            "waypoints" => waypoints = Some(base_dir.join(value)),
            other => {
                return Err(FormatError::Parse {
                    line,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    let scan_rate = scan_rate.ok_or_else(|| FormatError::Parse {
        line: 0,
        message: "missing scan_rate".into(),
    })?;
    let spec = match (waypoints, segments.is_empty()) {
        (Some(_), false) => {
            return Err(FormatError::Parse {
                line: 0,
                message: "use either segments or waypoints, not both".into(),
            })
        }
        (Some(path), true) => TrajectorySpec::Waypoints {
            samples: read_trajectory(&path)?.samples().to_vec(),
            scan_rate,
        },
        (None, _) => TrajectorySpec::Parametric { segments, scan_rate },
    };
    spec.validate()?;
    Ok(spec)
}

pub fn read_trajectory_spec(path: &Path) -> Result<TrajectorySpec> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_trajectory_spec(&read(path)?, base)
}

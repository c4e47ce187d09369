//! The `odometry`, `simulate` and `eval` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use radar_odom_core::eval::{kitti_relative_errors, EvalResult};
use radar_odom_core::odometry::{process_scan_timed, Clock, FrameStatus, OdometryState};
use radar_odom_core::sim::{presets, sequence_scan, TrajectorySpec, WorldModel};
use radar_odom_core::{PolarScan, Pose2, Trajectory};

use crate::config::RunConfig;
use crate::formats;
use crate::plot;

pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const STATUS_FILE: &str = "status.txt";
pub const TIMING_FILE: &str = "timing.txt";
pub const CONFIG_FILE: &str = "config.txt";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.txt";
pub const SCAN_DIR: &str = "scans";
pub const REPORT_FILE: &str = "report.txt";
pub const PLOT_FILE: &str = "trajectory.svg";

/// Wall clock for per-stage timings.
pub struct StdClock {
    origin: Instant,
}

impl Default for StdClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for StdClock {
    fn now_ms(&self) -> f64 {
        self.origin.elapsed().as_secs_f64() * 1e3
    }
}

/// Runs `f` on a dedicated pool when more than one thread is requested.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    Ok(pool.install(f))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone)]
pub struct OdometryRun {
    pub trajectory: Trajectory,
    pub statuses: Vec<FrameStatus>,
    /// Wall time of each `process_scan` call in milliseconds.
    pub frame_ms: Vec<f64>,
}

impl OdometryRun {
    pub fn mean_frame_ms(&self) -> f64 {
        if self.frame_ms.is_empty() {
            return 0.0;
        }
        self.frame_ms.iter().sum::<f64>() / self.frame_ms.len() as f64
    }

    pub fn keyframes_created(&self) -> usize {
        self.statuses.iter().filter(|s| s.keyframe_created).count()
    }
}

/// Feeds scans through the pipeline in order, timing each call.
pub fn run_odometry<I>(scans: I, config: &RunConfig) -> Result<OdometryRun>
where
    I: IntoIterator<Item = Result<PolarScan>>,
{
    let cfg = config.effective_odometry()?;
    let clock = StdClock::default();
    let mut state = OdometryState::new(&cfg);
    let mut samples = Vec::new();
    let mut statuses = Vec::new();
    let mut frame_ms = Vec::new();
    for scan in scans {
        let scan = scan?;
        let start = Instant::now();
        let (pose, status) = process_scan_timed(&mut state, &scan, &cfg, &clock)?;
        frame_ms.push(start.elapsed().as_secs_f64() * 1e3);
        samples.push((scan.timestamp(), pose));
        statuses.push(status);
    }
    Ok(OdometryRun {
        trajectory: Trajectory::new(samples)?,
        statuses,
        frame_ms,
    })
}

pub fn format_status_log(statuses: &[FrameStatus]) -> String {
    let mut out = String::from(
        "# frame timestamp converged degraded correspondences final_cost filtered_points surface_points keyframe_created keyframes\n",
    );
    for s in statuses {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {}",
            s.frame_index,
            s.timestamp,
            s.converged as u8,
            s.degraded as u8,
            s.correspondence_count,
            s.final_cost,
            s.filtered_points,
            s.surface_points,
            s.keyframe_created as u8,
            s.keyframe_count
        );
    }
    out
}

fn format_timing_log(run: &OdometryRun) -> String {
    let mut out = String::from("# frame frame_ms filter_ms compensate_ms surface_ms register_ms\n");
    for (s, ms) in run.statuses.iter().zip(&run.frame_ms) {
        let t = &s.timings;
        let _ = writeln!(
            out,
            "{} {:.4} {:.4} {:.4} {:.4} {:.4}",
            s.frame_index, ms, t.filter_ms, t.compensate_ms, t.surface_ms, t.register_ms
        );
    }
    out
}

/// Processes every file of `scan_dir` in name order and writes the results to `out_dir`.
///
/// Everything but the timing log is a pure function of the inputs.
pub fn cmd_odometry(scan_dir: &Path, config: &RunConfig, out_dir: &Path) -> Result<OdometryRun> {
    config.validate()?;
    let files = formats::list_scan_files(scan_dir)?;
    if files.is_empty() {
        bail!("no scan files in {}", scan_dir.display());
    }
    create_dir(out_dir)?;
    write_text(&out_dir.join(CONFIG_FILE), &config.dump())?;
    let run = with_threads(config.threads, || {
        run_odometry(
            files
                .iter()
                .map(|f| formats::read_scan(f).with_context(|| format!("reading {}", f.display()))),
            config,
        )
    })??;
    formats::write_trajectory(&out_dir.join(TRAJECTORY_FILE), &run.trajectory)?;
    write_text(&out_dir.join(STATUS_FILE), &format_status_log(&run.statuses))?;
    write_text(&out_dir.join(TIMING_FILE), &format_timing_log(&run))?;
    Ok(run)
}

/// `builtin:<name>` selects a bundled world instead of a file.
pub fn load_world(spec: &str) -> Result<WorldModel> {
    match spec.strip_prefix("builtin:") {
        Some("loop_yard") => Ok(presets::loop_yard()),
        Some("box_world") => Ok(presets::box_world()),
        Some(other) => bail!("unknown builtin world {other:?} (try loop_yard or box_world)"),
        None => Ok(formats::read_world(Path::new(spec))?),
    }
}

/// `builtin:loop` is the 200 m loop at 5 m/s and 4 Hz.
pub fn load_trajectory_spec(spec: &str) -> Result<TrajectorySpec> {
    match spec.strip_prefix("builtin:") {
        Some("loop") => Ok(presets::rectangular_loop(5.0, 4.0)),
        Some(other) => bail!("unknown builtin trajectory {other:?} (try loop)"),
        None => Ok(formats::read_trajectory_spec(Path::new(spec))?),
    }
}

/// Name of scan `index` out of `count`; zero padded so names sort in time order.
pub fn scan_file_name(index: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(6);
    format!("scan_{index:0width$}.txt")
}

/// Writes `out_dir/scans/*` and `out_dir/ground_truth.txt`.
pub fn cmd_simulate(
    world: &WorldModel,
    traj: &TrajectorySpec,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Trajectory> {
    config.validate()?;
    traj.validate()?;
    let count = traj.num_scans();
    let scan_dir = out_dir.join(SCAN_DIR);
    create_dir(&scan_dir)?;
    write_text(&out_dir.join(CONFIG_FILE), &config.dump())?;
    let render = |i: usize| -> Result<(f64, Pose2)> {
        let (scan, pose) = sequence_scan(world, traj, &config.radar, &config.noise, config.seed, i)?;
        let path: PathBuf = scan_dir.join(scan_file_name(i, count));
        formats::write_scan(&path, &scan)?;
        Ok((scan.timestamp(), pose))
    };
    let truth: Vec<(f64, Pose2)> = with_threads(config.threads, || {
        if config.threads > 1 {
            (0..count).into_par_iter().map(render).collect::<Result<Vec<_>>>()
        } else {
            (0..count).map(render).collect::<Result<Vec<_>>>()
        }
    })??;
    let truth = Trajectory::new(truth)?;
    formats::write_trajectory(&out_dir.join(GROUND_TRUTH_FILE), &truth)?;
    Ok(truth)
}

pub fn format_report(result: &EvalResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "translation_error_percent = {}", result.translation_error_percent);
    let _ = writeln!(
        out,
        "rotation_error_deg_per_100m = {}",
        result.rotation_error_deg_per_100m
    );
    let _ = writeln!(out, "segment_count = {}", result.segment_count);
    for l in &result.per_length {
        let _ = writeln!(
            out,
            "length_{}.translation_error_percent = {}",
            l.length, l.translation_error_percent
        );
        let _ = writeln!(
            out,
            "length_{}.rotation_error_deg_per_100m = {}",
            l.length, l.rotation_error_deg_per_100m
        );
        let _ = writeln!(out, "length_{}.count = {}", l.length, l.count);
    }
    out
}

/// Scores `est` against `gt`, writing `report.txt` and `trajectory.svg` into `out_dir`.
pub fn cmd_eval(gt_path: &Path, est_path: &Path, out_dir: &Path, lengths: &[f64], stride: usize) -> Result<EvalResult> {
    let gt = formats::read_trajectory(gt_path)?;
    let est = formats::read_trajectory(est_path)?;
    let result = kitti_relative_errors(&gt, &est, lengths, stride)?;
    create_dir(out_dir)?;
    write_text(&out_dir.join(REPORT_FILE), &format_report(&result))?;
    plot::emit_plot(&out_dir.join(PLOT_FILE), &est, Some(&gt))?;
    Ok(result)
}

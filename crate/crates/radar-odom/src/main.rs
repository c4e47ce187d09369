use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use radar_odom::commands;
use radar_odom::config::RunConfig;
use radar_odom_core::eval::KITTI_LENGTHS;

#[derive(Parser)]
#[command(
    name = "radar-odom",
    version,
    about = "Spinning-radar odometry, simulation and evaluation"
)]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set filter.k=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel stages; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a trajectory from a directory of scan files.
    Odometry {
        #[arg(long)]
        scans: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a scan sequence and its ground truth.
    Simulate {
        /// World file, or `builtin:loop_yard` / `builtin:box_world`.
        #[arg(long)]
        world: String,
        /// Trajectory spec file, or `builtin:loop`.
        #[arg(long)]
        trajectory: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relative drift of an estimate against ground truth, plus an SVG overlay.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sub-path lengths in meters.
        #[arg(long, value_delimiter = ',', default_values_t = KITTI_LENGTHS.to_vec())]
        lengths: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    config.validate()?;

    match cli.command {
        Command::Odometry { scans, out } => {
            let run = commands::cmd_odometry(&scans, &config, &out)?;
            let last = run.statuses.last().map_or(0, |s| s.keyframe_count);
            println!(
                "frames {} keyframes_created {} keyframes_in_window {} mean_frame_ms {:.3}",
                run.statuses.len(),
                run.keyframes_created(),
                last,
                run.mean_frame_ms()
            );
        }
        Command::Simulate { world, trajectory, out } => {
            let world = commands::load_world(&world)?;
            let spec = commands::load_trajectory_spec(&trajectory)?;
            let truth = commands::cmd_simulate(&world, &spec, &config, &out)?;
            println!(
                "scans {} written to {}",
                truth.len(),
                out.join(commands::SCAN_DIR).display()
            );
        }
        Command::Eval {
            gt,
            est,
            out,
            lengths,
            stride,
        } => {
            let result = commands::cmd_eval(&gt, &est, &out, &lengths, stride)?;
            print!("{}", commands::format_report(&result));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

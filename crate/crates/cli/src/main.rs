//! `swarmtrack`: simulate, fuse, track, project and evaluate swarm tracking
//! runs. Stages talk only through files; progress goes to stderr.

mod selftest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use swarmtrack::io::{self, ScenarioLayout};
use swarmtrack::metrics::SDR_RADII;
use swarmtrack::pipeline::{self, RunConfig};
use swarmtrack::synth::ScenarioConfig;
use swarmtrack::{Error, Result};

#[derive(Parser)]
#[command(name = "swarmtrack", version, about = "Swarm tracking from soft masks and drone egomotion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario directory.
    Simulate {
        /// Scenario config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse a sensor log into per-frame camera poses (`poses.csv`).
    Fuse {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        sensors: Option<PathBuf>,
    },
    /// Track a directory of soft masks; writes `trajectory.csv`, `poses.csv`
    /// and `shapes/`.
    Track {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        sensors: Option<PathBuf>,
        /// Never resample (weights degenerate; a warning is printed).
        #[arg(long)]
        no_resample: bool,
        /// Override the tracker seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute ground positions of a trajectory under a set of poses.
    Project {
        #[command(flatten)]
        run: RunArgs,
        /// Input `trajectory.csv`.
        #[arg(long)]
        track: Option<PathBuf>,
        /// `poses.csv` from `fuse`.
        #[arg(long)]
        poses: Option<PathBuf>,
    },
    /// Score a tracking output directory against a scenario directory.
    Eval {
        /// Directory holding `trajectory.csv` and optionally `shapes/`.
        #[arg(long)]
        pred: PathBuf,
        /// Scenario directory holding `gt_track.csv` and optionally `gt_masks/`.
        #[arg(long)]
        gt: PathBuf,
        /// Detection radii (px).
        #[arg(long, value_delimiter = ',', default_values_t = SDR_RADII.to_vec())]
        radii: Vec<f64>,
        /// Multiplies every radius, e.g. for other resolutions.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run quick built-in consistency checks.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run config (JSON); relative paths inside resolve against its directory.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `paths.out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalSettings<'a> {
    pred: &'a Path,
    gt: &'a Path,
    radii: &'a [f64],
    scale: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

fn load_run_config(args: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let mut config = RunConfig::from_json_str(&text)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let paths = &mut config.paths;
    for p in [&mut paths.masks, &mut paths.sensors, &mut paths.poses, &mut paths.track, &mut paths.out] {
        if let Some(p) = p {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    if let Some(out) = &args.out {
        config.paths.out = Some(out.clone());
    }
    let out = config
        .paths
        .out
        .clone()
        .ok_or_else(|| Error::config("paths.out", "no output directory (use --out)"))?;
    Ok((config, out))
}

fn require(path: &Option<PathBuf>, field: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| Error::config(field, "missing (set it in the config or on the command line)"))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out } => {
            let c: ScenarioConfig = io::read_json(&config)?;
            eprintln!("simulating {} frames", c.frames);
            let s = pipeline::simulate_to_dir(&c, &out)?;
            eprintln!("wrote {} frames to {}", s.len(), ScenarioLayout::new(&out).root.display());
        }
        Command::Fuse { run, sensors } => {
            let (mut c, out) = load_run_config(&run)?;
            if sensors.is_some() {
                c.paths.sensors = sensors;
            }
            let sensors = require(&c.paths.sensors, "paths.sensors")?;
            pipeline::write_provenance(&out, &c)?;
            let poses = pipeline::fuse_file(&sensors, &c)?;
            io::write_poses(out.join("poses.csv"), &poses, c.fps)?;
            eprintln!("fused {} poses", poses.len());
        }
        Command::Track {
            run,
            masks,
            sensors,
            no_resample,
            seed,
        } => {
            let (mut c, out) = load_run_config(&run)?;
            if masks.is_some() {
                c.paths.masks = masks;
            }
            if sensors.is_some() {
                c.paths.sensors = sensors;
            }
            if no_resample {
                c.tracker.resample_every = 0;
            }
            if let Some(seed) = seed {
                c.tracker.seed = seed;
            }
            c.validate()?;
            let masks = require(&c.paths.masks, "paths.masks")?;
            let sensors = require(&c.paths.sensors, "paths.sensors")?;
            pipeline::write_provenance(&out, &c)?;
            let summary = pipeline::track_dir(&masks, &sensors, &c, &out)?;
            eprintln!("tracked {} frames, {} lost", summary.rows.len(), summary.lost_frames);
            if let Some(f) = summary.first_degenerate_frame {
                eprintln!(
                    "warning: particle weights degenerate from frame {f} (effective sample size below {} of N)",
                    c.tracker.collapse_ess_fraction
                );
            }
        }
        Command::Project { run, track, poses } => {
            let (mut c, out) = load_run_config(&run)?;
            if track.is_some() {
                c.paths.track = track;
            }
            if poses.is_some() {
                c.paths.poses = poses;
            }
            let track = require(&c.paths.track, "paths.track")?;
            let poses = require(&c.paths.poses, "paths.poses")?;
            pipeline::write_provenance(&out, &c)?;
            let rows = io::read_trajectory(&track)?;
            let poses = io::read_poses(&poses)?;
            let projected = pipeline::project_track(&rows, &poses, &c.intrinsics()?)?;
            io::write_trajectory(out.join("trajectory.csv"), &projected)?;
            eprintln!("projected {} rows", projected.len());
        }
        Command::Eval {
            pred,
            gt,
            radii,
            scale,
            out,
        } => {
            if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return Err(Error::config("radii", "must be positive"));
            }
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::config("scale", "must be > 0"));
            }
            let settings = EvalSettings {
                pred: &pred,
                gt: &gt,
                radii: &radii,
                scale,
            };
            pipeline::write_provenance(&out, &settings)?;
            let report = pipeline::evaluate_dirs(&pred, &gt, &radii, scale)?;
            let text = report.to_text();
            io::write_bytes(&out.join("report.txt"), text.as_bytes())?;
            io::write_json(out.join("report.json"), &report)?;
            print!("{text}");
            if !report.sdr_monotone {
                eprintln!("warning: detection rate is not monotone in radius");
            }
        }
        Command::Selftest { out } => {
            if let Some(out) = &out {
                pipeline::write_provenance(out, &serde_json::json!({ "command": "selftest" }))?;
            }
            let results = selftest::run_all();
            let mut failed = 0;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed += !r.passed as usize;
            }
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", results.len());
                std::process::exit(1);
            }
        }
    }
    Ok(())
}

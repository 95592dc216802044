//! File-level pipeline stages: simulate a scenario directory, fuse a sensor
//! log, track a mask sequence, reproject a track and evaluate a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::filter::{FrameEstimate, Tracker, TrackerConfig};
use crate::fusion::{fuse_log_smoothed, NoiseConfig};
use crate::geometry::{backproject_image_to_ground, CameraPose, ImagePoint, Intrinsics, WorldPoint};
use crate::io::{self, ScenarioLayout, TrajectoryRow};
use crate::mask::{BinaryMask, SoftMask};
use crate::metrics::{aggregate_mask_scores, relative_distance_error, EvalReport, Trajectory2D};
use crate::shape::{alpha_shape, default_alpha, rasterize, DEFAULT_ALPHA_FACTOR};
use crate::synth::{generate, CameraConfig, Scenario, ScenarioConfig};
use crate::{Error, Result};

/// Settings for the `fuse`, `track` and `project` stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub camera: CameraConfig,
    pub fps: f64,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Exponential smoothing factor for the logged angles; 1 keeps them raw.
    #[serde(default = "one")]
    pub angle_smoothing: f64,
    #[serde(default)]
    pub shape: ShapeConfig,
    #[serde(default)]
    pub paths: RunPaths,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeConfig {
    /// Fixed alpha (px); when absent, `alpha_factor` times the median
    /// nearest-neighbor distance of each frame's particles.
    pub alpha_px: Option<f64>,
    pub alpha_factor: f64,
    /// Only particles with weight at least this fraction of `1/N` enter the
    /// shape.
    pub min_weight_fraction: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            alpha_px: None,
            alpha_factor: DEFAULT_ALPHA_FACTOR,
            min_weight_fraction: 1e-3,
        }
    }
}

/// Input and output locations; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunPaths {
    pub masks: Option<PathBuf>,
    pub sensors: Option<PathBuf>,
    pub poses: Option<PathBuf>,
    pub track: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Run settings matching a scenario's camera and frame rate.
    pub fn for_scenario(s: &ScenarioConfig) -> Self {
        RunConfig {
            camera: s.camera.clone(),
            fps: s.fps,
            tracker: TrackerConfig::default(),
            noise: NoiseConfig::default(),
            angle_smoothing: 1.0,
            shape: ShapeConfig::default(),
            paths: RunPaths::default(),
        }
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        let c = &self.camera;
        Intrinsics::new(
            c.f,
            c.cx.unwrap_or(c.width as f64 / 2.0),
            c.cy.unwrap_or(c.height as f64 / 2.0),
            c.width,
            c.height,
        )
        .map_err(|e| match e {
            Error::Config { field, message } => Error::config(format!("camera.{field}"), message),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics()?;
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::config("fps", "must be > 0"));
        }
        self.tracker.validate()?;
        self.noise.validate()?;
        if !(self.angle_smoothing > 0.0 && self.angle_smoothing <= 1.0) {
            return Err(Error::config("angle_smoothing", "must lie in (0, 1]"));
        }
        if let Some(a) = self.shape.alpha_px {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config("shape.alpha_px", "must be > 0"));
            }
        }
        if !(self.shape.alpha_factor > 0.0 && self.shape.alpha_factor.is_finite()) {
            return Err(Error::config("shape.alpha_factor", "must be > 0"));
        }
        if !(self.shape.min_weight_fraction >= 0.0 && self.shape.min_weight_fraction.is_finite()) {
            return Err(Error::config("shape.min_weight_fraction", "must be >= 0"));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }
}

/// Write the provenance files every stage leaves in its output directory.
pub fn write_provenance<T: Serialize>(out: &Path, effective: &T) -> Result<()> {
    io::create_dir(out)?;
    io::write_json(out.join("effective_config.json"), effective)?;
    io::write_bytes(&out.join("version.txt"), format!("swarmtrack {}\n", crate::VERSION).as_bytes())
}

// ---------------------------------------------------------------- simulate

/// Generate a scenario and write its directory layout.
pub fn simulate_to_dir(config: &ScenarioConfig, out: &Path) -> Result<Scenario> {
    let s = generate(config)?;
    let layout = ScenarioLayout::new(out);
    io::create_dir(&layout.masks())?;
    io::create_dir(&layout.gt_masks())?;
    for i in 0..s.len() {
        io::write_mask(io::frame_path(&layout.masks(), i), &s.mask(i)?)?;
        io::write_binary_mask(io::frame_path(&layout.gt_masks(), i), &s.gt_mask(i)?)?;
    }
    io::write_sensor_log(layout.sensors(), &s.sensor_log)?;
    io::write_poses(layout.gt_poses(), &s.gt_poses, config.fps)?;
    let rows: Vec<TrajectoryRow> = s
        .gt_track2d
        .iter()
        .map(|(f, p)| TrajectoryRow {
            frame: f,
            point: p,
            world: Some(s.gt_track_world[f as usize]),
            lost: false,
        })
        .collect();
    io::write_trajectory(layout.gt_track(), &rows)?;
    io::write_json(layout.config(), config)?;
    write_provenance(out, config)?;
    Ok(s)
}

// ---------------------------------------------------------------- fuse

pub fn fuse_file(sensors: &Path, config: &RunConfig) -> Result<Vec<CameraPose>> {
    let log = io::read_sensor_log(sensors)?;
    fuse_log_smoothed(&log, &config.noise, config.fps, config.angle_smoothing)
}

// ---------------------------------------------------------------- track

/// One tracked frame with its outline and ground position.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub estimate: FrameEstimate,
    pub world: Option<WorldPoint>,
    pub shape: BinaryMask,
}

#[derive(Debug, Clone, Default)]
pub struct TrackSummary {
    pub rows: Vec<TrajectoryRow>,
    pub lost_frames: usize,
    pub first_degenerate_frame: Option<usize>,
}

impl TrackSummary {
    pub fn trajectory(&self) -> Trajectory2D {
        self.rows.iter().map(|r| (r.frame, r.point)).collect()
    }
}

/// Posterior particles whose weight is not negligible.
pub fn support_particles(estimate: &FrameEstimate, config: &ShapeConfig) -> Vec<ImagePoint> {
    let min = config.min_weight_fraction / estimate.particles.len() as f64;
    estimate
        .particles
        .iter()
        .zip(&estimate.weights)
        .filter(|(_, &w)| w >= min)
        .map(|(p, _)| *p)
        .collect()
}

/// Outline of a particle cloud; empty when the cloud is degenerate.
pub fn particle_shape(particles: &[ImagePoint], k: &Intrinsics, config: &ShapeConfig) -> BinaryMask {
    let alpha = match config.alpha_px {
        Some(a) => Ok(a),
        None => default_alpha(particles).map(|d| d / DEFAULT_ALPHA_FACTOR * config.alpha_factor),
    };
    alpha
        .and_then(|a| alpha_shape(particles, a))
        .map(|s| rasterize(&s, k.width, k.height))
        .unwrap_or_else(|_| BinaryMask::new(k.width, k.height))
}

/// Track masks against poses, handing each frame to `sink` as it is done.
pub fn track_frames<I>(
    masks: I,
    poses: &[CameraPose],
    k: &Intrinsics,
    tracker: &TrackerConfig,
    shape: Option<&ShapeConfig>,
    mut sink: impl FnMut(&FrameOutput) -> Result<()>,
) -> Result<TrackSummary>
where
    I: IntoIterator<Item = Result<SoftMask>>,
{
    let mut t = Tracker::new(*k, *tracker)?;
    let mut summary = TrackSummary::default();
    for (i, mask) in masks.into_iter().enumerate() {
        let pose = poses.get(i).ok_or(Error::LengthMismatch {
            what: "poses for mask frames",
            left: poses.len(),
            right: i + 1,
        })?;
        let estimate = t.step(&mask?, pose)?;
        let world = backproject_image_to_ground(&k.to_centered(estimate.centroid), pose, k).ok();
        let shape = match shape {
            Some(cfg) => particle_shape(&support_particles(&estimate, cfg), k, cfg),
            None => BinaryMask::new(k.width, k.height),
        };
        summary.lost_frames += estimate.lost as usize;
        if estimate.degenerate && summary.first_degenerate_frame.is_none() {
            summary.first_degenerate_frame = Some(estimate.frame);
        }
        summary.rows.push(TrajectoryRow {
            frame: estimate.frame as u64,
            point: estimate.centroid,
            world,
            lost: estimate.lost,
        });
        sink(&FrameOutput {
            estimate,
            world,
            shape,
        })?;
    }
    Ok(summary)
}

/// Track a mask directory with poses fused from a sensor log; writes
/// `trajectory.csv`, `poses.csv` and `shapes/%06d.pgm` into `out`.
pub fn track_dir(masks_dir: &Path, sensors: &Path, config: &RunConfig, out: &Path) -> Result<TrackSummary> {
    config.validate()?;
    let k = config.intrinsics()?;
    let n = io::count_frames(masks_dir)?;
    if n == 0 {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    let poses = fuse_file(sensors, config)?;
    if poses.len() < n {
        return Err(Error::LengthMismatch {
            what: "fused poses vs mask frames",
            left: poses.len(),
            right: n,
        });
    }
    let poses = &poses[..n];
    let shapes = out.join("shapes");
    io::create_dir(&shapes)?;
    io::write_poses(out.join("poses.csv"), poses, config.fps)?;
    let masks = (0..n).map(|i| io::read_mask(io::frame_path(masks_dir, i)));
    let summary = track_frames(masks, poses, &k, &config.tracker, Some(&config.shape), |f| {
        io::write_binary_mask(io::frame_path(&shapes, f.estimate.frame), &f.shape)
    })?;
    io::write_trajectory(out.join("trajectory.csv"), &summary.rows)?;
    Ok(summary)
}

// ---------------------------------------------------------------- project

/// Recompute ground positions of a track's image points under other poses.
pub fn project_track(rows: &[TrajectoryRow], poses: &[CameraPose], k: &Intrinsics) -> Result<Vec<TrajectoryRow>> {
    rows.iter()
        .map(|r| {
            let pose = poses.get(r.frame as usize).ok_or(Error::LengthMismatch {
                what: "poses for track frames",
                left: poses.len(),
                right: r.frame as usize + 1,
            })?;
            Ok(TrajectoryRow {
                world: backproject_image_to_ground(&k.to_centered(r.point), pose, k).ok(),
                ..*r
            })
        })
        .collect()
}

// ---------------------------------------------------------------- eval

/// Score a tracking run (`trajectory.csv`, optional `shapes/`) against a
/// scenario directory (`gt_track.csv`, optional `gt_masks/`).
pub fn evaluate_dirs(pred: &Path, gt: &Path, radii: &[f64], scale: f64) -> Result<EvalReport> {
    let pred_rows = io::read_trajectory(pred.join("trajectory.csv"))?;
    let layout = ScenarioLayout::new(gt);
    let gt_rows = io::read_trajectory(layout.gt_track())?;
    let pred_t: Trajectory2D = pred_rows.iter().map(|r| (r.frame, r.point)).collect();
    let gt_t: Trajectory2D = gt_rows.iter().map(|r| (r.frame, r.point)).collect();
    let mut report = EvalReport::new(&pred_t, &gt_t, radii, scale)?;

    let common: Vec<u64> = gt_t.iter().map(|(f, _)| f).filter(|f| pred_t.get(*f).is_some()).collect();
    let shapes = pred.join("shapes");
    if shapes.is_dir() && layout.gt_masks().is_dir() {
        let mut pairs = Vec::new();
        for &f in &common {
            let (p, g) = (io::frame_path(&shapes, f as usize), io::frame_path(&layout.gt_masks(), f as usize));
            if p.is_file() && g.is_file() {
                pairs.push((io::read_binary_mask(p)?, io::read_binary_mask(g)?));
            }
        }
        if !pairs.is_empty() {
            report.masks = Some(aggregate_mask_scores(pairs.iter().map(|(p, g)| (p, g)))?);
        }
    }

    let gt_world: std::collections::BTreeMap<u64, WorldPoint> =
        gt_rows.iter().filter_map(|r| r.world.map(|w| (r.frame, w))).collect();
    let (pw, gw): (Vec<_>, Vec<_>) = pred_rows
        .iter()
        .filter_map(|r| Some((r.world?, *gt_world.get(&r.frame)?)))
        .unzip();
    if pw.len() >= 2 {
        report.world_distance = Some(relative_distance_error(&pw, &gw)?);
    }
    Ok(report)
}

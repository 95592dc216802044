//! Synthetic scenarios: a deforming elliptical swarm on the water surface
//! filmed by a simulated drone, with soft masks, a noisy sensor log and exact
//! ground truth.
//!
//! Masks are rendered on demand from the stored per-frame swarm state, so a
//! long scenario never holds all of its frames in memory. Every random draw
//! comes from the scenario seed: sensor noise from one stream in record order,
//! per-frame mask noise from seeds drawn in frame order.

use std::f64::consts::{PI, SQRT_2, TAU};

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::fusion::SensorRecord;
use crate::geometry::{
    backproject_image_to_ground, project_world_to_image, CameraPose, Intrinsics, PixelPoint, WorldPoint,
};
use crate::mask::{BinaryMask, SoftMask};
use crate::metrics::Trajectory2D;
use crate::{Error, Result};

const GRAVITY: f64 = 9.81;
pub const MAX_DRONE_SPEED: f64 = 20.0;
/// Boundary samples used for bounding boxes and the in-frame check.
const BOUNDARY_SAMPLES: usize = 72;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub frames: usize,
    pub fps: f64,
    pub camera: CameraConfig,
    pub drone: DroneConfig,
    pub swarm: SwarmConfig,
    /// Edge blur of the soft masks (px); 0 renders binary masks.
    pub mask_softness: f64,
    pub degradation: Option<Degradation>,
    pub sensors: SensorConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    pub f: f64,
    /// Principal point; the image center when omitted.
    #[serde(default)]
    pub cx: Option<f64>,
    #[serde(default)]
    pub cy: Option<f64>,
}

/// Piecewise-linear path through waypoints. Each leg starts and ends at rest
/// with a trapezoidal speed profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    /// `[x, y, z]` in meters; for the swarm `z` must be 0.
    pub waypoints: Vec<[f64; 3]>,
    /// Cruise speed (m/s).
    pub speed: f64,
    /// Acceleration and deceleration (m/s²).
    pub accel: f64,
    /// Seconds spent at rest before the first leg.
    #[serde(default)]
    pub start_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gimbal {
    /// Camera held at nadir; only yaw follows the drone.
    Nadir,
    /// Camera rigid with the airframe, tilting as the drone accelerates.
    FollowDrone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneConfig {
    pub path: PathConfig,
    pub yaw: YawProfile,
    pub gimbal: Gimbal,
}

/// `yaw(t) = start + rate t + amplitude sin(2 pi t / period)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YawProfile {
    pub start_deg: f64,
    pub rate_deg_s: f64,
    pub amplitude_deg: f64,
    pub period_s: f64,
}

impl Default for YawProfile {
    fn default() -> Self {
        YawProfile {
            start_deg: 0.0,
            rate_deg_s: 0.0,
            amplitude_deg: 0.0,
            period_s: 1.0,
        }
    }
}

impl YawProfile {
    fn at(&self, t: f64) -> f64 {
        self.start_deg + self.rate_deg_s * t + self.amplitude_deg * (TAU * t / self.period_s).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmConfig {
    pub path: PathConfig,
    /// Ellipse semi-axes (m).
    pub semi_axes_m: [f64; 2],
    pub heading_deg: f64,
    #[serde(default)]
    pub turn_rate_deg_s: f64,
    /// Relative sinusoidal modulation of the semi-axes, in `[0, 1)`.
    #[serde(default)]
    pub deform_amplitude: f64,
    #[serde(default = "one")]
    pub deform_period_s: f64,
    #[serde(default)]
    pub split: Option<SplitConfig>,
}

fn one() -> f64 {
    1.0
}

/// The blob divides into two halves that drift apart along its major axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub frame: usize,
    pub speed_mps: f64,
    pub max_separation_m: f64,
}

/// Low-quality masks: edges blurred by `mask_softness`, a background floor
/// and spatially correlated multiplicative log-normal speckle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Degradation {
    /// Value the mask takes far from the swarm before speckle.
    pub background: f64,
    /// Standard deviation of the log of the speckle factor.
    pub speckle_sigma: f64,
    /// Correlation length of the speckle (px).
    pub speckle_cell_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    /// Record rate (Hz); the frame rate when omitted.
    pub rate_hz: Option<f64>,
    pub gps_sigma: f64,
    pub imu_vel_sigma: f64,
    /// Spread of a constant per-log velocity bias (m/s, per axis).
    pub imu_vel_bias_sigma: f64,
    pub attitude_sigma_deg: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            rate_hz: None,
            gps_sigma: 0.5,
            imu_vel_sigma: 0.2,
            imu_vel_bias_sigma: 0.0,
            attitude_sigma_deg: 0.1,
        }
    }
}

impl Default for ScenarioConfig {
    /// One minute at 15 fps of a drifting, deforming swarm filmed at roughly
    /// 60 m by a moving, yawing drone.
    fn default() -> Self {
        ScenarioConfig {
            frames: 900,
            fps: 15.0,
            camera: CameraConfig {
                width: 960,
                height: 540,
                f: 533.0,
                cx: None,
                cy: None,
            },
            drone: DroneConfig {
                path: PathConfig {
                    waypoints: vec![
                        [-6.0, 4.0, 58.0],
                        [18.0, 8.0, 62.0],
                        [30.0, 0.0, 60.0],
                        [36.0, 12.0, 60.0],
                        [44.0, -4.0, 58.0],
                        [52.0, -10.0, 60.0],
                        [44.0, -16.0, 58.0],
                        [42.0, -20.0, 56.0],
                    ],
                    speed: 3.0,
                    accel: 1.5,
                    start_s: 3.0,
                },
                yaw: YawProfile {
                    start_deg: 20.0,
                    rate_deg_s: 1.0,
                    amplitude_deg: 15.0,
                    period_s: 20.0,
                },
                gimbal: Gimbal::Nadir,
            },
            swarm: SwarmConfig {
                path: PathConfig {
                    waypoints: vec![[0.0, 0.0, 0.0], [30.0, 8.0, 0.0], [48.0, -12.0, 0.0], [34.0, -28.0, 0.0]],
                    speed: 1.5,
                    accel: 0.3,
                    start_s: 0.0,
                },
                semi_axes_m: [8.0, 5.0],
                heading_deg: 15.0,
                turn_rate_deg_s: 1.5,
                deform_amplitude: 0.15,
                deform_period_s: 12.0,
                split: None,
            },
            mask_softness: 3.0,
            degradation: None,
            sensors: SensorConfig::default(),
            seed: 7,
        }
    }
}

impl ScenarioConfig {
    /// The default scenario with the swarm dividing in two at frame 600.
    pub fn splitting() -> Self {
        let mut c = ScenarioConfig::default();
        c.swarm.split = Some(SplitConfig {
            frame: 600,
            speed_mps: 0.4,
            max_separation_m: 6.0,
        });
        c
    }

    /// The default scenario seen through poor masks: heavy blur, a
    /// background floor and speckle.
    pub fn degraded() -> Self {
        ScenarioConfig {
            mask_softness: 8.0,
            degradation: Some(Degradation {
                background: 0.2,
                speckle_sigma: 1.0,
                speckle_cell_px: 24.0,
            }),
            ..ScenarioConfig::default()
        }
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        let c = &self.camera;
        let k = Intrinsics::new(
            c.f,
            c.cx.unwrap_or(c.width as f64 / 2.0),
            c.cy.unwrap_or(c.height as f64 / 2.0),
            c.width,
            c.height,
        );
        k.map_err(|e| match e {
            Error::Config { field, message } => Error::config(format!("camera.{field}"), message),
            e => e,
        })
    }

    pub fn sensor_rate(&self) -> f64 {
        self.sensors.rate_hz.unwrap_or(self.fps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 1 {
            return Err(Error::config("frames", "must be >= 1"));
        }
        positive("fps", self.fps)?;
        self.intrinsics()?;
        validate_path("drone.path", &self.drone.path, false)?;
        if self.drone.path.speed > MAX_DRONE_SPEED {
            return Err(Error::config("drone.path.speed", format!("must be <= {MAX_DRONE_SPEED} m/s")));
        }
        let y = &self.drone.yaw;
        for (name, v) in [
            ("drone.yaw.start_deg", y.start_deg),
            ("drone.yaw.rate_deg_s", y.rate_deg_s),
            ("drone.yaw.amplitude_deg", y.amplitude_deg),
        ] {
            finite(name, v)?;
        }
        positive("drone.yaw.period_s", y.period_s)?;

        let s = &self.swarm;
        validate_path("swarm.path", &s.path, true)?;
        positive("swarm.semi_axes_m[0]", s.semi_axes_m[0])?;
        positive("swarm.semi_axes_m[1]", s.semi_axes_m[1])?;
        finite("swarm.heading_deg", s.heading_deg)?;
        finite("swarm.turn_rate_deg_s", s.turn_rate_deg_s)?;
        if !(0.0..1.0).contains(&s.deform_amplitude) {
            return Err(Error::config("swarm.deform_amplitude", "must lie in [0, 1)"));
        }
        positive("swarm.deform_period_s", s.deform_period_s)?;
        if let Some(split) = &s.split {
            if split.frame >= self.frames {
                return Err(Error::config("swarm.split.frame", "must be < frames"));
            }
            non_negative("swarm.split.speed_mps", split.speed_mps)?;
            non_negative("swarm.split.max_separation_m", split.max_separation_m)?;
        }

        non_negative("mask_softness", self.mask_softness)?;
        if let Some(d) = &self.degradation {
            if !(0.0..1.0).contains(&d.background) {
                return Err(Error::config("degradation.background", "must lie in [0, 1)"));
            }
            non_negative("degradation.speckle_sigma", d.speckle_sigma)?;
            positive("degradation.speckle_cell_px", d.speckle_cell_px)?;
        }
        self.sensors.validate()
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.rate_hz {
            positive("sensors.rate_hz", r)?;
        }
        non_negative("sensors.gps_sigma", self.gps_sigma)?;
        non_negative("sensors.imu_vel_sigma", self.imu_vel_sigma)?;
        non_negative("sensors.imu_vel_bias_sigma", self.imu_vel_bias_sigma)?;
        non_negative("sensors.attitude_sigma_deg", self.attitude_sigma_deg)
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, "must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be >= 0, got {v}")))
    }
}

fn validate_path(name: &str, p: &PathConfig, ground: bool) -> Result<()> {
    if p.waypoints.is_empty() {
        return Err(Error::config(format!("{name}.waypoints"), "needs at least one waypoint"));
    }
    for (i, w) in p.waypoints.iter().enumerate() {
        if !w.iter().all(|c| c.is_finite()) {
            return Err(Error::config(format!("{name}.waypoints[{i}]"), "must be finite"));
        }
        if ground && w[2] != 0.0 {
            return Err(Error::config(format!("{name}.waypoints[{i}].z"), "swarm moves on the surface, z must be 0"));
        }
        if !ground && !(w[2] > 0.0) {
            return Err(Error::config(
                format!("{name}.waypoints[{i}].altitude"),
                format!("must be > 0, got {}", w[2]),
            ));
        }
    }
    positive(&format!("{name}.speed"), p.speed)?;
    positive(&format!("{name}.accel"), p.accel)?;
    non_negative(&format!("{name}.start_s"), p.start_s)
}

// ---------------------------------------------------------------- kinematics

#[derive(Debug, Clone, Copy)]
struct Leg {
    from: Vector3<f64>,
    dir: Vector3<f64>,
    t0: f64,
    t_acc: f64,
    t_cruise: f64,
    v_peak: f64,
    accel: f64,
}

impl Leg {
    fn duration(&self) -> f64 {
        2.0 * self.t_acc + self.t_cruise
    }
}

/// Position, velocity and acceleration.
pub type Kinematics = (Vector3<f64>, Vector3<f64>, Vector3<f64>);

/// Time-parameterized waypoint path.
#[derive(Debug, Clone)]
pub struct Path {
    legs: Vec<Leg>,
    start: Vector3<f64>,
    end: Vector3<f64>,
    t_start: f64,
}

impl Path {
    pub fn new(config: &PathConfig) -> Self {
        let w: Vec<Vector3<f64>> = config.waypoints.iter().map(|p| Vector3::from(*p)).collect();
        let (v, a) = (config.speed, config.accel);
        let mut t = config.start_s;
        let mut legs = Vec::new();
        for pair in w.windows(2) {
            let d = pair[1] - pair[0];
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let (t_acc, t_cruise, v_peak) = if len >= v * v / a {
                (v / a, (len - v * v / a) / v, v)
            } else {
                let vp = (a * len).sqrt();
                (vp / a, 0.0, vp)
            };
            let leg = Leg {
                from: pair[0],
                dir: d / len,
                t0: t,
                t_acc,
                t_cruise,
                v_peak,
                accel: a,
            };
            t += leg.duration();
            legs.push(leg);
        }
        Path {
            legs,
            start: w[0],
            end: *w.last().unwrap(),
            t_start: config.start_s,
        }
    }

    /// Time the last leg ends.
    pub fn end_time(&self) -> f64 {
        self.legs.last().map_or(self.t_start, |l| l.t0 + l.duration())
    }

    pub fn at(&self, t: f64) -> Kinematics {
        let zero = Vector3::zeros();
        let Some(leg) = self.legs.iter().rev().find(|l| t >= l.t0) else {
            return (self.start, zero, zero);
        };
        let tau = t - leg.t0;
        let (a, vp, ta, tc) = (leg.accel, leg.v_peak, leg.t_acc, leg.t_cruise);
        let (s, v, acc) = if tau < ta {
            (0.5 * a * tau * tau, a * tau, a)
        } else if tau < ta + tc {
            (0.5 * a * ta * ta + vp * (tau - ta), vp, 0.0)
        } else if tau < 2.0 * ta + tc {
            let r = 2.0 * ta + tc - tau;
            let total = a * ta * ta + vp * tc;
            (total - 0.5 * a * r * r, a * r, -a)
        } else {
            let next = self.legs.iter().find(|l| l.t0 > leg.t0);
            let to = next.map_or(self.end, |n| n.from);
            return (to, zero, zero);
        };
        (leg.from + leg.dir * s, leg.dir * v, leg.dir * acc)
    }
}

/// Camera pose, velocity (m/s) at time `t`.
pub fn drone_state(config: &DroneConfig, path: &Path, t: f64) -> (CameraPose, Vector3<f64>) {
    let (p, v, a) = path.at(t);
    let yaw = config.yaw.at(t);
    let (pitch, roll) = match config.gimbal {
        Gimbal::Nadir => (0.0, 0.0),
        Gimbal::FollowDrone => {
            // yaw is a compass angle: forward is (sin, cos) in east/north
            let (s, c) = yaw.to_radians().sin_cos();
            let forward = a.x * s + a.y * c;
            let right = a.x * c - a.y * s;
            (-(forward / GRAVITY).atan().to_degrees(), (right / GRAVITY).atan().to_degrees())
        }
    };
    (CameraPose::new(p, pitch, yaw, roll), v)
}

// ---------------------------------------------------------------- swarm

/// Ground-plane ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: Vector2<f64>,
    pub a: f64,
    pub b: f64,
    /// Major-axis angle from world x (rad, counter-clockwise).
    pub theta: f64,
}

impl Ellipse {
    pub fn circle(x: f64, y: f64, r: f64) -> Self {
        Ellipse {
            center: Vector2::new(x, y),
            a: r,
            b: r,
            theta: 0.0,
        }
    }

    pub fn area(&self) -> f64 {
        PI * self.a * self.b
    }

    pub fn boundary_point(&self, phi: f64) -> WorldPoint {
        let (s, c) = self.theta.sin_cos();
        let (x, y) = (self.a * phi.cos(), self.b * phi.sin());
        WorldPoint::new(self.center.x + c * x - s * y, self.center.y + s * x + c * y, 0.0)
    }

    /// Conic matrix `E` with `[X Y 1] E [X Y 1]^T < 0` inside.
    fn conic(&self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        let t = Matrix3::new(
            c, s, -(c * self.center.x + s * self.center.y), //
            -s, c, s * self.center.x - c * self.center.y, //
            0.0, 0.0, 1.0,
        );
        let d = Matrix3::from_diagonal(&Vector3::new(1.0 / (self.a * self.a), 1.0 / (self.b * self.b), -1.0));
        t.transpose() * d * t
    }
}

/// The swarm at one instant: one ellipse, or two after a split.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub center: WorldPoint,
    pub ellipses: Vec<Ellipse>,
}

pub fn swarm_state(config: &SwarmConfig, path: &Path, t: f64, fps: f64) -> SwarmState {
    let (p, _, _) = path.at(t);
    let phase = TAU * t / config.deform_period_s;
    let m = config.deform_amplitude;
    let a = config.semi_axes_m[0] * (1.0 + m * phase.sin());
    let b = config.semi_axes_m[1] * (1.0 - m * phase.sin());
    let theta = (config.heading_deg + config.turn_rate_deg_s * t).to_radians();
    let center = Vector2::new(p.x, p.y);
    let whole = Ellipse { center, a, b, theta };
    let ellipses = match &config.split {
        Some(split) if t >= split.frame as f64 / fps => {
            let sep = (split.speed_mps * (t - split.frame as f64 / fps)).min(split.max_separation_m);
            let axis = Vector2::new(theta.cos(), theta.sin());
            // halves keep the total area; they start touching along the minor axis
            let half = |sign: f64| Ellipse {
                center: center + axis * sign * (a / SQRT_2 + sep / 2.0),
                a: a / SQRT_2,
                b: b / SQRT_2,
                theta,
            };
            vec![half(-1.0), half(1.0)]
        }
        _ => vec![whole],
    };
    SwarmState {
        center: WorldPoint::new(p.x, p.y, 0.0),
        ellipses,
    }
}

// ---------------------------------------------------------------- rendering

/// Projected ellipse as an image conic plus its pixel bounding box.
struct ImageConic {
    q: Matrix3<f64>,
    bbox: [f64; 4],
}

fn project_ellipse(e: &Ellipse, pose: &CameraPose, k: &Intrinsics) -> Result<ImageConic> {
    let r_cw = pose.camera_to_world().inverse();
    let r = r_cw.matrix();
    let t = -(r * pose.position);
    let kmat = Matrix3::new(k.f, 0.0, k.cx, 0.0, k.f, k.cy, 0.0, 0.0, 1.0);
    let h = kmat * Matrix3::from_columns(&[r.column(0).into(), r.column(1).into(), t]);
    let h_inv = h
        .try_inverse()
        .ok_or(Error::DegenerateGeometry("ground plane seen edge-on"))?;
    let mut q = h_inv.transpose() * e.conic() * h_inv;
    let scale = q.amax();
    q /= scale;

    let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for i in 0..BOUNDARY_SAMPLES {
        let phi = TAU * i as f64 / BOUNDARY_SAMPLES as f64;
        let p = k.to_corner(project_world_to_image(&e.boundary_point(phi), pose, k)?);
        bbox = [bbox[0].min(p.u), bbox[1].min(p.v), bbox[2].max(p.u), bbox[3].max(p.v)];
    }
    Ok(ImageConic { q, bbox })
}

impl ImageConic {
    /// Approximate signed distance (px) from an image point to the conic,
    /// negative inside.
    fn signed_distance(&self, u: f64, v: f64) -> f64 {
        let q = &self.q;
        let gu = q[(0, 0)] * u + q[(0, 1)] * v + q[(0, 2)];
        let gv = q[(1, 0)] * u + q[(1, 1)] * v + q[(1, 2)];
        let value = u * gu + v * gv + q[(2, 0)] * u + q[(2, 1)] * v + q[(2, 2)];
        let grad = 2.0 * (gu * gu + gv * gv).sqrt();
        if grad == 0.0 {
            return if value <= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        value / grad
    }
}

fn edge_profile(d: f64, softness: f64) -> f32 {
    if softness == 0.0 {
        return if d <= 0.0 { 1.0 } else { 0.0 };
    }
    (0.5 * erfc(d / (softness * SQRT_2))) as f32
}

/// Render the swarm into a soft mask: 1 inside, 0 outside, with an
/// `erfc` edge of standard deviation `softness` (px).
pub fn render_frame(state: &SwarmState, pose: &CameraPose, k: &Intrinsics, softness: f64) -> Result<SoftMask> {
    if !(pose.height() > 0.0) {
        return Err(Error::InvalidHeight(pose.height()));
    }
    let mut mask = SoftMask::zeros(k.width, k.height);
    let margin = 5.0 * softness + 2.0;
    for e in &state.ellipses {
        let c = project_ellipse(e, pose, k)?;
        let i0 = (c.bbox[0] - margin).floor().max(0.0) as u32;
        let j0 = (c.bbox[1] - margin).floor().max(0.0) as u32;
        let i1 = ((c.bbox[2] + margin).ceil().min(k.width as f64)).max(0.0) as u32;
        let j1 = ((c.bbox[3] + margin).ceil().min(k.height as f64)).max(0.0) as u32;
        for j in j0..j1 {
            for i in i0..i1 {
                let d = c.signed_distance(i as f64 + 0.5, j as f64 + 0.5);
                let v = edge_profile(d, softness);
                if v > mask.get(i, j) {
                    mask.set(i, j, v);
                }
            }
        }
    }
    Ok(mask)
}

/// Apply the background floor and speckle to a rendered mask.
pub fn degrade(mask: &SoftMask, d: &Degradation, rng: &mut ChaCha8Rng) -> SoftMask {
    let (w, h) = (mask.width(), mask.height());
    let cell = d.speckle_cell_px;
    let gw = (w as f64 / cell).ceil() as usize + 2;
    let gh = (h as f64 / cell).ceil() as usize + 2;
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.sample(StandardNormal)).collect();
    let bg = d.background as f32;
    let mut out = SoftMask::zeros(w, h);
    for j in 0..h {
        let y = (j as f64 + 0.5) / cell;
        let (gy, ty) = (y.floor() as usize, y.fract());
        for i in 0..w {
            let x = (i as f64 + 0.5) / cell;
            let (gx, tx) = (x.floor() as usize, x.fract());
            let at = |a: usize, b: usize| grid[b * gw + a];
            let top = at(gx, gy) * (1.0 - tx) + at(gx + 1, gy) * tx;
            let bottom = at(gx, gy + 1) * (1.0 - tx) + at(gx + 1, gy + 1) * tx;
            let g = top * (1.0 - ty) + bottom * ty;
            let factor = (d.speckle_sigma * g - 0.5 * d.speckle_sigma * d.speckle_sigma).exp() as f32;
            let base = bg + (1.0 - bg) * mask.get(i, j);
            out.set(i, j, base * factor);
        }
    }
    out
}

// ---------------------------------------------------------------- scenario

/// A generated scenario. Masks are rendered on request.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub intrinsics: Intrinsics,
    pub gt_poses: Vec<CameraPose>,
    pub swarm: Vec<SwarmState>,
    pub gt_track_world: Vec<WorldPoint>,
    pub gt_track2d: Trajectory2D,
    pub sensor_log: Vec<SensorRecord>,
    frame_seeds: Vec<u64>,
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.gt_poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt_poses.is_empty()
    }

    /// Observed soft mask of one frame.
    pub fn mask(&self, frame: usize) -> Result<SoftMask> {
        let m = render_frame(
            &self.swarm[frame],
            &self.gt_poses[frame],
            &self.intrinsics,
            self.config.mask_softness,
        )?;
        Ok(match &self.config.degradation {
            Some(d) => degrade(&m, d, &mut ChaCha8Rng::seed_from_u64(self.frame_seeds[frame])),
            None => m,
        })
    }

    /// Ground-truth mask: pixel centers inside the swarm.
    pub fn gt_mask(&self, frame: usize) -> Result<BinaryMask> {
        let m = render_frame(&self.swarm[frame], &self.gt_poses[frame], &self.intrinsics, 0.0)?;
        Ok(m.threshold(0.5))
    }

    pub fn masks(&self) -> impl Iterator<Item = Result<SoftMask>> + '_ {
        (0..self.len()).map(|i| self.mask(i))
    }
}

fn sensor_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn frame_seed_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

/// Noisy sensor records sampled from the drone's kinematics.
pub fn sensor_log(
    drone: &DroneConfig,
    path: &Path,
    sensors: &SensorConfig,
    rate: f64,
    duration_s: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<SensorRecord> {
    // enough records to cover every frame time
    let n = (duration_s * rate - 1e-9).ceil().max(0.0) as usize + 1;
    let mut noise = |sigma: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        sigma * z
    };
    let b = sensors.imu_vel_bias_sigma;
    let bias = Vector3::new(noise(b), noise(b), noise(b));
    (0..n)
        .map(|k| {
            let t = k as f64 / rate;
            let (pose, vel) = drone_state(drone, path, t);
            let gps = pose.position + Vector3::new(noise(sensors.gps_sigma), noise(sensors.gps_sigma), noise(sensors.gps_sigma));
            let vel = vel + bias + Vector3::new(noise(sensors.imu_vel_sigma), noise(sensors.imu_vel_sigma), noise(sensors.imu_vel_sigma));
            let sa = sensors.attitude_sigma_deg;
            SensorRecord {
                frame_index: k as u64,
                t,
                gps,
                vel,
                pitch_deg: pose.pitch_deg + noise(sa),
                yaw_deg: pose.yaw_deg + noise(sa),
                roll_deg: pose.roll_deg + noise(sa),
            }
        })
        .collect()
}

pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let k = config.intrinsics()?;
    let drone_path = Path::new(&config.drone.path);
    let swarm_path = Path::new(&config.swarm.path);
    let fps = config.fps;

    let mut gt_poses = Vec::with_capacity(config.frames);
    let mut swarm = Vec::with_capacity(config.frames);
    let mut track2d = Trajectory2D::new();
    for frame in 0..config.frames {
        let t = frame as f64 / fps;
        let (pose, _) = drone_state(&config.drone, &drone_path, t);
        let state = swarm_state(&config.swarm, &swarm_path, t, fps);
        let in_frame = state.ellipses.iter().all(|e| {
            (0..BOUNDARY_SAMPLES).all(|i| {
                let phi = TAU * i as f64 / BOUNDARY_SAMPLES as f64;
                project_world_to_image(&e.boundary_point(phi), &pose, &k).is_ok_and(|p| k.contains(k.to_corner(p)))
            })
        });
        if !in_frame {
            return Err(Error::SwarmOutOfFrame { frame });
        }
        let c = k.to_corner(project_world_to_image(&state.center, &pose, &k)?);
        track2d.insert(frame as u64, c);
        gt_poses.push(pose);
        swarm.push(state);
    }

    let duration = (config.frames - 1) as f64 / fps;
    let log = sensor_log(
        &config.drone,
        &drone_path,
        &config.sensors,
        config.sensor_rate(),
        duration,
        &mut sensor_rng(config.seed),
    );
    let mut seeds = frame_seed_rng(config.seed);
    let frame_seeds = (0..config.frames).map(|_| seeds.random()).collect();

    Ok(Scenario {
        config: config.clone(),
        intrinsics: k,
        gt_track_world: swarm.iter().map(|s| s.center).collect(),
        gt_poses,
        swarm,
        gt_track2d: track2d,
        sensor_log: log,
        frame_seeds,
    })
}

// ---------------------------------------------------------------- markers

/// Static ground markers overflown one after another by a surveying drone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerSurveyConfig {
    /// Marker positions `[x, y]` on the ground (m).
    pub markers: Vec<[f64; 2]>,
    pub fps: f64,
    pub camera: CameraConfig,
    pub drone: DroneConfig,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MarkerSurveyConfig {
    /// Eight markers on a 20 m circle, neighbours about 15 m apart, flown
    /// over at 40 m by a drone whose IMU velocity carries a constant bias.
    fn default() -> Self {
        let markers: Vec<[f64; 2]> = (0..8)
            .map(|i| {
                let a = TAU * i as f64 / 8.0;
                [20.0 * a.cos(), 20.0 * a.sin()]
            })
            .collect();
        let mut waypoints: Vec<[f64; 3]> = markers.iter().map(|m| [m[0], m[1], 40.0]).collect();
        waypoints.insert(0, [0.0, 0.0, 40.0]);
        MarkerSurveyConfig {
            markers,
            fps: 15.0,
            camera: ScenarioConfig::default().camera,
            drone: DroneConfig {
                path: PathConfig {
                    waypoints,
                    speed: 3.0,
                    accel: 1.5,
                    start_s: 2.0,
                },
                yaw: YawProfile::default(),
                gimbal: Gimbal::Nadir,
            },
            sensors: SensorConfig {
                imu_vel_bias_sigma: 0.15,
                ..SensorConfig::default()
            },
            seed: 0,
        }
    }
}

impl MarkerSurveyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.markers.len() < 2 {
            return Err(Error::config("markers", "needs at least two markers"));
        }
        for (i, m) in self.markers.iter().enumerate() {
            if !m.iter().all(|c| c.is_finite()) {
                return Err(Error::config(format!("markers[{i}]"), "must be finite"));
            }
        }
        positive("fps", self.fps)?;
        validate_path("drone.path", &self.drone.path, false)?;
        self.sensors.validate()
    }
}

/// Where a marker was seen best: the frame bringing it closest to the
/// principal point, and its exact pixel there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sighting {
    pub frame: usize,
    pub pixel: PixelPoint,
}

#[derive(Debug, Clone)]
pub struct MarkerSurvey {
    pub intrinsics: Intrinsics,
    pub markers: Vec<WorldPoint>,
    pub sightings: Vec<Sighting>,
    pub gt_poses: Vec<CameraPose>,
    pub sensor_log: Vec<SensorRecord>,
}

impl MarkerSurvey {
    /// Ground positions of the markers seen from `poses`, indexed by frame.
    pub fn locate(&self, poses: &[CameraPose]) -> Result<Vec<WorldPoint>> {
        self.sightings
            .iter()
            .map(|s| {
                let pose = poses.get(s.frame).ok_or(Error::LengthMismatch {
                    what: "poses and survey frames",
                    left: poses.len(),
                    right: self.gt_poses.len(),
                })?;
                backproject_image_to_ground(&s.pixel, pose, &self.intrinsics)
            })
            .collect()
    }
}

pub fn generate_marker_survey(config: &MarkerSurveyConfig) -> Result<MarkerSurvey> {
    config.validate()?;
    let k = Intrinsics::new(
        config.camera.f,
        config.camera.cx.unwrap_or(config.camera.width as f64 / 2.0),
        config.camera.cy.unwrap_or(config.camera.height as f64 / 2.0),
        config.camera.width,
        config.camera.height,
    )?;
    let path = Path::new(&config.drone.path);
    let duration = path.end_time() + 1.0;
    let frames = (duration * config.fps).ceil() as usize + 1;
    let gt_poses: Vec<CameraPose> = (0..frames)
        .map(|f| drone_state(&config.drone, &path, f as f64 / config.fps).0)
        .collect();
    let markers: Vec<WorldPoint> = config.markers.iter().map(|m| WorldPoint::new(m[0], m[1], 0.0)).collect();
    let sightings = markers
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let best = gt_poses
                .iter()
                .enumerate()
                .filter_map(|(f, pose)| {
                    let p = project_world_to_image(m, pose, &k).ok()?;
                    k.contains(k.to_corner(p)).then(|| Sighting { frame: f, pixel: p })
                })
                .min_by(|a, b| a.pixel.to_vector().norm().total_cmp(&b.pixel.to_vector().norm()));
            best.ok_or_else(|| Error::config(format!("markers[{i}]"), "never inside the image"))
        })
        .collect::<Result<Vec<_>>>()?;
    let rate = config.sensors.rate_hz.unwrap_or(config.fps);
    let log = sensor_log(
        &config.drone,
        &path,
        &config.sensors,
        rate,
        (frames - 1) as f64 / config.fps,
        &mut sensor_rng(config.seed),
    );
    Ok(MarkerSurvey {
        intrinsics: k,
        markers,
        sightings,
        gt_poses,
        sensor_log: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn static_config() -> ScenarioConfig {
        ScenarioConfig {
            frames: 5,
            fps: 10.0,
            camera: CameraConfig {
                width: 400,
                height: 300,
                f: 1000.0,
                cx: None,
                cy: None,
            },
            drone: DroneConfig {
                path: PathConfig {
                    waypoints: vec![[0.0, 0.0, 100.0]],
                    speed: 1.0,
                    accel: 1.0,
                    start_s: 0.0,
                },
                yaw: YawProfile::default(),
                gimbal: Gimbal::Nadir,
            },
            swarm: SwarmConfig {
                path: PathConfig {
                    waypoints: vec![[0.0, 0.0, 0.0]],
                    speed: 1.0,
                    accel: 1.0,
                    start_s: 0.0,
                },
                semi_axes_m: [5.0, 5.0],
                heading_deg: 0.0,
                turn_rate_deg_s: 0.0,
                deform_amplitude: 0.0,
                deform_period_s: 1.0,
                split: None,
            },
            mask_softness: 1.0,
            degradation: None,
            sensors: SensorConfig {
                rate_hz: None,
                gps_sigma: 0.0,
                imu_vel_sigma: 0.0,
                imu_vel_bias_sigma: 0.0,
                attitude_sigma_deg: 0.0,
            },
            seed: 1,
        }
    }

    #[test]
    fn static_circle_radius() {
        let s = generate(&static_config()).unwrap();
        for i in 0..s.len() {
            let m = s.mask(i).unwrap();
            let r = (m.sum() / PI).sqrt();
            assert!((r - 50.0).abs() <= 1.0, "radius {r}");
            let c = s.gt_track2d.get(i as u64).unwrap();
            assert_abs_diff_eq!(c.u, 200.0, epsilon = 1e-9);
            assert_abs_diff_eq!(c.v, 150.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn softness_zero_is_binary_and_area_matches() {
        let k = Intrinsics::centered(500.0, 320, 240).unwrap();
        let pose = CameraPose::new(Vector3::new(1.0, -2.0, 60.0), 3.0, 40.0, -2.0);
        let state = SwarmState {
            center: WorldPoint::new(0.0, 0.0, 0.0),
            ellipses: vec![Ellipse {
                center: Vector2::new(0.0, 0.0),
                a: 9.0,
                b: 4.0,
                theta: 0.4,
            }],
        };
        let hard = render_frame(&state, &pose, &k, 0.0).unwrap();
        assert!(hard.values().iter().all(|&v| v == 0.0 || v == 1.0));
        // near-nadir: projected area is close to (f/z)^2 times the ground area
        let expected = state.ellipses[0].area() * (500.0f64 / 60.0).powi(2);
        for softness in [0.0, 1.0, 2.0] {
            let m = render_frame(&state, &pose, &k, softness).unwrap();
            let rel = (m.sum() - expected).abs() / expected;
            assert!(rel < 0.02, "softness {softness}: rel {rel}");
        }
    }

    #[test]
    fn zero_noise_log_matches_truth() {
        let mut c = static_config();
        c.drone.path = PathConfig {
            waypoints: vec![[0.0, 0.0, 100.0], [3.0, 1.0, 100.0]],
            speed: 2.0,
            accel: 1.0,
            start_s: 0.0,
        };
        let s = generate(&c).unwrap();
        assert_eq!(s.sensor_log.len(), s.len());
        for (r, p) in s.sensor_log.iter().zip(&s.gt_poses) {
            assert_eq!(r.gps, p.position);
            assert_eq!((r.pitch_deg, r.yaw_deg, r.roll_deg), (p.pitch_deg, p.yaw_deg, p.roll_deg));
        }
    }

    #[test]
    fn trapezoid_path_kinematics() {
        let p = Path::new(&PathConfig {
            waypoints: vec![[0.0, 0.0, 10.0], [10.0, 0.0, 10.0], [10.0, 1.0, 10.0]],
            speed: 2.0,
            accel: 1.0,
            start_s: 1.0,
        });
        assert_eq!(p.at(0.5).0, Vector3::new(0.0, 0.0, 10.0));
        // 2 s ramp, 3 s cruise, 2 s ramp
        let (x, v, a) = p.at(2.0);
        assert_abs_diff_eq!(x.x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.x, 1.0, epsilon = 1e-12);
        let (x, v, _) = p.at(8.0);
        assert_abs_diff_eq!(x.x, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-12);
        // second leg too short to reach cruise speed
        assert_abs_diff_eq!(p.end_time(), 8.0 + 2.0, epsilon = 1e-12);
        assert_eq!(p.at(100.0).0, Vector3::new(10.0, 1.0, 10.0));
        // velocity is the derivative of position
        for t in [1.3, 2.9, 5.5, 7.7, 8.6] {
            let h = 1e-6;
            let num = (p.at(t + h).0 - p.at(t - h).0) / (2.0 * h);
            assert!((num - p.at(t).1).norm() < 1e-6);
        }
    }

    #[test]
    fn out_of_frame_is_reported() {
        let mut c = static_config();
        c.swarm.path = PathConfig {
            waypoints: vec![[0.0, 0.0, 0.0], [30.0, 0.0, 0.0]],
            speed: 10.0,
            accel: 1e6,
            start_s: 0.0,
        };
        c.frames = 20;
        // image half-width is 200 px = 20 m; the 5 m circle leaves after 15 m
        let first_bad = (0..20).find(|&i| i as f64 + 5.0 >= 20.0).unwrap();
        match generate(&c) {
            Err(Error::SwarmOutOfFrame { frame }) => assert!(frame.abs_diff(first_bad) <= 1, "{frame}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_altitude_names_field() {
        let mut c = static_config();
        c.drone.path.waypoints[0][2] = 0.0;
        let e = generate(&c).unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("drone.path.waypoints[0].altitude"), "{e}");
    }

    #[test]
    fn survey_sightings_locate_markers_from_true_poses() {
        let c = MarkerSurveyConfig::default();
        let s = generate_marker_survey(&c).unwrap();
        assert_eq!(s.sightings.len(), 8);
        let found = s.locate(&s.gt_poses).unwrap();
        for (f, m) in found.iter().zip(&s.markers) {
            assert!(f.distance(m) < 1e-6, "{f:?} vs {m:?}");
        }
        // overflown markers sit near the image center
        for sight in &s.sightings {
            assert!(sight.pixel.to_vector().norm() < 5.0);
        }
        // visited in order around the circle
        assert!(s.sightings.windows(2).all(|w| w[0].frame < w[1].frame));
    }

    #[test]
    fn survey_rejects_single_marker() {
        let mut c = MarkerSurveyConfig::default();
        c.markers.truncate(1);
        assert!(generate_marker_survey(&c).unwrap_err().is_config());
    }

    #[test]
    fn default_scenario_is_valid() {
        for c in [ScenarioConfig::default(), ScenarioConfig::splitting()] {
            let s = generate(&c).unwrap();
            assert_eq!(s.len(), 900);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<ScenarioConfig>(&json).unwrap(), c);
        }
    }

    #[test]
    fn degradation_keeps_values_in_range_and_is_deterministic() {
        let mut c = static_config();
        c.degradation = Some(Degradation {
            background: 0.2,
            speckle_sigma: 0.8,
            speckle_cell_px: 6.0,
        });
        let s = generate(&c).unwrap();
        let m = s.mask(2).unwrap();
        assert!(m.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(m, s.mask(2).unwrap());
        assert_ne!(m, s.mask(3).unwrap());
        let bg = m.values()[0..50].iter().map(|&v| v as f64).sum::<f64>() / 50.0;
        assert!(bg > 0.05 && bg < 0.5, "{bg}");
    }
}

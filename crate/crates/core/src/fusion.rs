//! GPS/IMU fusion into per-frame camera poses.
//!
//! A linear Kalman filter over `[position; velocity]` with a constant-velocity
//! process model driven by white acceleration noise. Each sensor record updates
//! the filter with both the GPS position and the IMU velocity. Orientation is
//! not part of the filter state; logged angles pass through, optionally
//! smoothed.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::geometry::CameraPose;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub frame_index: u64,
    /// Seconds.
    pub t: f64,
    /// GPS position in the local frame (m).
    pub gps: Vector3<f64>,
    /// IMU velocity (m/s).
    pub vel: Vector3<f64>,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub roll_deg: f64,
}

impl SensorRecord {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.gps.iter().all(|x| x.is_finite())
            && self.vel.iter().all(|x| x.is_finite())
            && self.pitch_deg.is_finite()
            && self.yaw_deg.is_finite()
            && self.roll_deg.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// White acceleration driving the process model (m/s^2).
    pub process_accel_sigma: f64,
    /// GPS position noise (m).
    pub gps_sigma: f64,
    /// IMU velocity noise (m/s).
    pub imu_vel_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            process_accel_sigma: 1.0,
            gps_sigma: 0.5,
            imu_vel_sigma: 0.2,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("noise.process_accel_sigma", self.process_accel_sigma),
            ("noise.gps_sigma", self.gps_sigma),
            ("noise.imu_vel_sigma", self.imu_vel_sigma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        Ok(())
    }

    fn measurement_covariance(&self) -> Matrix6<f64> {
        let g = self.gps_sigma * self.gps_sigma;
        let v = self.imu_vel_sigma * self.imu_vel_sigma;
        Matrix6::from_diagonal(&Vector6::new(g, g, g, v, v, v))
    }
}

/// Gaussian belief over `[position (m); velocity (m/s)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionState {
    pub mean: Vector6<f64>,
    pub covariance: Matrix6<f64>,
}

impl FusionState {
    /// Belief after a single record, as if updating a flat prior.
    pub fn from_record(record: &SensorRecord, noise: &NoiseConfig) -> Self {
        let mut mean = Vector6::zeros();
        mean.fixed_rows_mut::<3>(0).copy_from(&record.gps);
        mean.fixed_rows_mut::<3>(3).copy_from(&record.vel);
        FusionState {
            mean,
            covariance: noise.measurement_covariance(),
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.mean.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.mean.fixed_rows::<3>(3).into_owned()
    }

    /// Symmetric to 1e-9 and positive-definite.
    pub fn check(&self) -> Result<()> {
        if !self.mean.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("fusion state mean"));
        }
        let asym = (self.covariance - self.covariance.transpose()).norm();
        if !(asym < 1e-9) || self.covariance.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(())
    }
}

fn transition(dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::identity();
    f.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(Matrix3::identity() * dt));
    f
}

/// Continuous white-acceleration process noise integrated over `dt`.
fn process_noise(dt: f64, sigma: f64) -> Matrix6<f64> {
    let q = sigma * sigma;
    let mut m = Matrix6::zeros();
    let i3 = Matrix3::<f64>::identity();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(i3 * (q * dt.powi(3) / 3.0)));
    m.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(i3 * (q * dt * dt / 2.0)));
    m.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(i3 * (q * dt * dt / 2.0)));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(i3 * (q * dt)));
    m
}

fn symmetrize(m: Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}

/// Constant-velocity prediction over `dt` seconds.
pub fn kalman_predict(state: &FusionState, dt: f64, noise: &NoiseConfig) -> Result<FusionState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("dt", "must be > 0"));
    }
    state.check()?;
    let f = transition(dt);
    let next = FusionState {
        mean: f * state.mean,
        covariance: symmetrize(
            f * state.covariance * f.transpose() + process_noise(dt, noise.process_accel_sigma),
        ),
    };
    next.check()?;
    Ok(next)
}

/// Measurement update with the record's GPS position and IMU velocity.
pub fn kalman_update(
    state: &FusionState,
    record: &SensorRecord,
    noise: &NoiseConfig,
) -> Result<FusionState> {
    if !record.is_finite() {
        return Err(Error::NonFinite("sensor record"));
    }
    state.check()?;
    let mut z = Vector6::zeros();
    z.fixed_rows_mut::<3>(0).copy_from(&record.gps);
    z.fixed_rows_mut::<3>(3).copy_from(&record.vel);

    // H is the identity: the record observes the full state.
    let r = noise.measurement_covariance();
    let p = state.covariance;
    let s = symmetrize(p + r);
    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::SingularInnovation)?;
    let gain = p * s_inv;
    let mean = state.mean + gain * (z - state.mean);
    // Joseph form keeps the posterior symmetric positive-definite.
    let i_k = Matrix6::identity() - gain;
    let covariance = symmetrize(i_k * p * i_k.transpose() + gain * r * gain.transpose());
    let next = FusionState { mean, covariance };
    next.check()?;
    Ok(next)
}

fn validate_log(log: &[SensorRecord]) -> Result<()> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    for (i, rec) in log.iter().enumerate() {
        if !rec.is_finite() {
            return Err(Error::NonFinite("sensor record"));
        }
        if i > 0 && !(rec.t > log[i - 1].t && rec.frame_index > log[i - 1].frame_index) {
            return Err(Error::NonMonotoneTime { index: i });
        }
    }
    Ok(())
}

/// Run the filter over the log and return the posterior at each record.
pub fn filter_log(log: &[SensorRecord], noise: &NoiseConfig) -> Result<Vec<FusionState>> {
    validate_log(log)?;
    noise.validate()?;
    let mut out = Vec::with_capacity(log.len());
    let mut state = FusionState::from_record(&log[0], noise);
    out.push(state);
    for pair in log.windows(2) {
        let predicted = kalman_predict(&state, pair[1].t - pair[0].t, noise)?;
        state = kalman_update(&predicted, &pair[1], noise)?;
        out.push(state);
    }
    Ok(out)
}

/// Fused camera pose for every frame covered by the log.
pub fn fuse_log(log: &[SensorRecord], noise: &NoiseConfig, fps: f64) -> Result<Vec<CameraPose>> {
    fuse_log_smoothed(log, noise, fps, 1.0)
}

/// [`fuse_log`] with exponential smoothing of the logged angles.
///
/// `angle_smoothing` is the weight of the newest sample in `(0, 1]`; 1 passes
/// angles through unchanged.
pub fn fuse_log_smoothed(
    log: &[SensorRecord],
    noise: &NoiseConfig,
    fps: f64,
    angle_smoothing: f64,
) -> Result<Vec<CameraPose>> {
    let states = filter_log(log, noise)?;
    let positions: Vec<_> = states.iter().map(FusionState::position).collect();
    poses_at_frames(log, &positions, fps, angle_smoothing)
}

/// Poses from raw GPS fixes alone.
pub fn gps_only_poses(log: &[SensorRecord], fps: f64) -> Result<Vec<CameraPose>> {
    validate_log(log)?;
    let positions: Vec<_> = log.iter().map(|r| r.gps).collect();
    poses_at_frames(log, &positions, fps, 1.0)
}

/// Poses from the first GPS fix plus integrated IMU velocity.
pub fn dead_reckoning_poses(log: &[SensorRecord], fps: f64) -> Result<Vec<CameraPose>> {
    validate_log(log)?;
    let mut positions = Vec::with_capacity(log.len());
    let mut p = log[0].gps;
    positions.push(p);
    for pair in log.windows(2) {
        // trapezoidal integration of velocity between records
        p += (pair[0].vel + pair[1].vel) * (0.5 * (pair[1].t - pair[0].t));
        positions.push(p);
    }
    poses_at_frames(log, &positions, fps, 1.0)
}

/// Number of video frames spanned by a log at `fps`.
pub fn frame_count(log: &[SensorRecord], fps: f64) -> usize {
    match (log.first(), log.last()) {
        (Some(first), Some(last)) => ((last.t - first.t) * fps + 1e-6).floor() as usize + 1,
        _ => 0,
    }
}

fn wrap_deg(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

fn lerp_angle(a: f64, b: f64, s: f64) -> f64 {
    a + wrap_deg(b - a) * s
}

fn poses_at_frames(
    log: &[SensorRecord],
    positions: &[Vector3<f64>],
    fps: f64,
    angle_smoothing: f64,
) -> Result<Vec<CameraPose>> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::config("fps", "must be > 0"));
    }
    if !(angle_smoothing > 0.0 && angle_smoothing <= 1.0) {
        return Err(Error::config("angle_smoothing", "must lie in (0, 1]"));
    }
    let mut angles = Vec::with_capacity(log.len());
    let mut s = [log[0].pitch_deg, log[0].yaw_deg, log[0].roll_deg];
    for rec in log {
        let m = [rec.pitch_deg, rec.yaw_deg, rec.roll_deg];
        for k in 0..3 {
            s[k] = lerp_angle(s[k], m[k], angle_smoothing);
        }
        angles.push(s);
    }

    let t0 = log[0].t;
    let n = frame_count(log, fps);
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for frame in 0..n {
        let t = t0 + frame as f64 / fps;
        while seg + 1 < log.len() - 1 && log[seg + 1].t <= t {
            seg += 1;
        }
        let pose = if log.len() == 1 {
            let a = angles[0];
            CameraPose::new(positions[0], a[0], a[1], a[2])
        } else {
            let (ta, tb) = (log[seg].t, log[seg + 1].t);
            let s = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            let pos = positions[seg] + (positions[seg + 1] - positions[seg]) * s;
            let (a, b) = (angles[seg], angles[seg + 1]);
            CameraPose::new(
                pos,
                lerp_angle(a[0], b[0], s),
                lerp_angle(a[1], b[1], s),
                lerp_angle(a[2], b[2], s),
            )
        };
        out.push(pose);
    }
    Ok(out)
}

//! Pinhole camera model over a flat ground plane.
//!
//! World frame is local East-North-Up in meters with the ground (water surface)
//! at `Z = 0`. The camera frame is right-handed with x to the right, y down and
//! z along the optical axis. Pixel coordinates handled here are measured from
//! the principal point; [`Intrinsics::to_centered`] and
//! [`Intrinsics::to_corner`] convert from and to image-corner coordinates.
//!
//! Attitude angles follow a NED body convention: yaw about down (compass
//! heading, clockwise seen from above), pitch about east, roll about north,
//! composed extrinsically yaw first, then pitch, then roll. At zero angles the
//! camera looks straight down (nadir) with image-up pointing north.

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest grazing angle between a viewing ray and the ground plane that
/// backprojection accepts.
pub const MIN_GRAZING_ANGLE_DEG: f64 = 1.0;

const MIN_DEPTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    /// Focal length in pixels.
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(f: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Intrinsics {
            f,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Principal point at the image center.
    pub fn centered(f: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f.is_finite() && self.f > 0.0) {
            return Err(Error::config("intrinsics.f", "focal length must be > 0"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("intrinsics", "image dimensions must be > 0"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::config("intrinsics.cx", "must lie in [0, width)"));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::config("intrinsics.cy", "must lie in [0, height)"));
        }
        Ok(())
    }

    /// Image-corner coordinates to principal-point-relative coordinates.
    pub fn to_centered(&self, p: ImagePoint) -> PixelPoint {
        PixelPoint::new(p.u - self.cx, p.v - self.cy)
    }

    /// Principal-point-relative coordinates to image-corner coordinates.
    pub fn to_corner(&self, p: PixelPoint) -> ImagePoint {
        ImagePoint::new(p.x + self.cx, p.y + self.cy)
    }

    /// Whether an image-corner point lies inside `[0, width) x [0, height)`.
    pub fn contains(&self, p: ImagePoint) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u < self.width as f64 && p.v < self.height as f64
    }

    pub fn center(&self) -> ImagePoint {
        ImagePoint::new(self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

/// Pixel position in image-corner coordinates: `u` right, `v` down, with the
/// top-left corner of the image at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl ImagePoint {
    pub const fn new(u: f64, v: f64) -> Self {
        ImagePoint { u, v }
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Local world position in meters; `z` is the height above the ground plane.
    pub position: Vector3<f64>,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub roll_deg: f64,
}

impl CameraPose {
    pub fn new(position: Vector3<f64>, pitch_deg: f64, yaw_deg: f64, roll_deg: f64) -> Self {
        CameraPose {
            position,
            pitch_deg,
            yaw_deg,
            roll_deg,
        }
    }

    /// Camera looking straight down from `(x, y, height)`.
    pub fn nadir(x: f64, y: f64, height: f64) -> Self {
        Self::new(Vector3::new(x, y, height), 0.0, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite())
            && self.pitch_deg.is_finite()
            && self.yaw_deg.is_finite()
            && self.roll_deg.is_finite()
    }

    pub fn height(&self) -> f64 {
        self.position.z
    }

    /// Rotation taking camera-frame vectors to world-frame vectors.
    pub fn camera_to_world(&self) -> Rotation3<f64> {
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw_deg.to_radians());
        let pitch = Rotation3::from_axis_angle(&Vector3::y_axis(), self.pitch_deg.to_radians());
        let roll = Rotation3::from_axis_angle(&Vector3::x_axis(), self.roll_deg.to_radians());
        let attitude = roll * pitch * yaw;
        enu_from_ned() * attitude * ned_from_camera()
    }

    /// Express a world point in this camera's frame.
    pub fn world_to_camera(&self, p: &WorldPoint) -> Vector3<f64> {
        self.camera_to_world().inverse() * (p.to_vector() - self.position)
    }
}

fn ned_from_camera() -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, -1.0, 0.0, //
        1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0,
    ))
}

fn enu_from_ned() -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, 1.0, 0.0, //
        1.0, 0.0, 0.0, //
        0.0, 0.0, -1.0,
    ))
}

/// Camera egomotion over one time step, expressed in the camera frame at the
/// start of the step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CameraMotion {
    /// Translation along camera x, y, z (m per frame).
    pub u: f64,
    pub v: f64,
    pub w: f64,
    /// Rotation about camera x, y, z (rad per frame).
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CameraMotion {
    pub fn translation(u: f64, v: f64, w: f64) -> Self {
        CameraMotion {
            u,
            v,
            w,
            ..Default::default()
        }
    }

    pub fn rotation(a: f64, b: f64, c: f64) -> Self {
        CameraMotion {
            a,
            b,
            c,
            ..Default::default()
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        CameraMotion {
            u: self.u * s,
            v: self.v * s,
            w: self.w * s,
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.u, self.v, self.w, self.a, self.b, self.c]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Pixel position relative to the principal point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PixelPoint { x, y }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        WorldPoint { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        WorldPoint::new(v.x, v.y, v.z)
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

/// Project a world point into the image, `p = K [R | t] P`.
pub fn project_world_to_image(
    point: &WorldPoint,
    pose: &CameraPose,
    k: &Intrinsics,
) -> Result<PixelPoint> {
    let pc = pose.world_to_camera(point);
    if !pc.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite("projected point"));
    }
    if pc.z.abs() < MIN_DEPTH {
        return Err(Error::ZeroDepth);
    }
    if pc.z < 0.0 {
        return Err(Error::BehindCamera { depth: pc.z });
    }
    Ok(PixelPoint::new(k.f * pc.x / pc.z, k.f * pc.y / pc.z))
}

/// Intersect the viewing ray through `p` with the ground plane `Z = 0`.
pub fn backproject_image_to_ground(
    p: &PixelPoint,
    pose: &CameraPose,
    k: &Intrinsics,
) -> Result<WorldPoint> {
    if !pose.is_finite() || !p.x.is_finite() || !p.y.is_finite() {
        return Err(Error::NonFinite("backprojection input"));
    }
    let ray = pose.camera_to_world() * Vector3::new(p.x / k.f, p.y / k.f, 1.0);
    let origin = pose.position;
    // The ray must head toward the plane from the side the camera is on.
    let toward = -origin.z.signum() * ray.z;
    let grazing = (toward / ray.norm()).asin();
    if origin.z == 0.0 || grazing < MIN_GRAZING_ANGLE_DEG.to_radians() {
        return Err(Error::DegenerateRay {
            grazing_deg: grazing.to_degrees(),
        });
    }
    let s = -origin.z / ray.z;
    Ok(WorldPoint::new(origin.x + s * ray.x, origin.y + s * ray.y, 0.0))
}

/// Image motion induced at `p` by camera egomotion over a plane at depth `z`.
///
/// Translation contributes `(1/z) [-f U + x W, -f V + y W]`, rotation contributes
/// `[(A/f) x y - B f - (B/f) x^2 + C y, A f + (A/f) y^2 - (B/f) x y - C x]`.
/// When `motion` comes from [`motion_between_poses`], pass the height of the
/// later pose.
pub fn induced_flow(
    p: &PixelPoint,
    motion: &CameraMotion,
    k: &Intrinsics,
    z: f64,
) -> Result<Vector2<f64>> {
    if !(z > 0.0) {
        return Err(Error::InvalidHeight(z));
    }
    let f = k.f;
    let (x, y) = (p.x, p.y);
    let CameraMotion { u, v, w, a, b, c } = *motion;
    let trans = Vector2::new(-f * u + x * w, -f * v + y * w) / z;
    let rot = Vector2::new(
        a / f * x * y - b * f - b / f * x * x + c * y,
        a * f + a / f * y * y - b / f * x * y - c * x,
    );
    Ok(trans + rot)
}

/// Egomotion between two poses `dt` frames apart, in the earlier camera frame.
///
/// Angular rates come from the relative rotation's axis-angle vector, which
/// keeps angle differences wrapped to `(-pi, pi]`.
pub fn motion_between_poses(prev: &CameraPose, cur: &CameraPose, dt: f64) -> Result<CameraMotion> {
    if !prev.is_finite() || !cur.is_finite() {
        return Err(Error::NonFinite("camera pose"));
    }
    if !(dt > 0.0) {
        return Err(Error::config("dt", "must be > 0"));
    }
    let r_prev = prev.camera_to_world();
    let t = r_prev.inverse() * (cur.position - prev.position) / dt;
    let rel = r_prev.inverse() * cur.camera_to_world();
    let omega = rel.scaled_axis() / dt;
    Ok(CameraMotion {
        u: t.x,
        v: t.y,
        w: t.z,
        a: omega.x,
        b: omega.y,
        c: omega.z,
    })
}

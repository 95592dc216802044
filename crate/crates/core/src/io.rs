//! On-disk formats: PGM masks, sensor / pose / trajectory CSV files, JSON
//! configs and the scenario directory layout.
//!
//! CSV files are UTF-8 with LF line endings and an exact header row. Floats
//! are written in shortest round-trip form so `read(write(x)) == x`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::fusion::SensorRecord;
use crate::geometry::{CameraPose, ImagePoint, WorldPoint};
use crate::mask::{BinaryMask, SoftMask};
use crate::{Error, Result};

pub const SENSOR_HEADER: [&str; 11] = [
    "frame", "t_s", "gps_x_m", "gps_y_m", "gps_z_m", "vx_mps", "vy_mps", "vz_mps", "pitch_deg",
    "yaw_deg", "roll_deg",
];
pub const POSE_HEADER: [&str; 8] = [
    "frame", "t_s", "x_m", "y_m", "z_m", "pitch_deg", "yaw_deg", "roll_deg",
];
pub const TRAJECTORY_HEADER: [&str; 6] = ["frame", "u_px", "v_px", "world_x_m", "world_y_m", "lost_flag"];

/// Meters per radian on the reference sphere.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

// ---------------------------------------------------------------- PGM

/// Soft value to byte, rounding half up.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) as f64 * 255.0 + 0.5).floor() as u8
}

pub fn encode_pgm(width: u32, height: u32, bytes: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    out
}

pub fn encode_mask(mask: &SoftMask) -> Vec<u8> {
    let bytes: Vec<u8> = mask.values().iter().map(|&v| quantize(v)).collect();
    encode_pgm(mask.width(), mask.height(), &bytes)
}

pub fn encode_binary_mask(mask: &BinaryMask) -> Vec<u8> {
    let bytes: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_pgm(mask.width(), mask.height(), &bytes)
}

/// Parse a binary (`P5`) PGM into width, height and bytes scaled to 0..=255.
pub fn decode_pgm(data: &[u8], path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let err = |offset: usize, message: &str| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.to_string(),
    };
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(err(0, "bad magic, expected P5"));
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match data.get(pos) {
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while data.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while data.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(err(pos, "expected an unsigned integer in header"));
        }
        *field = std::str::from_utf8(&data[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| err(start, "header integer out of range"))?;
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 || w > u32::MAX as u64 || h > u32::MAX as u64 {
        return Err(err(pos, "image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(err(pos, "maxval must lie in 1..=255"));
    }
    if !data.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(err(pos, "expected whitespace after maxval"));
    }
    pos += 1;
    let n = (w * h) as usize;
    if data.len() - pos < n {
        return Err(err(data.len(), &format!("truncated payload: {} of {n} bytes", data.len() - pos)));
    }
    let mut bytes = data[pos..pos + n].to_vec();
    if maxval != 255 {
        for b in &mut bytes {
            if *b as u64 > maxval {
                return Err(err(pos, "sample exceeds maxval"));
            }
            *b = ((*b as u64 * 255 + maxval / 2) / maxval) as u8;
        }
    }
    Ok((w as u32, h as u32, bytes))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SoftMask> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, bytes) = decode_pgm(&data, path)?;
    SoftMask::from_values(w, h, bytes.iter().map(|&b| b as f32 / 255.0).collect())
}

pub fn write_mask(path: impl AsRef<Path>, mask: &SoftMask) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask(mask))
}

/// Read a PGM as a binary mask (`byte >= 128` is set).
pub fn read_binary_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, bytes) = decode_pgm(&data, path)?;
    BinaryMask::from_bits(w, h, bytes.iter().map(|&b| b >= 128).collect())
}

pub fn write_binary_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_bytes(path.as_ref(), &encode_binary_mask(mask))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `dir/000042.pgm`
pub fn frame_path(dir: &Path, frame: usize) -> PathBuf {
    dir.join(format!("{frame:06}.pgm"))
}

/// Number of consecutive `%06d.pgm` files starting at frame 0.
pub fn count_frames(dir: &Path) -> Result<usize> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut n = 0;
    while frame_path(dir, n).is_file() {
        n += 1;
    }
    Ok(n)
}

// ---------------------------------------------------------------- CSV

struct CsvRows {
    path: PathBuf,
    records: Vec<(u64, csv::StringRecord)>,
}

fn read_csv(path: &Path, header: &[&str]) -> Result<CsvRows> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(data.as_slice());
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec));
    }
    let Some((_, first)) = records.first() else {
        return Err(parse_err(1, "missing header".into()));
    };
    if first.iter().collect::<Vec<_>>() != header {
        return Err(parse_err(1, format!("header must be `{}`", header.join(","))));
    }
    records.remove(0);
    for (line, r) in &records {
        if r.len() != header.len() {
            return Err(parse_err(*line, format!("expected {} fields, got {}", header.len(), r.len())));
        }
    }
    Ok(CsvRows {
        path: path.to_path_buf(),
        records,
    })
}

impl CsvRows {
    fn err(&self, line: u64, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message,
        }
    }

    fn f64(&self, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64> {
        let s = &rec[i];
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(line, format!("column `{name}`: not a number: {s:?}")))?;
        if !v.is_finite() {
            return Err(self.err(line, format!("column `{name}`: non-finite value")));
        }
        Ok(v)
    }

    fn opt_f64(&self, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<Option<f64>> {
        if rec[i].is_empty() {
            Ok(None)
        } else {
            self.f64(line, rec, i, name).map(Some)
        }
    }

    fn u64(&self, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<u64> {
        let s = &rec[i];
        s.parse()
            .map_err(|_| self.err(line, format!("column `{name}`: not an unsigned integer: {s:?}")))
    }
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let map = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(map)?;
    for r in rows {
        w.write_record(&r).map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write_bytes(path, &bytes)
}

pub fn read_sensor_log(path: impl AsRef<Path>) -> Result<Vec<SensorRecord>> {
    let rows = read_csv(path.as_ref(), &SENSOR_HEADER)?;
    let mut log: Vec<SensorRecord> = Vec::with_capacity(rows.records.len());
    for (line, r) in &rows.records {
        let f = |i: usize| rows.f64(*line, r, i, SENSOR_HEADER[i]);
        let rec = SensorRecord {
            frame_index: rows.u64(*line, r, 0, "frame")?,
            t: f(1)?,
            gps: Vector3::new(f(2)?, f(3)?, f(4)?),
            vel: Vector3::new(f(5)?, f(6)?, f(7)?),
            pitch_deg: f(8)?,
            yaw_deg: f(9)?,
            roll_deg: f(10)?,
        };
        if let Some(prev) = log.last() {
            if !(rec.t > prev.t) {
                return Err(rows.err(*line, format!("time {} not after previous {}", rec.t, prev.t)));
            }
            if rec.frame_index <= prev.frame_index {
                return Err(rows.err(*line, "frame index not increasing".into()));
            }
        }
        log.push(rec);
    }
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(log)
}

pub fn write_sensor_log(path: impl AsRef<Path>, log: &[SensorRecord]) -> Result<()> {
    write_csv(
        path.as_ref(),
        SENSOR_HEADER,
        log.iter().map(|r| {
            [
                r.frame_index.to_string(),
                r.t.to_string(),
                r.gps.x.to_string(),
                r.gps.y.to_string(),
                r.gps.z.to_string(),
                r.vel.x.to_string(),
                r.vel.y.to_string(),
                r.vel.z.to_string(),
                r.pitch_deg.to_string(),
                r.yaw_deg.to_string(),
                r.roll_deg.to_string(),
            ]
        }),
    )
}

/// Poses at frame times `frame / fps`.
pub fn write_poses(path: impl AsRef<Path>, poses: &[CameraPose], fps: f64) -> Result<()> {
    write_csv(
        path.as_ref(),
        POSE_HEADER,
        poses.iter().enumerate().map(|(i, p)| {
            [
                i.to_string(),
                (i as f64 / fps).to_string(),
                p.position.x.to_string(),
                p.position.y.to_string(),
                p.position.z.to_string(),
                p.pitch_deg.to_string(),
                p.yaw_deg.to_string(),
                p.roll_deg.to_string(),
            ]
        }),
    )
}

/// Poses must be listed for frames `0, 1, 2, ...` in order.
pub fn read_poses(path: impl AsRef<Path>) -> Result<Vec<CameraPose>> {
    let rows = read_csv(path.as_ref(), &POSE_HEADER)?;
    let mut poses = Vec::with_capacity(rows.records.len());
    for (k, (line, r)) in rows.records.iter().enumerate() {
        let frame = rows.u64(*line, r, 0, "frame")?;
        if frame != k as u64 {
            return Err(rows.err(*line, format!("expected frame {k}, got {frame}")));
        }
        let f = |i: usize| rows.f64(*line, r, i, POSE_HEADER[i]);
        poses.push(CameraPose::new(Vector3::new(f(2)?, f(3)?, f(4)?), f(5)?, f(6)?, f(7)?));
    }
    Ok(poses)
}

/// One row of a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub frame: u64,
    pub point: ImagePoint,
    /// Ground-plane position; `None` when the pixel could not be backprojected.
    pub world: Option<WorldPoint>,
    pub lost: bool,
}

pub fn write_trajectory(path: impl AsRef<Path>, rows: &[TrajectoryRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    write_csv(
        path.as_ref(),
        TRAJECTORY_HEADER,
        rows.iter().map(|r| {
            [
                r.frame.to_string(),
                r.point.u.to_string(),
                r.point.v.to_string(),
                opt(r.world.map(|w| w.x)),
                opt(r.world.map(|w| w.y)),
                (r.lost as u8).to_string(),
            ]
        }),
    )
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRow>> {
    let rows = read_csv(path.as_ref(), &TRAJECTORY_HEADER)?;
    let mut out: Vec<TrajectoryRow> = Vec::with_capacity(rows.records.len());
    for (line, r) in &rows.records {
        let frame = rows.u64(*line, r, 0, "frame")?;
        if out.last().is_some_and(|p| p.frame >= frame) {
            return Err(rows.err(*line, "frames not strictly increasing".into()));
        }
        let wx = rows.opt_f64(*line, r, 3, "world_x_m")?;
        let wy = rows.opt_f64(*line, r, 4, "world_y_m")?;
        let world = match (wx, wy) {
            (Some(x), Some(y)) => Some(WorldPoint::new(x, y, 0.0)),
            (None, None) => None,
            _ => return Err(rows.err(*line, "world_x_m and world_y_m must both be set or both empty".into())),
        };
        let lost = match &r[5] {
            "0" => false,
            "1" => true,
            s => return Err(rows.err(*line, format!("lost_flag must be 0 or 1, got {s:?}"))),
        };
        out.push(TrajectoryRow {
            frame,
            point: ImagePoint::new(rows.f64(*line, r, 1, "u_px")?, rows.f64(*line, r, 2, "v_px")?),
            world,
            lost,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- JSON

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&data)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path.as_ref(), s.as_bytes())
}

// ---------------------------------------------------------------- geodesy

/// Equirectangular East-North-Up coordinates about an origin; `z = alt`.
pub fn geodetic_to_local(lat: f64, lon: f64, alt: f64, origin_lat: f64, origin_lon: f64) -> Result<WorldPoint> {
    for (name, v, lim) in [
        ("lat", lat, 90.0),
        ("lon", lon, 180.0),
        ("origin_lat", origin_lat, 90.0),
        ("origin_lon", origin_lon, 180.0),
    ] {
        if !(v.abs() <= lim) {
            return Err(Error::config(name, format!("{v} outside [-{lim}, {lim}]")));
        }
    }
    if !alt.is_finite() {
        return Err(Error::NonFinite("altitude"));
    }
    let mut dlon = lon - origin_lon;
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon < -180.0 {
        dlon += 360.0;
    }
    let east = dlon.to_radians() * EARTH_RADIUS_M * origin_lat.to_radians().cos();
    let north = (lat - origin_lat).to_radians() * EARTH_RADIUS_M;
    Ok(WorldPoint::new(east, north, alt))
}

// ---------------------------------------------------------------- layout

/// Files of a scenario directory.
#[derive(Debug, Clone)]
pub struct ScenarioLayout {
    pub root: PathBuf,
}

impl ScenarioLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ScenarioLayout { root: root.into() }
    }

    pub fn masks(&self) -> PathBuf {
        self.root.join("masks")
    }

    pub fn gt_masks(&self) -> PathBuf {
        self.root.join("gt_masks")
    }

    pub fn sensors(&self) -> PathBuf {
        self.root.join("sensors.csv")
    }

    pub fn gt_poses(&self) -> PathBuf {
        self.root.join("gt_poses.csv")
    }

    pub fn gt_track(&self) -> PathBuf {
        self.root.join("gt_track.csv")
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("scenario.json")
    }
}

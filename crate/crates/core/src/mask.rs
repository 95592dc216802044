//! Per-frame raster masks.
//!
//! Both mask types are row-major with pixel `(i, j)` covering
//! `[i, i + 1) x [j, j + 1)` in image-corner coordinates, so its value sits at
//! the pixel center `(i + 0.5, j + 0.5)`.

use crate::{Error, Result};

/// Per-pixel swarm probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl SoftMask {
    pub fn zeros(width: u32, height: u32) -> Self {
        SoftMask {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Result<Self> {
        let mut m = Self::zeros(width, height);
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::DimensionMismatch(format!(
                "mask value {value} outside [0, 1]"
            )));
        }
        m.values.fill(value);
        Ok(m)
    }

    pub fn from_values(width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} mask",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::DimensionMismatch(format!(
                "mask value {bad} outside [0, 1]"
            )));
        }
        Ok(SoftMask {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, i: u32, j: u32) -> f32 {
        self.values[j as usize * self.width as usize + i as usize]
    }

    /// Set one pixel; the value is clamped into `[0, 1]`.
    pub fn set(&mut self, i: u32, j: u32, value: f32) {
        let idx = j as usize * self.width as usize + i as usize;
        self.values[idx] = value.clamp(0.0, 1.0);
    }

    /// Multiply every value by `c` in `[0, 1]`.
    pub fn scaled(&self, c: f32) -> SoftMask {
        SoftMask {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Bilinear sample at an image-corner coordinate.
    ///
    /// Returns `None` outside `[0, width) x [0, height)`. Between the outermost
    /// pixel center and the image border the edge value is held.
    pub fn sample(&self, u: f64, v: f64) -> Option<f64> {
        if !(u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64) {
            return None;
        }
        let max_i = (self.width - 1) as f64;
        let max_j = (self.height - 1) as f64;
        let x = (u - 0.5).clamp(0.0, max_i);
        let y = (v - 0.5).clamp(0.0, max_j);
        let i0 = x.floor();
        let j0 = y.floor();
        let tx = x - i0;
        let ty = y - j0;
        let i0 = i0 as u32;
        let j0 = j0 as u32;
        let i1 = (i0 + 1).min(self.width - 1);
        let j1 = (j0 + 1).min(self.height - 1);
        let v00 = self.get(i0, j0) as f64;
        let v10 = self.get(i1, j0) as f64;
        let v01 = self.get(i0, j1) as f64;
        let v11 = self.get(i1, j1) as f64;
        let top = v00 + (v10 - v00) * tx;
        let bottom = v01 + (v11 - v01) * tx;
        Some(top + (bottom - top) * ty)
    }

    /// Threshold into a binary mask (`value >= threshold`).
    pub fn threshold(&self, threshold: f32) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.values.iter().map(|&v| v >= threshold).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: u32, j: u32) -> bool {
        self.bits[j as usize * self.width as usize + i as usize]
    }

    pub fn set(&mut self, i: u32, j: u32, value: bool) {
        let idx = j as usize * self.width as usize + i as usize;
        self.bits[idx] = value;
    }

    /// Set pixels `[i0, i1)` of row `j`.
    pub fn fill_span(&mut self, j: u32, i0: u32, i1: u32) {
        let row = j as usize * self.width as usize;
        self.bits[row + i0 as usize..row + i1 as usize].fill(true);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Mean position of set pixels (pixel centers, image-corner coordinates).
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
        for j in 0..self.height {
            for i in 0..self.width {
                if self.get(i, j) {
                    su += i as f64 + 0.5;
                    sv += j as f64 + 0.5;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (su / n as f64, sv / n as f64))
    }
}

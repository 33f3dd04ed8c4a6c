//! Image, depth, offset-field, and tensor file formats.
//!
//! Formats are byte-exact by design: binary PGM (P5, 16-bit) and PPM (P6,
//! 8-bit) for images, grayscale PFM for float depth, and the little-endian
//! "ZOFF"/"ZTEN" containers for offset fields and tensors.

mod containers;
mod pfm;
mod pnm;

pub use containers::{load_offsets, load_tensor, read_zten, save_offsets, save_tensor, write_zten};
pub use pfm::{load_pfm_gray, save_pfm_gray};
pub use pnm::{load_pgm16, load_ppm, save_pgm16, save_ppm};

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-pixel metric depth in meters. Entries that are zero, negative, or
/// non-finite are invalid (missing sensor readings).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape(format!(
                "depth map {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Builds a map from a per-pixel function of (row, col).
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            values,
        }
    }

    pub fn constant(height: usize, width: usize, depth: f64) -> Self {
        Self {
            height,
            width,
            values: vec![depth; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Depth at (row, col) with coordinates clamped to the image border.
    #[inline]
    pub fn at_clamped(&self, row: i64, col: i64) -> f64 {
        let r = row.clamp(0, self.height as i64 - 1) as usize;
        let c = col.clamp(0, self.width as i64 - 1) as usize;
        self.at(r, c)
    }

    pub fn is_valid(value: f64) -> bool {
        value.is_finite() && value > 0.0
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| Self::is_valid(v)).count()
    }

    /// Mean over valid entries; `None` when no entry is valid.
    pub fn mean_valid(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &v in &self.values {
            if Self::is_valid(v) {
                sum += v;
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    /// Nearest-neighbor downsample by an integer factor, for layers running
    /// at a reduced spatial resolution.
    pub fn downsample_nearest(&self, factor: usize) -> DepthMap {
        assert!(factor >= 1);
        let h = self.height.div_ceil(factor);
        let w = self.width.div_ceil(factor);
        DepthMap::from_fn(h, w, |r, c| self.at(r * factor, c * factor))
    }
}

/// Reads a depth map from 16-bit binary PGM or grayscale PFM, detected by
/// magic. PGM integers are multiplied by `unit_scale` (0.001 converts
/// millimeter exports to meters); PFM values are taken as meters.
pub fn load_depth(path: &Path, unit_scale: f64) -> Result<DepthMap> {
    let magic = {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 2 {
            return Err(Error::format(path, 0, "file too short for a magic number"));
        }
        [bytes[0], bytes[1]]
    };
    match &magic {
        b"P5" => {
            let (h, w, raw) = load_pgm16(path)?;
            let values = raw.iter().map(|&v| v as f64 * unit_scale).collect();
            DepthMap::new(h, w, values)
        }
        b"Pf" => {
            let (h, w, raw) = load_pfm_gray(path)?;
            let values = raw.iter().map(|&v| v as f64).collect();
            DepthMap::new(h, w, values)
        }
        b"PF" => Err(Error::format(
            path,
            0,
            "color PFM is not a depth map; expected grayscale \"Pf\"",
        )),
        other => Err(Error::format(
            path,
            0,
            format!("unknown magic {:?}", String::from_utf8_lossy(other)),
        )),
    }
}

/// Writes a depth map as 16-bit binary PGM, dividing by `unit_scale` and
/// rounding; invalid entries are stored as zero.
pub fn save_depth_pgm(path: &Path, depth: &DepthMap, unit_scale: f64) -> Result<()> {
    let raw: Vec<u16> = depth
        .values()
        .iter()
        .map(|&v| {
            if DepthMap::is_valid(v) {
                (v / unit_scale).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    save_pgm16(path, depth.height(), depth.width(), &raw)
}

/// Writes a depth map as grayscale PFM (meters, 32-bit floats).
pub fn save_depth_pfm(path: &Path, depth: &DepthMap) -> Result<()> {
    let raw: Vec<f32> = depth.values().iter().map(|&v| v as f32).collect();
    save_pfm_gray(path, depth.height(), depth.width(), &raw)
}

/// Reads a binary PPM (P6, maxval 255) as a `3 x H x W` tensor in `[0, 1]`.
pub fn load_rgb(path: &Path) -> Result<Tensor> {
    let (h, w, bytes) = load_ppm(path)?;
    let mut data = vec![0.0f64; 3 * h * w];
    for p in 0..h * w {
        for ch in 0..3 {
            data[ch * h * w + p] = bytes[p * 3 + ch] as f64 / 255.0;
        }
    }
    Tensor::new(vec![3, h, w], data)
}

/// Writes a `3 x H x W` tensor in `[0, 1]` as binary PPM.
pub fn save_rgb(path: &Path, rgb: &Tensor) -> Result<()> {
    if rgb.rank() != 3 || rgb.shape()[0] != 3 {
        return Err(Error::shape(format!(
            "expected 3xHxW tensor, got {:?}",
            rgb.shape()
        )));
    }
    let (h, w) = (rgb.shape()[1], rgb.shape()[2]);
    let mut bytes = vec![0u8; 3 * h * w];
    for p in 0..h * w {
        for ch in 0..3 {
            let v = rgb.data()[ch * h * w + p];
            bytes[p * 3 + ch] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    save_ppm(path, h, w, &bytes)
}

//! Portable field files and PNG export.
//!
//! A field is stored as two files: raw little-endian `f32` samples, planar
//! (every real component, then every imaginary component, both row-major),
//! and a JSON sidecar next to it with the same stem:
//!
//! ```json
//! {"width": 64, "height": 64, "domain": "kspace", "dtype": "f32", "layout": "planar-ri"}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Domain, RealImage};

pub const DTYPE: &str = "f32";
pub const LAYOUT: &str = "planar-ri";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSidecar {
    pub width: usize,
    pub height: usize,
    pub domain: Domain,
    pub dtype: String,
    pub layout: String,
}

pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

pub fn encode_planar(field: &ComplexField) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(field.len() * 8);
    for c in field.samples() {
        bytes.extend_from_slice(&(c.re as f32).to_le_bytes());
    }
    for c in field.samples() {
        bytes.extend_from_slice(&(c.im as f32).to_le_bytes());
    }
    bytes
}

pub fn decode_planar(sidecar: &FieldSidecar, bytes: &[u8]) -> Result<ComplexField> {
    if sidecar.dtype != DTYPE || sidecar.layout != LAYOUT {
        return Err(Error::Format(format!(
            "unsupported dtype/layout {}/{}",
            sidecar.dtype, sidecar.layout
        )));
    }
    let n = sidecar.width * sidecar.height;
    if bytes.len() != n * 8 {
        return Err(Error::Format(format!(
            "expected {} bytes for a {}x{} field, found {}",
            n * 8,
            sidecar.width,
            sidecar.height,
            bytes.len()
        )));
    }
    let value = |i: usize| f32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as f64;
    let samples = (0..n).map(|i| Complex64::new(value(i), value(n + i))).collect();
    ComplexField::from_samples(sidecar.width, sidecar.height, sidecar.domain, samples)
}

pub fn write_field(data_path: &Path, field: &ComplexField) -> Result<()> {
    let sidecar = FieldSidecar {
        width: field.width(),
        height: field.height(),
        domain: field.domain(),
        dtype: DTYPE.into(),
        layout: LAYOUT.into(),
    };
    fs::write(data_path, encode_planar(field))?;
    fs::write(sidecar_path(data_path), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_field(data_path: &Path) -> Result<ComplexField> {
    let sidecar: FieldSidecar = serde_json::from_slice(&fs::read(sidecar_path(data_path))?)?;
    decode_planar(&sidecar, &fs::read(data_path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Linear,
    /// Logarithmic over three decades below the image maximum.
    Log,
}

/// Maps an image to 8-bit gray levels.
pub fn to_gray(image: &RealImage, scaling: Scaling) -> Vec<u8> {
    let max = image.data.iter().cloned().fold(f64::MIN, f64::max);
    let min = image.data.iter().cloned().fold(f64::MAX, f64::min);
    let mapped: Vec<f64> = match scaling {
        Scaling::Linear => {
            let span = (max - min).max(f64::MIN_POSITIVE);
            image.data.iter().map(|v| (v - min) / span).collect()
        }
        Scaling::Log => {
            let top = max.max(f64::MIN_POSITIVE);
            let floor = top * 1e-3;
            let (lo, hi) = (floor.log10(), top.log10());
            image.data
                .iter()
                .map(|&v| (v.max(floor).log10() - lo) / (hi - lo))
                .collect()
        }
    };
    mapped.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

pub fn write_png(path: &Path, image: &RealImage, scaling: Scaling) -> Result<()> {
    let buf = image::GrayImage::from_raw(image.width as u32, image.height as u32, to_gray(image, scaling))
        .expect("buffer matches image dimensions");
    buf.save(path)?;
    Ok(())
}

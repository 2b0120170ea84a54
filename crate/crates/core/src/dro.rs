//! Digital reference objects: a multi-object disk grid for detectability
//! and a signal-known-exactly square object for the model observer.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{parameter, Error, Result};
use crate::field::{ComplexField, Domain, RealImage};
use crate::noise::{add_complex_gaussian_noise, add_real_gaussian_noise, derive_seed, NoiseSpec};

/// Noise realizations evaluated per disk-grid study.
pub const DISK_GRID_REALIZATIONS: usize = 48;
/// Noise realizations per SKE condition and how they are grouped.
pub const SKE_REALIZATIONS: usize = 4096;
pub const SKE_GROUPS: usize = 8;
pub const SKE_GROUP_SIZE: usize = SKE_REALIZATIONS / SKE_GROUPS;

/// Empty pixels kept between a disk and its cell border on each side.
const GUARD: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiskGridSpec {
    pub diameters: Vec<usize>,
    pub cnr_levels: Vec<f64>,
    pub noise_sigma: f64,
    pub cell_size: usize,
    pub background: f64,
}

impl Default for DiskGridSpec {
    fn default() -> Self {
        Self {
            diameters: (1..=12).collect(),
            cnr_levels: log_spaced(1.0, 25.0, 10),
            noise_sigma: 1.0,
            cell_size: 24,
            background: 0.0,
        }
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskTruth {
    pub id: usize,
    pub cx: f64,
    pub cy: f64,
    pub diameter: usize,
    pub cnr: f64,
    pub amplitude: f64,
}

impl DiskTruth {
    /// Pixel-center membership test: no anti-aliasing.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let dx = x as f64 - self.cx;
        let dy = y as f64 - self.cy;
        let r = self.diameter as f64 / 2.0;
        dx * dx + dy * dy <= r * r
    }

    pub fn pixels(&self) -> Vec<(usize, usize)> {
        let r = self.diameter as f64 / 2.0;
        let x0 = (self.cx - r).floor().max(0.0) as usize;
        let y0 = (self.cy - r).floor().max(0.0) as usize;
        let x1 = (self.cx + r).ceil() as usize;
        let y1 = (self.cy + r).ceil() as usize;
        (y0..=y1)
            .flat_map(|y| (x0..=x1).map(move |x| (x, y)))
            .filter(|&(x, y)| self.contains(x, y))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMap {
    pub width: usize,
    pub height: usize,
    pub background: f64,
    pub cell_size: usize,
    pub disks: Vec<DiskTruth>,
}

impl GroundTruthMap {
    pub fn disk(&self, id: usize) -> Result<&DiskTruth> {
        self.disks.get(id).filter(|d| d.id == id).ok_or(Error::UnknownDisk(id))
    }

    /// Noiseless object described by the map.
    pub fn render(&self) -> ComplexField {
        let mut field = ComplexField::from_fn(self.width, self.height, Domain::Image, |_, _| {
            Complex64::new(self.background, 0.0)
        });
        for disk in &self.disks {
            for (x, y) in disk.pixels() {
                if x < self.width && y < self.height {
                    field.set(x, y, Complex64::new(self.background + disk.amplitude, 0.0));
                }
            }
        }
        field
    }
}

/// Standard deviation of the magnitude of `level + n` where `n` is complex
/// Gaussian with per-component deviation `sigma` (Rician; Rayleigh when
/// `level` is zero).
pub fn magnitude_noise_std(level: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let a = level * level / (2.0 * sigma * sigma);
    let laguerre = (1.0 + a) * bessel_i0_scaled(a / 2.0) + a * bessel_i1_scaled(a / 2.0);
    let mean = sigma * (std::f64::consts::PI / 2.0).sqrt() * laguerre;
    (2.0 * sigma * sigma + level * level - mean * mean).max(0.0).sqrt()
}

// Polynomial approximations of exp(-x) I0(x) and exp(-x) I1(x) for x >= 0
// (Abramowitz & Stegun 9.8.1-9.8.4).
fn bessel_i0_scaled(x: f64) -> f64 {
    if x < 3.75 {
        let t = (x / 3.75).powi(2);
        let i0 = 1.0
            + t * (3.5156229
                + t * (3.0899424 + t * (1.2067492 + t * (0.2659732 + t * (0.0360768 + t * 0.0045813)))));
        i0 * (-x).exp()
    } else {
        let t = 3.75 / x;
        (0.39894228
            + t * (0.01328592
                + t * (0.00225319
                    + t * (-0.00157565
                        + t * (0.00916281
                            + t * (-0.02057706 + t * (0.02635537 + t * (-0.01647633 + t * 0.00392377))))))))
            / x.sqrt()
    }
}

fn bessel_i1_scaled(x: f64) -> f64 {
    if x < 3.75 {
        let t = (x / 3.75).powi(2);
        let i1 = x
            * (0.5
                + t * (0.87890594
                    + t * (0.51498869 + t * (0.15084934 + t * (0.02658733 + t * (0.00301532 + t * 0.00032411))))));
        i1 * (-x).exp()
    } else {
        let t = 3.75 / x;
        (0.39894228
            + t * (-0.03988024
                + t * (-0.00362018
                    + t * (0.00163801
                        + t * (-0.01031555
                            + t * (0.02282967 + t * (-0.02895312 + t * (0.01787654 - t * 0.00420059))))))))
            / x.sqrt()
    }
}

/// Lays out one disk per (diameter, CNR) pair: rows follow `diameters`,
/// columns follow `cnr_levels`.
pub fn disk_grid_truth(spec: &DiskGridSpec) -> Result<GroundTruthMap> {
    if spec.diameters.is_empty() || spec.cnr_levels.is_empty() {
        return Err(parameter("disk grid needs at least one diameter and one CNR level"));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(parameter("noise sigma must be >= 0"));
    }
    let max_d = *spec.diameters.iter().max().unwrap();
    if spec.diameters.contains(&0) {
        return Err(parameter("disk diameters must be positive"));
    }
    if max_d + 2 * GUARD > spec.cell_size {
        return Err(Error::Layout(format!(
            "disk of diameter {max_d} does not fit a {} pixel cell with a {GUARD} pixel guard band",
            spec.cell_size
        )));
    }
    // With zero noise the CNR ladder still needs a scale; use unit noise.
    let noise_std = match magnitude_noise_std(spec.background, spec.noise_sigma) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let cell = spec.cell_size;
    let mut disks = Vec::with_capacity(spec.diameters.len() * spec.cnr_levels.len());
    for (row, &diameter) in spec.diameters.iter().enumerate() {
        for (col, &cnr) in spec.cnr_levels.iter().enumerate() {
            let center = |origin: usize| {
                let mid = origin as f64 + (cell as f64 - 1.0) / 2.0;
                if diameter % 2 == 1 {
                    mid.floor()
                } else {
                    mid.floor() + 0.5
                }
            };
            disks.push(DiskTruth {
                id: disks.len(),
                cx: center(col * cell),
                cy: center(row * cell),
                diameter,
                cnr,
                amplitude: cnr * noise_std,
            });
        }
    }
    Ok(GroundTruthMap {
        width: spec.cnr_levels.len() * cell,
        height: spec.diameters.len() * cell,
        background: spec.background,
        cell_size: cell,
        disks,
    })
}

/// Noisy disk-grid realization and its ground truth.
pub fn generate_disk_grid(spec: &DiskGridSpec, seed: u64) -> Result<(ComplexField, GroundTruthMap)> {
    let truth = disk_grid_truth(spec)?;
    let noisy = add_complex_gaussian_noise(&truth.render(), NoiseSpec::new(spec.noise_sigma, seed))?;
    Ok((noisy, truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeSpec {
    pub grid: usize,
    pub object_size: usize,
    pub intensity: f64,
    /// Per-image noise variance.
    pub noise_variance: f64,
}

impl SkeSpec {
    /// Reference configuration for a square of side `object_size`:
    /// intensities 3.0, 1.5 and 0.75 for sizes 1, 2 and 4 (equal signal
    /// energy), 120x120 grid, noise variance 1.41.
    pub fn reference(object_size: usize) -> Self {
        Self {
            grid: 120,
            object_size,
            intensity: 3.0 / object_size as f64,
            noise_variance: 1.41,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.object_size == 0 || self.object_size > self.grid {
            return Err(Error::Layout(format!(
                "a {0}x{0} object does not fit a {1}x{1} grid",
                self.object_size, self.grid
            )));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(parameter("noise variance must be >= 0"));
        }
        Ok(())
    }

    /// Top-left corner of the centered square, `floor((grid - size) / 2)`.
    pub fn anchor(&self) -> usize {
        (self.grid - self.object_size) / 2
    }

    /// Noiseless signal image.
    pub fn signal(&self) -> Result<RealImage> {
        self.validate()?;
        let mut img = RealImage::filled(self.grid, self.grid, 0.0);
        let a = self.anchor();
        for y in a..a + self.object_size {
            for x in a..a + self.object_size {
                img.set(x, y, self.intensity);
            }
        }
        Ok(img)
    }
}

/// A signal-present / signal-absent pair with independent real-valued white
/// Gaussian noise. Realization `i` of a study uses `derive_seed(base, i)`.
pub fn generate_ske_pair(spec: &SkeSpec, seed: u64) -> Result<(ComplexField, ComplexField)> {
    let signal = ComplexField::from_real(&spec.signal()?, Domain::Image);
    let absent = ComplexField::zeros(spec.grid, spec.grid, Domain::Image);
    let sigma = spec.noise_variance.sqrt();
    let present = add_real_gaussian_noise(&signal, NoiseSpec::new(sigma, derive_seed(seed, 0)))?;
    let absent = add_real_gaussian_noise(&absent, NoiseSpec::new(sigma, derive_seed(seed, 1)))?;
    Ok((present, absent))
}

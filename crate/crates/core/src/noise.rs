//! Seeded Gaussian noise.
//!
//! The generator is ChaCha20 (`rand_chacha::ChaCha20Rng`, seeded through
//! `SeedableRng::seed_from_u64`), a counter-based stream cipher. Normal
//! deviates come from the Box-Muller transform applied to consecutive pairs
//! of 53-bit uniforms, consuming the cosine branch first and the sine branch
//! second. Complex noise draws the real component before the imaginary one,
//! walking the field in row-major order.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{parameter, Result};
use crate::field::ComplexField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per-component standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { sigma, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(parameter(format!("noise sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Standard normal stream.
#[derive(Debug, Clone)]
pub struct SeededGaussian {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl SeededGaussian {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// SplitMix64 finalizer; derives independent child seeds from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Adds circularly symmetric complex white Gaussian noise: independent
/// zero-mean normals of standard deviation `sigma` on both components.
pub fn add_complex_gaussian_noise(field: &ComplexField, spec: NoiseSpec) -> Result<ComplexField> {
    spec.validate()?;
    if spec.sigma == 0.0 {
        return Ok(field.clone());
    }
    let mut g = SeededGaussian::new(spec.seed);
    let mut out = field.clone();
    for c in out.samples_mut() {
        let re = g.next();
        let im = g.next();
        *c += Complex64::new(spec.sigma * re, spec.sigma * im);
    }
    Ok(out)
}

/// Adds real-valued white Gaussian noise; imaginary components are untouched.
pub fn add_real_gaussian_noise(field: &ComplexField, spec: NoiseSpec) -> Result<ComplexField> {
    spec.validate()?;
    if spec.sigma == 0.0 {
        return Ok(field.clone());
    }
    let mut g = SeededGaussian::new(spec.seed);
    let mut out = field.clone();
    for c in out.samples_mut() {
        c.re += spec.sigma * g.next();
    }
    Ok(out)
}

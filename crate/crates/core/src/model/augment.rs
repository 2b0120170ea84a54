//! Training-sample augmentations. Every op acts on the clean image and both
//! residual targets, after which the input is re-summed, so the sample
//! identity `input = clean + ring + noise` survives any chain of ops.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::synth::TrainSample;
use crate::error::{Error, Result};
use crate::field::{ComplexField, Domain};
use crate::noise::{add_complex_gaussian_noise, derive_seed, NoiseSpec, SeededGaussian};

/// Names accepted by `AugmentOp::random` and `augment`.
pub const AUGMENTATION_NAMES: [&str; 7] =
    ["rot90", "fliph", "flipv", "flip", "intensity_ramp", "phase_ramp", "extra_noise"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentOp {
    Rot90 { quarter_turns: u8 },
    FlipHorizontal,
    FlipVertical,
    /// Multiplies by `1 + gx * u + gy * v` with `u, v` spanning `[-1, 1]`.
    IntensityRamp { gx: f64, gy: f64 },
    /// Multiplies by `exp(i (phase0 + kx * x + ky * y))`.
    PhaseRamp { phase0: f64, kx: f64, ky: f64 },
    /// Adds complex white noise to the noise target (and thus the input).
    ExtraNoise { sigma: f64, seed: u64 },
}

impl AugmentOp {
    fn transform(&self, f: &ComplexField) -> ComplexField {
        let (w, h) = f.dims();
        match *self {
            AugmentOp::Rot90 { quarter_turns } => {
                let mut out = f.clone();
                for _ in 0..quarter_turns % 4 {
                    let (ow, oh) = out.dims();
                    out = ComplexField::from_fn(oh, ow, Domain::Image, |x, y| out.get(y, oh - 1 - x));
                }
                out
            }
            AugmentOp::FlipHorizontal => ComplexField::from_fn(w, h, Domain::Image, |x, y| f.get(w - 1 - x, y)),
            AugmentOp::FlipVertical => ComplexField::from_fn(w, h, Domain::Image, |x, y| f.get(x, h - 1 - y)),
            AugmentOp::IntensityRamp { gx, gy } => {
                let span = |n: usize, i: usize| if n > 1 { 2.0 * i as f64 / (n - 1) as f64 - 1.0 } else { 0.0 };
                ComplexField::from_fn(w, h, Domain::Image, |x, y| f.get(x, y) * (1.0 + gx * span(w, x) + gy * span(h, y)))
            }
            AugmentOp::PhaseRamp { phase0, kx, ky } => ComplexField::from_fn(w, h, Domain::Image, |x, y| {
                f.get(x, y) * Complex64::from_polar(1.0, phase0 + kx * x as f64 + ky * y as f64)
            }),
            AugmentOp::ExtraNoise { .. } => f.clone(),
        }
    }

    pub fn apply(&self, sample: &TrainSample) -> Result<TrainSample> {
        let clean = self.transform(&sample.clean);
        let ring = self.transform(&sample.target_ring);
        let mut noise = self.transform(&sample.target_noise);
        if let AugmentOp::ExtraNoise { sigma, seed } = *self {
            noise = add_complex_gaussian_noise(&noise, NoiseSpec::new(sigma, seed))?;
        }
        let mut provenance = sample.provenance.clone();
        provenance.augmentations.push(*self);
        TrainSample::assemble(clean, ring, noise, provenance)
    }

    /// Draws a randomly parameterized op for a named augmentation.
    pub fn random(name: &str, sample: &TrainSample, rng: &mut SeededGaussian) -> Result<AugmentOp> {
        Ok(match name {
            "rot90" => AugmentOp::Rot90 { quarter_turns: rng.below(4) as u8 },
            "fliph" => AugmentOp::FlipHorizontal,
            "flipv" => AugmentOp::FlipVertical,
            "flip" => match rng.below(3) {
                0 => AugmentOp::FlipHorizontal,
                1 => AugmentOp::FlipVertical,
                _ => AugmentOp::Rot90 { quarter_turns: 0 },
            },
            "intensity_ramp" => AugmentOp::IntensityRamp { gx: rng.uniform_range(-0.4, 0.4), gy: rng.uniform_range(-0.4, 0.4) },
            "phase_ramp" => {
                let k = std::f64::consts::PI / 16.0;
                AugmentOp::PhaseRamp {
                    phase0: rng.uniform_range(0.0, std::f64::consts::TAU),
                    kx: rng.uniform_range(-k, k),
                    ky: rng.uniform_range(-k, k),
                }
            }
            "extra_noise" => AugmentOp::ExtraNoise {
                sigma: rng.uniform_range(0.0, 0.5) * sample.provenance.noise_sigma,
                seed: rng.uniform().to_bits(),
            },
            other => return Err(Error::Config(format!("unknown augmentation '{other}'"))),
        })
    }
}

/// Applies the named augmentations in order with parameters drawn from `seed`.
pub fn augment(sample: &TrainSample, ops: &[String], seed: u64) -> Result<TrainSample> {
    let mut out = sample.clone();
    for (i, name) in ops.iter().enumerate() {
        let mut rng = SeededGaussian::new(derive_seed(seed, i as u64));
        let op = AugmentOp::random(name, &out, &mut rng)?;
        out = op.apply(&out)?;
    }
    Ok(out)
}

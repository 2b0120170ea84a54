//! Training pairs: near-perfect clean images and degraded versions with
//! truncation artifacts and noise.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentOp};
use crate::error::{parameter, Result};
use crate::fft::{forward_fft, inverse_fft};
use crate::field::{ComplexField, Domain};
use crate::kspace::{truncate_kspace, zero_fill};
use crate::noise::{add_complex_gaussian_noise, derive_seed, NoiseSpec, SeededGaussian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDomain {
    /// White noise added to the degraded image.
    #[default]
    Image,
    /// White noise added to the retained k-space samples before zero-filling,
    /// which makes it band-limited in the image.
    KSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub trunc_fraction: f64,
    pub noise_sigma: f64,
    pub noise_domain: NoiseDomain,
    pub seed: u64,
    pub augmentations: Vec<AugmentOp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub clean: ComplexField,
    /// Always `clean + target_ring + target_noise`, summed in that order.
    pub input: ComplexField,
    pub target_ring: ComplexField,
    pub target_noise: ComplexField,
    pub provenance: Provenance,
}

impl TrainSample {
    /// Rebuilds `input` from its parts.
    pub(crate) fn assemble(
        clean: ComplexField,
        target_ring: ComplexField,
        target_noise: ComplexField,
        provenance: Provenance,
    ) -> Result<Self> {
        let input = clean.add(&target_ring)?.add(&target_noise)?;
        Ok(Self { clean, input, target_ring, target_noise, provenance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    pub trunc_fraction: f64,
    pub noise_sigma: f64,
    pub noise_domain: NoiseDomain,
}

/// Degrades `clean` by keeping the central `trunc_fraction` of k-space along
/// each axis, zero-filling back to the original grid, and adding image-domain
/// white noise.
pub fn synthesize_training_pair(
    clean: &ComplexField,
    trunc_fraction: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<TrainSample> {
    synthesize_training_pair_with(
        clean,
        SynthesisParams { trunc_fraction, noise_sigma, noise_domain: NoiseDomain::Image },
        seed,
    )
}

pub fn synthesize_training_pair_with(clean: &ComplexField, params: SynthesisParams, seed: u64) -> Result<TrainSample> {
    clean.expect_domain(Domain::Image)?;
    let f = params.trunc_fraction;
    if !(f > 0.0 && f <= 1.0) {
        return Err(parameter(format!("trunc_fraction must lie in (0, 1], got {f}")));
    }
    let (w, h) = clean.dims();
    let tw = ((w as f64 * f).round() as usize).clamp(1, w);
    let th = ((h as f64 * f).round() as usize).clamp(1, h);
    let noise = NoiseSpec::new(params.noise_sigma, seed);

    let (ring, noise_field) = if tw == w && th == h {
        let ring = ComplexField::zeros(w, h, Domain::Image);
        let noise_field = add_complex_gaussian_noise(&ComplexField::zeros(w, h, Domain::Image), noise)?;
        (ring, noise_field)
    } else {
        let kept = truncate_kspace(&forward_fft(clean)?, tw, th)?;
        let degraded = inverse_fft(&zero_fill(&kept, w, h)?)?;
        let ring = degraded.sub(clean)?;
        let noise_field = match params.noise_domain {
            NoiseDomain::Image => add_complex_gaussian_noise(&ComplexField::zeros(w, h, Domain::Image), noise)?,
            NoiseDomain::KSpace => {
                let k_noise = add_complex_gaussian_noise(&ComplexField::zeros(tw, th, Domain::KSpace), noise)?;
                inverse_fft(&zero_fill(&k_noise, w, h)?)?
            }
        };
        (ring, noise_field)
    };
    let provenance = Provenance {
        trunc_fraction: f,
        noise_sigma: params.noise_sigma,
        noise_domain: params.noise_domain,
        seed,
        augmentations: Vec::new(),
    };
    TrainSample::assemble(clean.clone(), ring, noise_field, provenance)
}

/// Procedural "near-perfect" image: piecewise-constant shapes with sharp
/// edges on a smooth background, fine bar patterns, point-like objects and a
/// smooth phase. Values are complex with magnitudes roughly in `[0, 1]`.
pub fn random_clean_image(w: usize, h: usize, rng: &mut SeededGaussian) -> ComplexField {
    let mut mag = vec![0.0f64; w * h];
    let (wf, hf) = (w as f64, h as f64);

    let base = rng.uniform_range(0.0, 0.4);
    let gx = rng.uniform_range(-0.2, 0.2);
    let gy = rng.uniform_range(-0.2, 0.2);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.uniform_range(-0.08, 0.08),
                rng.uniform_range(0.0, 3.0) * std::f64::consts::TAU / wf,
                rng.uniform_range(0.0, 3.0) * std::f64::consts::TAU / hf,
                rng.uniform_range(0.0, std::f64::consts::TAU),
            )
        })
        .collect();
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f64 / wf - 0.5, y as f64 / hf - 0.5);
            let mut val = base + gx * u + gy * v;
            for &(a, fx, fy, p) in &waves {
                val += a * (fx * x as f64 + fy * y as f64 + p).sin();
            }
            mag[y * w + x] = val.max(0.0);
        }
    }

    let shapes = 1 + rng.below(6);
    for _ in 0..shapes {
        let level = rng.uniform_range(0.0, 1.0);
        let cx = rng.uniform_range(0.0, wf);
        let cy = rng.uniform_range(0.0, hf);
        match rng.below(4) {
            0 => {
                let r = rng.uniform_range(1.5, wf.min(hf) / 3.0);
                paint(&mut mag, w, h, level, |x, y| (x - cx).powi(2) + (y - cy).powi(2) <= r * r);
            }
            1 => {
                let (hw, hh) = (rng.uniform_range(2.0, wf / 3.0), rng.uniform_range(2.0, hf / 3.0));
                paint(&mut mag, w, h, level, |x, y| (x - cx).abs() <= hw && (y - cy).abs() <= hh);
            }
            2 => {
                // Rotated rectangle.
                let (hw, hh) = (rng.uniform_range(2.0, wf / 3.0), rng.uniform_range(1.0, hf / 4.0));
                let t = rng.uniform_range(0.0, std::f64::consts::PI);
                let (s, c) = t.sin_cos();
                paint(&mut mag, w, h, level, |x, y| {
                    let (dx, dy) = (x - cx, y - cy);
                    (c * dx + s * dy).abs() <= hw && (-s * dx + c * dy).abs() <= hh
                });
            }
            _ => {
                // Bar pattern in a box.
                let period = 2 + rng.below(5);
                let horizontal = rng.below(2) == 0;
                let (hw, hh) = (rng.uniform_range(3.0, wf / 4.0), rng.uniform_range(3.0, hf / 4.0));
                paint(&mut mag, w, h, level, |x, y| {
                    let inside = (x - cx).abs() <= hw && (y - cy).abs() <= hh;
                    let coord = if horizontal { y } else { x } as usize;
                    inside && (coord / (period / 2).max(1)) % 2 == 0
                });
            }
        }
    }

    let dots = rng.below(4);
    for _ in 0..dots {
        let (x, y) = (rng.below(w), rng.below(h));
        let size = 1 + rng.below(2);
        let level = rng.uniform_range(0.2, 1.0);
        for yy in y..(y + size).min(h) {
            for xx in x..(x + size).min(w) {
                mag[yy * w + xx] = level;
            }
        }
    }

    let p0 = rng.uniform_range(0.0, std::f64::consts::TAU);
    let px = rng.uniform_range(-1.0, 1.0) * std::f64::consts::TAU / wf;
    let py = rng.uniform_range(-1.0, 1.0) * std::f64::consts::TAU / hf;
    ComplexField::from_fn(w, h, Domain::Image, |x, y| {
        Complex64::from_polar(mag[y * w + x], p0 + px * x as f64 + py * y as f64)
    })
}

fn paint(mag: &mut [f64], w: usize, h: usize, level: f64, inside: impl Fn(f64, f64) -> bool) {
    for y in 0..h {
        for x in 0..w {
            if inside(x as f64, y as f64) {
                mag[y * w + x] = level;
            }
        }
    }
}

/// Deterministic stream of augmented training samples: sample `i` depends
/// only on `(seed, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSource {
    pub patch_size: usize,
    pub trunc_fractions: Vec<f64>,
    /// Range of the clean image's mean magnitude over the noise sigma.
    pub min_snr: f64,
    pub max_snr: f64,
    /// Fraction of samples whose noise is injected in k-space.
    pub kspace_noise_fraction: f64,
    pub augmentations: Vec<String>,
    pub seed: u64,
}

impl Default for CorpusSource {
    fn default() -> Self {
        Self {
            patch_size: 32,
            trunc_fractions: vec![0.5, 0.75, 1.0],
            min_snr: 1.0,
            max_snr: 10.0,
            kspace_noise_fraction: 0.25,
            augmentations: ["rot90", "flip", "intensity_ramp", "phase_ramp", "extra_noise"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            seed: 0,
        }
    }
}

impl CorpusSource {
    pub fn sample(&self, index: u64) -> Result<TrainSample> {
        if self.trunc_fractions.is_empty() {
            return Err(parameter("corpus needs at least one truncation fraction"));
        }
        let seed = derive_seed(self.seed, index);
        let mut rng = SeededGaussian::new(seed);
        let clean = random_clean_image(self.patch_size, self.patch_size, &mut rng);
        let mean_mag = clean.samples().iter().map(|c| c.norm()).sum::<f64>() / clean.len() as f64;
        let level = mean_mag.max(0.05);
        let snr = (self.min_snr.ln() + rng.uniform() * (self.max_snr / self.min_snr).ln()).exp();
        let trunc_fraction = self.trunc_fractions[rng.below(self.trunc_fractions.len())];
        let noise_domain = if rng.uniform() < self.kspace_noise_fraction {
            NoiseDomain::KSpace
        } else {
            NoiseDomain::Image
        };
        let mut noise_sigma = level / snr;
        if noise_domain == NoiseDomain::KSpace {
            // Keep the image-domain noise level comparable.
            noise_sigma /= trunc_fraction;
        }
        let params = SynthesisParams { trunc_fraction, noise_sigma, noise_domain };
        let sample = synthesize_training_pair_with(&clean, params, derive_seed(seed, 1))?;
        augment(&sample, &self.augmentations, derive_seed(seed, 2))
    }
}

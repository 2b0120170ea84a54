use serde::{Deserialize, Serialize};

use crate::error::{dimension, parameter, Error, Result};
use crate::fft::inverse_fft;
use crate::field::{ComplexField, Domain, RealImage, Roi};
use crate::kspace::zero_fill;
use crate::model::DenoiseModel;
use crate::window::{apodize, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconMode {
    #[default]
    Conventional,
    DeepLearning,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconConfig {
    pub mode: ReconMode,
    pub window: WindowSpec,
    pub denoising_level: f64,
    /// Output matrix `[width, height]`; `None` keeps the k-space dims.
    pub output_dims: Option<[usize; 2]>,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self { mode: ReconMode::Conventional, window: WindowSpec::Rect, denoising_level: 0.0, output_dims: None }
    }
}

impl ReconConfig {
    pub fn conventional(window: WindowSpec) -> Self {
        Self { window, ..Self::default() }
    }

    pub fn deep_learning(denoising_level: f64) -> Self {
        Self { mode: ReconMode::DeepLearning, denoising_level, ..Self::default() }
    }

    pub fn with_output_dims(mut self, width: usize, height: usize) -> Self {
        self.output_dims = Some([width, height]);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if !(0.0..=1.0).contains(&self.denoising_level) {
            return Err(parameter(format!("denoising level {} outside [0, 1]", self.denoising_level)));
        }
        if let Some([w, h]) = self.output_dims {
            if w == 0 || h == 0 {
                return Err(dimension("output dims must be positive"));
            }
        }
        Ok(())
    }

    fn target_dims(&self, kspace: &ComplexField) -> Result<(usize, usize)> {
        let (w, h) = kspace.dims();
        let (tw, th) = self.output_dims.map_or((w, h), |[a, b]| (a, b));
        if tw < w || th < h {
            return Err(dimension(format!("output {tw}x{th} is smaller than k-space {w}x{h}")));
        }
        Ok((tw, th))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub image: ComplexField,
    pub magnitude: RealImage,
}

impl Reconstruction {
    fn new(image: ComplexField) -> Self {
        let magnitude = image.magnitude();
        Self { image, magnitude }
    }
}

/// Zero-fill to the output grid and transform, rescaled so that image
/// intensities do not depend on the output matrix size.
fn interpolate(kspace: &ComplexField, cfg: &ReconConfig) -> Result<ComplexField> {
    let (tw, th) = cfg.target_dims(kspace)?;
    let gain = ((tw * th) as f64 / kspace.len() as f64).sqrt();
    Ok(inverse_fft(&zero_fill(kspace, tw, th)?)?.scale(gain))
}

fn expect_mode(cfg: &ReconConfig, mode: ReconMode) -> Result<()> {
    if cfg.mode != mode {
        return Err(Error::Config(format!("expected {mode:?} mode, got {:?}", cfg.mode)));
    }
    Ok(())
}

/// Apodize, zero-fill, inverse transform.
pub fn conventional_recon(kspace: &ComplexField, cfg: &ReconConfig) -> Result<Reconstruction> {
    expect_mode(cfg, ReconMode::Conventional)?;
    cfg.validate()?;
    kspace.expect_domain(Domain::KSpace)?;
    Ok(Reconstruction::new(interpolate(&apodize(kspace, cfg.window)?, cfg)?))
}

/// Interpolated network input and both predicted residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct DlComponents {
    pub input: ComplexField,
    pub ring: ComplexField,
    pub noise: ComplexField,
}

impl DlComponents {
    /// `input - ring - level * noise`.
    pub fn blend(&self, level: f64) -> ComplexField {
        let mut out = self.input.clone();
        let (r, e) = (self.ring.samples(), self.noise.samples());
        for (i, v) in out.samples_mut().iter_mut().enumerate() {
            *v = *v - r[i] - e[i] * level;
        }
        out
    }
}

pub fn dl_components(kspace: &ComplexField, model: &DenoiseModel, cfg: &ReconConfig) -> Result<DlComponents> {
    cfg.validate()?;
    kspace.expect_domain(Domain::KSpace)?;
    let input = interpolate(kspace, cfg)?;
    let (ring, noise) = model.cnn_forward(&input)?;
    Ok(DlComponents { input, ring, noise })
}

/// Zero-fill, inverse transform, subtract the ringing residual and the
/// requested fraction of the noise residual.
pub fn dl_recon(kspace: &ComplexField, model: &DenoiseModel, cfg: &ReconConfig) -> Result<Reconstruction> {
    expect_mode(cfg, ReconMode::DeepLearning)?;
    let parts = dl_components(kspace, model, cfg)?;
    Ok(Reconstruction::new(parts.blend(cfg.denoising_level)))
}

/// Single entry point for both pipelines. `model` is required only in
/// deep-learning mode.
pub fn reconstruct(kspace: &ComplexField, model: Option<&DenoiseModel>, cfg: &ReconConfig) -> Result<Reconstruction> {
    match cfg.mode {
        ReconMode::Conventional => conventional_recon(kspace, cfg),
        ReconMode::DeepLearning => {
            let model = model.ok_or_else(|| Error::Config("deep-learning recon needs a model".into()))?;
            dl_recon(kspace, model, cfg)
        }
    }
}

/// Deep-learning pipeline applied to an image that is already on the output
/// grid (equivalent to `dl_recon` of its spectrum with unchanged dims).
pub fn denoise_image(image: &ComplexField, model: &DenoiseModel, level: f64) -> Result<ComplexField> {
    let cfg = ReconConfig::deep_learning(level);
    cfg.validate()?;
    image.expect_domain(Domain::Image)?;
    let (ring, noise) = model.cnn_forward(image)?;
    Ok(DlComponents { input: image.clone(), ring, noise }.blend(level))
}

/// `denoise_image` evaluated only on `roi`, using a crop padded by the
/// receptive-field radius; identical to cropping the full-image result.
pub fn denoise_region(image: &ComplexField, model: &DenoiseModel, level: f64, roi: Roi) -> Result<ComplexField> {
    let (w, h) = image.dims();
    roi.check_within(w, h)?;
    let (rf_h, rf_w) = model.receptive_field();
    let (bx, by) = (rf_w / 2, rf_h / 2);
    let x0 = roi.x.saturating_sub(bx);
    let y0 = roi.y.saturating_sub(by);
    let x1 = (roi.x + roi.width + bx).min(w);
    let y1 = (roi.y + roi.height + by).min(h);
    let out = denoise_image(&image.crop(x0, y0, x1 - x0, y1 - y0)?, model, level)?;
    out.crop(roi.x - x0, roi.y - y0, roi.width, roi.height)
}

//! Desk-scale denoising and deringing network, its training data synthesis,
//! and an ADAM trainer.
//!
//! The network maps a complex image (real and imaginary channels) to two
//! complex residuals: the truncation artifact and the noise.

mod augment;
mod checkpoint;
mod net;
mod synth;
mod train;

use num_complex::Complex64;

use crate::error::{dimension, Result};
use crate::field::{ComplexField, Domain};

pub use augment::{augment, AugmentOp, AUGMENTATION_NAMES};
pub use checkpoint::{ModelManifest, MANIFEST_FORMAT, MANIFEST_VERSION};
pub use net::{Architecture, ConvLayer, ConvNet, ForwardCache, LayerShape, Scalar};
pub use synth::{
    random_clean_image, synthesize_training_pair, synthesize_training_pair_with, CorpusSource, NoiseDomain,
    Provenance, SynthesisParams, TrainSample,
};
pub use train::{mae_loss_and_grad, train, write_loss_trace, Adam, SampleSource, TrainConfig, TrainOutcome};

/// Channels of the network output, in order.
pub const OUTPUT_HEADS: [&str; 4] = ["ring_re", "ring_im", "noise_re", "noise_im"];

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseModel {
    pub arch: Architecture,
    pub net: ConvNet<f32>,
}

impl DenoiseModel {
    pub fn new(arch: Architecture, seed: u64) -> Self {
        Self { arch, net: ConvNet::init(&arch, seed) }
    }

    pub fn receptive_field(&self) -> (usize, usize) {
        self.net.receptive_field()
    }

    pub fn parameter_count(&self) -> usize {
        self.net.parameter_count()
    }

    /// Predicted `(ring_residual, noise_residual)` for a complex image.
    pub fn cnn_forward(&self, image: &ComplexField) -> Result<(ComplexField, ComplexField)> {
        image.expect_domain(Domain::Image)?;
        let (w, h) = image.dims();
        let (rf_h, rf_w) = self.receptive_field();
        if w < rf_w || h < rf_h {
            return Err(dimension(format!(
                "{w}x{h} image is smaller than the {rf_w}x{rf_h} receptive field"
            )));
        }
        let out = self.net.forward(&to_channels(image), h, w);
        Ok(from_channels(&out, w, h))
    }
}

/// Planar `[re..., im...]` single-precision channels.
pub(crate) fn to_channels(field: &ComplexField) -> Vec<f32> {
    let n = field.len();
    let mut x = vec![0f32; 2 * n];
    for (i, c) in field.samples().iter().enumerate() {
        x[i] = c.re as f32;
        x[n + i] = c.im as f32;
    }
    x
}

pub(crate) fn from_channels(out: &[f32], w: usize, h: usize) -> (ComplexField, ComplexField) {
    let n = w * h;
    let head = |offset: usize| {
        let samples = (0..n)
            .map(|i| Complex64::new(out[offset + i] as f64, out[offset + n + i] as f64))
            .collect();
        ComplexField::from_samples(w, h, Domain::Image, samples).expect("network output is finite")
    };
    (head(0), head(2 * n))
}

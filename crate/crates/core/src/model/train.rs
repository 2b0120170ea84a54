use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::ConvNet;
use super::synth::{CorpusSource, TrainSample};
use super::{to_channels, DenoiseModel};
use crate::error::{parameter, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Optimizer steps. Each step consumes `batch_size` fresh samples, so
    /// training makes a single pass over `iterations * batch_size` samples.
    pub iterations: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            iterations: 1000,
            batch_size: 4,
        }
    }
}

pub trait SampleSource: Sync {
    /// The `index`-th training sample; must be a pure function of `index`.
    fn sample(&self, index: u64) -> Result<TrainSample>;
}

impl SampleSource for CorpusSource {
    fn sample(&self, index: u64) -> Result<TrainSample> {
        CorpusSource::sample(self, index)
    }
}

impl<F> SampleSource for F
where
    F: Fn(u64) -> Result<TrainSample> + Sync,
{
    fn sample(&self, index: u64) -> Result<TrainSample> {
        self(index)
    }
}

/// ADAM with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig, net: &ConvNet<f32>) -> Self {
        let zeros: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, net: &mut ConvNet<f32>, grads: &[Vec<f64>]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[li], &mut self.v[li]);
            for (i, w) in layer.weights.iter_mut().enumerate() {
                let g = grads[li][i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let step = self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.epsilon);
                *w = (*w as f64 - step) as f32;
            }
        }
    }
}

/// Mean absolute error over every output channel and its gradient.
pub fn mae_loss_and_grad(pred: &[f32], target: &[f32]) -> (f64, Vec<f32>) {
    let n = pred.len() as f64;
    let scale = (1.0 / n) as f32;
    let mut loss = 0.0f64;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            loss += d.abs() as f64;
            if d > 0.0 {
                scale
            } else if d < 0.0 {
                -scale
            } else {
                0.0
            }
        })
        .collect();
    (loss / n, grad)
}

/// Network input and stacked `[ring, noise]` target, divided by a per-sample
/// scale (the RMS of the noise target, else of the clean image). The network
/// is homogeneous, so this only equalizes sample weights in the loss.
fn normalized_pair(sample: &TrainSample) -> (Vec<f32>, Vec<f32>) {
    let rms = |f: &crate::field::ComplexField| (f.energy() / f.len() as f64).sqrt();
    let scale = [rms(&sample.target_noise), rms(&sample.clean), 1.0]
        .into_iter()
        .find(|s| *s > 1e-12)
        .unwrap();
    let inv = 1.0 / scale;
    let input = to_channels(&sample.input.scale(inv));
    let mut target = to_channels(&sample.target_ring.scale(inv));
    target.extend(to_channels(&sample.target_noise.scale(inv)));
    (input, target)
}

fn sample_gradient(net: &ConvNet<f32>, sample: &TrainSample) -> (f64, Vec<Vec<f64>>) {
    let (w, h) = sample.input.dims();
    let (input, target) = normalized_pair(sample);
    let cache = net.forward_cached(&input, h, w);
    let (loss, grad_out) = mae_loss_and_grad(cache.output(), &target);
    let mut grads = net.zero_grads();
    net.backward(&cache, &grad_out, &mut grads);
    (loss, grads.into_iter().map(|g| g.into_iter().map(f64::from).collect()).collect())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DenoiseModel,
    /// Mean batch loss per optimizer step.
    pub loss_trace: Vec<f64>,
}

/// Trains with ADAM on the mean absolute error of both residual heads.
/// Batch gradients are reduced in sample order, so results do not depend on
/// the number of worker threads.
pub fn train(model: &DenoiseModel, source: &impl SampleSource, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.batch_size == 0 {
        return Err(parameter("batch size must be positive"));
    }
    if !(cfg.learning_rate >= 0.0) || !(cfg.epsilon > 0.0) {
        return Err(parameter("learning rate must be >= 0 and epsilon > 0"));
    }
    let mut model = model.clone();
    let mut adam = Adam::new(cfg, &model.net);
    let mut trace = Vec::with_capacity(cfg.iterations);

    for step in 0..cfg.iterations {
        let first = (step * cfg.batch_size) as u64;
        let net = &model.net;
        let results: Vec<(f64, Vec<Vec<f64>>)> = (0..cfg.batch_size as u64)
            .into_par_iter()
            .map(|i| source.sample(first + i).map(|s| sample_gradient(net, &s)))
            .collect::<Result<_>>()?;

        let inv = 1.0 / cfg.batch_size as f64;
        let mut grads: Vec<Vec<f64>> = model.net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
        let mut loss = 0.0;
        for (l, g) in &results {
            loss += l * inv;
            for (acc, layer) in grads.iter_mut().zip(g) {
                for (a, v) in acc.iter_mut().zip(layer) {
                    *a += v * inv;
                }
            }
        }
        if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged { step, loss });
        }
        trace.push(loss);
        if cfg.learning_rate > 0.0 {
            adam.update(&mut model.net, &grads);
        }
    }
    Ok(TrainOutcome { model, loss_trace: trace })
}

/// Loss trace as CSV with a `step,loss` header.
pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "step,loss")?;
    for (i, l) in trace.iter().enumerate() {
        writeln!(out, "{i},{l}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::net::Architecture;
    use crate::model::synth::synthesize_training_pair;
    use crate::model::random_clean_image;
    use crate::noise::SeededGaussian;

    fn tiny() -> DenoiseModel {
        DenoiseModel::new(Architecture { depth: 3, hidden_channels: 8, ..Default::default() }, 3)
    }

    fn fixed_sample() -> TrainSample {
        let mut rng = SeededGaussian::new(10);
        synthesize_training_pair(&random_clean_image(24, 24, &mut rng), 0.5, 0.05, 4).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let sample = fixed_sample();
        let source = |_: u64| Ok(sample.clone());
        let cfg = TrainConfig { learning_rate: 0.0, iterations: 5, batch_size: 2, ..Default::default() };
        let out = train(&tiny(), &source, &cfg).unwrap();
        assert_eq!(out.model, tiny());
        assert_eq!(out.loss_trace.len(), 5);
    }

    #[test]
    fn overfits_a_single_sample() {
        let sample = fixed_sample();
        let source = |_: u64| Ok(sample.clone());
        let cfg = TrainConfig { iterations: 500, batch_size: 1, learning_rate: 1e-3, ..Default::default() };
        let out = train(&DenoiseModel::new(Architecture::default(), 3), &source, &cfg).unwrap();
        let first = out.loss_trace[0];
        let last = *out.loss_trace.last().unwrap();
        assert!(last < 0.1 * first, "loss {first} -> {last}");
        // Monotone after warm-up on a smoothed trace.
        let smooth: Vec<f64> = out.loss_trace.chunks(50).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        for w in smooth[1..].windows(2) {
            assert!(w[1] <= w[0] * 1.05, "{smooth:?}");
        }
    }

    #[test]
    fn training_is_reproducible() {
        let corpus = CorpusSource { patch_size: 24, ..Default::default() };
        let cfg = TrainConfig { iterations: 4, batch_size: 2, ..Default::default() };
        let a = train(&tiny(), &corpus, &cfg).unwrap();
        let b = train(&tiny(), &corpus, &cfg).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn nan_loss_reports_step() {
        let mut sample = fixed_sample();
        sample.target_noise.samples_mut()[0].re = f64::NAN;
        let source = move |_: u64| Ok(sample.clone());
        let cfg = TrainConfig { iterations: 3, batch_size: 1, ..Default::default() };
        assert!(matches!(train(&tiny(), &source, &cfg), Err(Error::TrainingDiverged { step: 0, .. })));
    }

    #[test]
    fn loss_trace_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        write_loss_trace(&path, &[1.5, 0.25]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "step,loss\n0,1.5\n1,0.25\n");
    }
}

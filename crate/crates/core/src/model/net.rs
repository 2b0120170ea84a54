//! Bias-free, fully convolutional network with ReLU hidden layers.
//!
//! Activations are channel-major `[channel][row][column]`. Each layer is a
//! stride-1 "same" convolution with zero padding, computed as im2col followed
//! by a matrix product. There are no bias terms and no normalization, so the
//! network is positively homogeneous: `f(a x) = a f(x)` for `a >= 0`.

use std::fmt::Debug;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::noise::SeededGaussian;

pub trait Scalar: Float + Send + Sync + Debug + Default + 'static {
    /// `c = alpha * a * b + beta * c` with explicit row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize, k: usize, n: usize,
        alpha: Self,
        a: &[Self], rsa: isize, csa: isize,
        b: &[Self], rsb: isize, csb: isize,
        beta: Self,
        c: &mut [Self], rsc: isize, csc: isize,
    );
}

macro_rules! impl_scalar {
    ($t:ty, $f:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize, k: usize, n: usize,
                alpha: Self,
                a: &[Self], rsa: isize, csa: isize,
                b: &[Self], rsb: isize, csb: isize,
                beta: Self,
                c: &mut [Self], rsc: isize, csc: isize,
            ) {
                let extent = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    if rows == 0 || cols == 0 {
                        0
                    } else {
                        ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
                    }
                };
                assert!(a.len() >= extent(m, k, rsa, csa));
                assert!(b.len() >= extent(k, n, rsb, csb));
                assert!(c.len() >= extent(m, n, rsc, csc));
                // SAFETY: the asserts above keep every strided access in bounds.
                unsafe {
                    $f(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc)
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerShape {
    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_h * self.kernel_w
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub shape: LayerShape,
    /// `[out][in][ky][kx]`.
    pub weights: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub depth: usize,
    pub kernel: usize,
    pub hidden_channels: usize,
    pub input_channels: usize,
    pub output_channels: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { depth: 8, kernel: 3, hidden_channels: 32, input_channels: 2, output_channels: 4 }
    }
}

impl Architecture {
    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        (0..self.depth)
            .map(|i| LayerShape {
                kernel_h: self.kernel,
                kernel_w: self.kernel,
                in_channels: if i == 0 { self.input_channels } else { self.hidden_channels },
                out_channels: if i + 1 == self.depth { self.output_channels } else { self.hidden_channels },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet<T> {
    pub layers: Vec<ConvLayer<T>>,
}

/// Per-layer values kept by the training forward pass.
pub struct ForwardCache<T> {
    cols: Vec<Vec<T>>,
    outputs: Vec<Vec<T>>,
    height: usize,
    width: usize,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.outputs.last().expect("network has layers")
    }
}

impl<T: Scalar> ConvNet<T> {
    /// Zero-mean uniform initialization with bound `sqrt(6 / fan_in)` on
    /// hidden layers and `sqrt(0.03 / fan_in)` on the linear output layer, so
    /// the untrained network starts close to zero residuals.
    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let mut rng = SeededGaussian::new(seed);
        let shapes = arch.layer_shapes();
        let last = shapes.len() - 1;
        let layers = shapes
            .into_iter()
            .enumerate()
            .map(|(i, shape)| {
                let gain = if i == last { 0.03 } else { 6.0 };
                let bound = (gain / shape.patch_len() as f64).sqrt();
                let weights = (0..shape.weight_count())
                    .map(|_| T::from(rng.uniform_range(-bound, bound)).unwrap())
                    .collect();
                ConvLayer { shape, weights }
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<ConvLayer<T>>) -> Self {
        Self { layers }
    }

    pub fn input_channels(&self) -> usize {
        self.layers[0].shape.in_channels
    }

    pub fn output_channels(&self) -> usize {
        self.layers.last().unwrap().shape.out_channels
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    /// Receptive field `(height, width)` in pixels.
    pub fn receptive_field(&self) -> (usize, usize) {
        let h = 1 + self.layers.iter().map(|l| l.shape.kernel_h - 1).sum::<usize>();
        let w = 1 + self.layers.iter().map(|l| l.shape.kernel_w - 1).sum::<usize>();
        (h, w)
    }

    pub fn cast<U: Scalar>(&self) -> ConvNet<U> {
        ConvNet {
            layers: self
                .layers
                .iter()
                .map(|l| ConvLayer {
                    shape: l.shape,
                    weights: l.weights.iter().map(|&w| U::from(w).unwrap()).collect(),
                })
                .collect(),
        }
    }

    /// Inference pass; `input` is `[in_channels][height][width]`.
    pub fn forward(&self, input: &[T], height: usize, width: usize) -> Vec<T> {
        let mut x = input.to_vec();
        let mut cols = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            im2col(&x, layer.shape, height, width, &mut cols);
            x = conv_from_cols(layer, &cols, height * width);
            if i != last {
                relu(&mut x);
            }
        }
        x
    }

    pub fn forward_cached(&self, input: &[T], height: usize, width: usize) -> ForwardCache<T> {
        let mut cache = ForwardCache { cols: Vec::new(), outputs: Vec::new(), height, width };
        let last = self.layers.len() - 1;
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut cols = Vec::new();
            im2col(&x, layer.shape, height, width, &mut cols);
            x = conv_from_cols(layer, &cols, height * width);
            if i != last {
                relu(&mut x);
            }
            cache.cols.push(cols);
            cache.outputs.push(x.clone());
        }
        cache
    }

    /// Accumulates weight gradients into `grads` (one vector per layer) given
    /// the loss gradient with respect to the network output.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: &[T], grads: &mut [Vec<T>]) {
        let (h, w) = (cache.height, cache.width);
        let hw = h * w;
        let mut grad = grad_output.to_vec();
        let last = self.layers.len() - 1;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let shape = layer.shape;
            if i != last {
                // ReLU derivative from the post-activation values.
                for (g, &o) in grad.iter_mut().zip(&cache.outputs[i]) {
                    if o <= T::zero() {
                        *g = T::zero();
                    }
                }
            }
            let cols = &cache.cols[i];
            let k = shape.patch_len();
            // dW[out, k] += dY[out, hw] * cols^T[hw, k]
            T::gemm(
                shape.out_channels, hw, k,
                T::one(),
                &grad, hw as isize, 1,
                cols, 1, hw as isize,
                T::one(),
                &mut grads[i], k as isize, 1,
            );
            if i > 0 {
                // dCols[k, hw] = W^T[k, out] * dY[out, hw]
                let mut dcols = vec![T::zero(); k * hw];
                T::gemm(
                    k, shape.out_channels, hw,
                    T::one(),
                    &layer.weights, 1, k as isize,
                    &grad, hw as isize, 1,
                    T::zero(),
                    &mut dcols, hw as isize, 1,
                );
                grad = col2im(&dcols, shape, h, w);
            }
        }
    }

    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect()
    }
}

fn relu<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

fn conv_from_cols<T: Scalar>(layer: &ConvLayer<T>, cols: &[T], hw: usize) -> Vec<T> {
    let shape = layer.shape;
    let k = shape.patch_len();
    let mut out = vec![T::zero(); shape.out_channels * hw];
    T::gemm(
        shape.out_channels, k, hw,
        T::one(),
        &layer.weights, k as isize, 1,
        cols, hw as isize, 1,
        T::zero(),
        &mut out, hw as isize, 1,
    );
    out
}

fn im2col<T: Scalar>(x: &[T], shape: LayerShape, h: usize, w: usize, cols: &mut Vec<T>) {
    let (kh, kw) = (shape.kernel_h, shape.kernel_w);
    let (ph, pw) = (kh / 2, kw / 2);
    let hw = h * w;
    cols.clear();
    cols.resize(shape.patch_len() * hw, T::zero());
    for c in 0..shape.in_channels {
        let plane = &x[c * hw..(c + 1) * hw];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (c * kh + ky) * kw + kx;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                // Output columns whose source column sx = x + kx - pw is valid.
                let x_lo = pw.saturating_sub(kx);
                let x_hi = (w + pw).saturating_sub(kx).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - ph as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src_row = sy as usize * w;
                    let sx_lo = x_lo + kx - pw;
                    dst[y * w + x_lo..y * w + x_hi]
                        .copy_from_slice(&plane[src_row + sx_lo..src_row + sx_lo + (x_hi - x_lo)]);
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], shape: LayerShape, h: usize, w: usize) -> Vec<T> {
    let (kh, kw) = (shape.kernel_h, shape.kernel_w);
    let (ph, pw) = (kh / 2, kw / 2);
    let hw = h * w;
    let mut x = vec![T::zero(); shape.in_channels * hw];
    for c in 0..shape.in_channels {
        let plane = &mut x[c * hw..(c + 1) * hw];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (c * kh + ky) * kw + kx;
                let src = &cols[row * hw..(row + 1) * hw];
                let x_lo = pw.saturating_sub(kx);
                let x_hi = (w + pw).saturating_sub(kx).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - ph as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst_row = sy as usize * w + x_lo + kx - pw;
                    for (d, &s) in plane[dst_row..dst_row + (x_hi - x_lo)]
                        .iter_mut()
                        .zip(&src[y * w + x_lo..y * w + x_hi])
                    {
                        *d = *d + s;
                    }
                }
            }
        }
    }
    x
}

//! Unitary, DC-centered two-dimensional Fourier transforms.
//!
//! Both directions scale by `1/sqrt(width * height)` so that energy is
//! preserved. K-space is stored with the zero frequency at `floor(n / 2)`;
//! image space keeps its origin at index 0.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::Result;
use crate::field::{ComplexField, Domain};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward_fft(field: &ComplexField) -> Result<ComplexField> {
    field.expect_domain(Domain::Image)?;
    let (w, h) = field.dims();
    let mut data = field.samples().to_vec();
    transform_2d(&mut data, w, h, FftDirection::Forward);
    Ok(ComplexField::from_fn(w, h, Domain::KSpace, |kx, ky| {
        data[unshift(ky, h) * w + unshift(kx, w)]
    }))
}

pub fn inverse_fft(field: &ComplexField) -> Result<ComplexField> {
    field.expect_domain(Domain::KSpace)?;
    let (w, h) = field.dims();
    let mut data = vec![Complex64::default(); w * h];
    for ky in 0..h {
        for kx in 0..w {
            data[unshift(ky, h) * w + unshift(kx, w)] = field.get(kx, ky);
        }
    }
    transform_2d(&mut data, w, h, FftDirection::Inverse);
    Ok(ComplexField::from_samples(w, h, Domain::Image, data)
        .expect("transform of a finite field is finite"))
}

/// Index of the centered bin `k` in natural FFT order.
#[inline]
fn unshift(k: usize, n: usize) -> usize {
    (k + n - n / 2) % n
}

fn transform_2d(data: &mut [Complex64], w: usize, h: usize, direction: FftDirection) {
    let (row_fft, col_fft) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft(w, direction), p.plan_fft(h, direction))
    });
    row_fft.process(data);

    let mut column = vec![Complex64::default(); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }

    let norm = 1.0 / ((w * h) as f64).sqrt();
    data.iter_mut().for_each(|c| *c *= norm);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::SeededGaussian;
    use crate::Error;

    fn random_field(w: usize, h: usize, seed: u64) -> ComplexField {
        let mut g = SeededGaussian::new(seed);
        ComplexField::from_fn(w, h, Domain::Image, |_, _| Complex64::new(g.next(), g.next()))
    }

    fn rel_err(a: &ComplexField, b: &ComplexField) -> f64 {
        let diff: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm_sqr()).sum();
        (diff / b.energy().max(1e-300)).sqrt()
    }

    /// Direct O(N^2) DFT with the same centering and scaling.
    fn direct_dft(field: &ComplexField) -> ComplexField {
        let (w, h) = field.dims();
        let norm = 1.0 / ((w * h) as f64).sqrt();
        ComplexField::from_fn(w, h, Domain::KSpace, |kx, ky| {
            let fx = kx as f64 - (w / 2) as f64;
            let fy = ky as f64 - (h / 2) as f64;
            let mut acc = Complex64::default();
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0 * std::f64::consts::PI
                        * (fx * x as f64 / w as f64 + fy * y as f64 / h as f64);
                    acc += field.get(x, y) * Complex64::from_polar(1.0, phase);
                }
            }
            acc * norm
        })
    }

    #[test]
    fn matches_direct_dft_for_odd_and_even_sizes() {
        for &(w, h) in &[(5, 4), (8, 8), (7, 3), (1, 6)] {
            let f = random_field(w, h, 11);
            let fast = forward_fft(&f).unwrap();
            assert!(rel_err(&fast, &direct_dft(&f)) < 1e-12, "{w}x{h}");
        }
    }

    #[test]
    fn central_impulse_gives_flat_spectrum() {
        let n = 16;
        let mut f = ComplexField::zeros(n, n, Domain::Image);
        f.set(n / 2, n / 2, Complex64::new(1.0, 0.0));
        let k = forward_fft(&f).unwrap();
        for c in k.samples() {
            assert!((c.norm() - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_spectrum_gives_impulse_at_origin() {
        let n = 9;
        let k = ComplexField::from_fn(n, n, Domain::KSpace, |_, _| Complex64::new(1.0 / n as f64, 0.0));
        let img = inverse_fft(&k).unwrap();
        for y in 0..n {
            for x in 0..n {
                let expected = if x == 0 && y == 0 { 1.0 } else { 0.0 };
                assert!((img.get(x, y) - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn roundtrip_and_parseval() {
        let f = random_field(32, 32, 3);
        let k = forward_fft(&f).unwrap();
        assert!(((k.energy() - f.energy()) / f.energy()).abs() < 1e-6);
        assert!(rel_err(&inverse_fft(&k).unwrap(), &f) < 1e-6);
    }

    #[test]
    fn inverse_is_linear() {
        let a = forward_fft(&random_field(12, 10, 1)).unwrap();
        let b = forward_fft(&random_field(12, 10, 2)).unwrap();
        let (alpha, beta) = (Complex64::new(0.7, -1.3), Complex64::new(-2.0, 0.25));
        let combo = a.zip_map(&b, |x, y| alpha * x + beta * y).unwrap();
        let lhs = inverse_fft(&combo).unwrap();
        let ia = inverse_fft(&a).unwrap();
        let ib = inverse_fft(&b).unwrap();
        let rhs = ia.zip_map(&ib, |x, y| alpha * x + beta * y).unwrap();
        assert!(rel_err(&lhs, &rhs) < 1e-6);
    }

    #[test]
    fn wrong_domain_is_rejected() {
        let f = ComplexField::zeros(4, 4, Domain::KSpace);
        assert!(matches!(forward_fft(&f), Err(Error::DomainMismatch { .. })));
        let f = ComplexField::zeros(4, 4, Domain::Image);
        assert!(matches!(inverse_fft(&f), Err(Error::DomainMismatch { .. })));
    }
}

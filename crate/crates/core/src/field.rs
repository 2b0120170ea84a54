//! Two-dimensional complex fields shared by every stage of the pipeline.
//!
//! Samples are stored row-major. A field carries a [`Domain`] tag; k-space
//! fields are stored DC-centered, with the zero frequency at index
//! `floor(n / 2)` along each axis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dimension, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Image,
    KSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    width: usize,
    height: usize,
    domain: Domain,
    samples: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(width: usize, height: usize, domain: Domain) -> Self {
        assert!(width > 0 && height > 0, "field dimensions must be positive");
        Self {
            width,
            height,
            domain,
            samples: vec![Complex64::new(0.0, 0.0); width * height],
        }
    }

    /// Builds a field from row-major samples, validating size and finiteness.
    pub fn from_samples(
        width: usize,
        height: usize,
        domain: Domain,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(dimension("field dimensions must be positive"));
        }
        if samples.len() != width * height {
            return Err(dimension(format!(
                "{}x{} field needs {} samples, got {}",
                width,
                height,
                width * height,
                samples.len()
            )));
        }
        if samples.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Parameter("field contains non-finite samples".into()));
        }
        Ok(Self { width, height, domain, samples })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        domain: Domain,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut field = Self::zeros(width, height, domain);
        for y in 0..height {
            for x in 0..width {
                field.samples[y * width + x] = f(x, y);
            }
        }
        field
    }

    pub fn from_real(image: &RealImage, domain: Domain) -> Self {
        Self {
            width: image.width,
            height: image.height,
            domain,
            samples: image.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Complex64) {
        self.samples[y * self.width + x] = value;
    }

    pub fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain == expected {
            Ok(())
        } else {
            Err(Error::DomainMismatch { expected, found: self.domain })
        }
    }

    pub fn ensure_same_shape(&self, other: &ComplexField) -> Result<()> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(dimension(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn magnitude(&self) -> RealImage {
        RealImage {
            width: self.width,
            height: self.height,
            data: self.samples.iter().map(|c| c.norm()).collect(),
        }
    }

    pub fn real_part(&self) -> RealImage {
        RealImage {
            width: self.width,
            height: self.height,
            data: self.samples.iter().map(|c| c.re).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> ComplexField {
        self.map(|c| c * factor)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexField {
        ComplexField {
            width: self.width,
            height: self.height,
            domain: self.domain,
            samples: self.samples.iter().map(|&c| f(c)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &ComplexField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<ComplexField> {
        self.ensure_same_shape(other)?;
        Ok(ComplexField {
            width: self.width,
            height: self.height,
            domain: self.domain,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<ComplexField> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(dimension(format!(
                "crop {}x{}+{}+{} exceeds {}x{} field",
                w, h, x0, y0, self.width, self.height
            )));
        }
        Ok(ComplexField::from_fn(w, h, self.domain, |x, y| self.get(x0 + x, y0 + y)))
    }
}

/// Real-valued image, used for magnitude views and measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl RealImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(dimension(format!(
                "{}x{} image cannot hold {} values",
                width,
                height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn scale(&self, factor: f64) -> RealImage {
        RealImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self { x, y, width, height }
    }

    /// `size`x`size` square centered the same way a square object of that
    /// size is centered: top-left at `floor((n - size) / 2)`.
    pub fn centered(grid_w: usize, grid_h: usize, size_w: usize, size_h: usize) -> Self {
        Self {
            x: grid_w.saturating_sub(size_w) / 2,
            y: grid_h.saturating_sub(size_h) / 2,
            width: size_w,
            height: size_h,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        if self.is_empty() || self.x + self.width > width || self.y + self.height > height {
            return Err(dimension(format!(
                "roi {}x{}+{}+{} does not fit a {}x{} image",
                self.width, self.height, self.x, self.y, width, height
            )));
        }
        Ok(())
    }

    /// Row-major pixel coordinates inside the roi.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y..self.y + self.height)
            .flat_map(move |y| (self.x..self.x + self.width).map(move |x| (x, y)))
    }

    pub fn extract(&self, image: &RealImage) -> Result<Vec<f64>> {
        self.check_within(image.width, image.height)?;
        Ok(self.pixels().map(|(x, y)| image.get(x, y)).collect())
    }
}

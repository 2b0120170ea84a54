use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dro::GroundTruthMap;
use crate::error::{dimension, parameter, Error, Result};
use crate::field::{ComplexField, Domain, RealImage, Roi};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrMeasurement {
    /// Mean of the first image over the ROI.
    pub signal: f64,
    /// Standard deviation of the pairwise difference over the ROI.
    pub sigma: f64,
    pub snr: f64,
    pub roi: Roi,
    pub averages: usize,
}

/// Pair-difference SNR: `S / (sigma / sqrt(2))` with `S` taken from `img1`.
pub fn snr_pair(img1: &RealImage, img2: &RealImage, roi: Roi) -> Result<SnrMeasurement> {
    if img1.dims() != img2.dims() {
        return Err(dimension(format!("image dims {:?} vs {:?}", img1.dims(), img2.dims())));
    }
    if roi.len() < 2 {
        return Err(dimension("SNR ROI needs at least two pixels"));
    }
    let a = roi.extract(img1)?;
    let b = roi.extract(img2)?;
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let sigma = sample_std(&diff);
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("difference image has zero variance in the ROI".into()));
    }
    let signal = mean(&a);
    Ok(SnrMeasurement { signal, sigma, snr: signal / (sigma / 2f64.sqrt()), roi, averages: 1 })
}

/// Pixelwise mean of equally sized images.
pub fn mean_image(images: &[RealImage]) -> Result<RealImage> {
    let first = images.first().ok_or_else(|| parameter("no images to average"))?;
    let mut data = vec![0.0; first.data.len()];
    for img in images {
        if img.dims() != first.dims() {
            return Err(dimension("images to average differ in size"));
        }
        for (d, v) in data.iter_mut().zip(&img.data) {
            *d += v;
        }
    }
    let n = images.len() as f64;
    RealImage::new(first.width, first.height, data.into_iter().map(|v| v / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqrtLawFit {
    pub alpha: f64,
    pub rms_residual: f64,
    pub r_squared: f64,
}

impl SqrtLawFit {
    pub fn predict(&self, averages: f64) -> f64 {
        self.alpha * averages.sqrt()
    }
}

fn r_squared(observed: &[f64], residuals: &[f64]) -> f64 {
    let m = mean(observed);
    let ss_tot: f64 = observed.iter().map(|y| (y - m).powi(2)).sum();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 { 1.0 } else { 0.0 }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Least-squares `snr = alpha * sqrt(n)` through `(n, snr)` points.
pub fn fit_sqrt_law(points: &[(f64, f64)]) -> Result<SqrtLawFit> {
    if points.is_empty() {
        return Err(parameter("no points to fit"));
    }
    if points.iter().any(|&(n, s)| !(n >= 1.0) || !s.is_finite()) {
        return Err(parameter("averages must be >= 1 and SNR finite"));
    }
    let alpha = points.iter().map(|(n, s)| s * n.sqrt()).sum::<f64>() / points.iter().map(|(n, _)| n).sum::<f64>();
    let residuals: Vec<f64> = points.iter().map(|(n, s)| s - alpha * n.sqrt()).collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / points.len() as f64).sqrt();
    let observed: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(SqrtLawFit { alpha, rms_residual: rms, r_squared: r_squared(&observed, &residuals) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub coefficient: f64,
    pub exponent: f64,
    /// Coefficient of determination of the fitted curve on the original scale.
    pub r_squared: f64,
}

/// `snr = c * n^p` by linear regression in log-log space.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(parameter("power-law fit needs two points"));
    }
    if points.iter().any(|&(n, s)| !(n > 0.0) || !(s > 0.0)) {
        return Err(parameter("power-law fit needs positive values"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all points share one abscissa".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let coefficient = (my - exponent * mx).exp();
    let observed: Vec<f64> = points.iter().map(|p| p.1).collect();
    let residuals: Vec<f64> = points.iter().map(|(n, s)| s - coefficient * n.powf(exponent)).collect();
    Ok(PowerLawFit { coefficient, exponent, r_squared: r_squared(&observed, &residuals) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileLine {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl ProfileLine {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

fn bilinear(img: &RealImage, x: f64, y: f64) -> Result<f64> {
    let (w, h) = img.dims();
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return Err(dimension(format!("profile point ({x}, {y}) outside {w}x{h} image")));
    }
    let (xf, yf) = (x.floor() as usize, y.floor() as usize);
    let (xc, yc) = ((xf + 1).min(w - 1), (yf + 1).min(h - 1));
    let (tx, ty) = (x - xf as f64, y - yf as f64);
    let top = img.get(xf, yf) * (1.0 - tx) + img.get(xc, yf) * tx;
    let bottom = img.get(xf, yc) * (1.0 - tx) + img.get(xc, yc) * tx;
    Ok(top * (1.0 - ty) + bottom * ty)
}

/// Bilinear samples at unit steps from the first endpoint toward the second.
pub fn sample_profile(img: &RealImage, line: ProfileLine) -> Result<Vec<f64>> {
    let (dx, dy) = (line.x1 - line.x0, line.y1 - line.y0);
    let len = dx.hypot(dy);
    if !(len >= 2.0) {
        return Err(parameter("profile line must be at least two pixels long"));
    }
    let (ux, uy) = (dx / len, dy / len);
    (0..=len.floor() as usize)
        .map(|t| bilinear(img, line.x0 + ux * t as f64, line.y0 + uy * t as f64))
        .collect()
}

/// Low and high plateau levels: means of the first and last quarter of the
/// profile, ordered.
fn plateaus(profile: &[f64]) -> (f64, f64) {
    let q = (profile.len() / 4).max(1);
    let a = mean(&profile[..q]);
    let b = mean(&profile[profile.len() - q..]);
    (a.min(b), a.max(b))
}

/// Largest excursion beyond either plateau as a fraction of the step height.
pub fn step_overshoot(profile: &[f64]) -> Result<f64> {
    if profile.len() < 4 {
        return Err(parameter("profile too short"));
    }
    let (lo, hi) = plateaus(profile);
    if !(hi - lo > 0.0) {
        return Err(Error::Degenerate("profile has no step".into()));
    }
    let max = profile.iter().cloned().fold(f64::MIN, f64::max);
    let min = profile.iter().cloned().fold(f64::MAX, f64::min);
    Ok(((max - hi).max(lo - min)).max(0.0) / (hi - lo))
}

/// Peak absolute central difference of a profile normalized to unit step
/// height.
pub fn normalized_peak_gradient(profile: &[f64]) -> Result<f64> {
    if profile.len() < 4 {
        return Err(parameter("profile too short"));
    }
    let (lo, hi) = plateaus(profile);
    let step = hi - lo;
    let scale = profile.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(step > 1e-12 * scale) {
        return Err(Error::Degenerate("profile has no step".into()));
    }
    let peak = profile.windows(3).map(|w| ((w[2] - w[0]) / 2.0).abs()).fold(0.0, f64::max);
    Ok(peak / step)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpnessResult {
    pub line: ProfileLine,
    pub peak_a: f64,
    pub peak_b: f64,
    /// `peak_a / peak_b`.
    pub ratio: f64,
}

/// Ratio of normalized peak edge gradients of `img_a` and `img_b` along the
/// same line.
pub fn edge_sharpness(img_a: &RealImage, img_b: &RealImage, line: ProfileLine) -> Result<SharpnessResult> {
    let peak_a = normalized_peak_gradient(&sample_profile(img_a, line)?)?;
    let peak_b = normalized_peak_gradient(&sample_profile(img_b, line)?)?;
    if !(peak_b > 0.0) {
        return Err(Error::Degenerate("flat reference profile".into()));
    }
    Ok(SharpnessResult { line, peak_a, peak_b, ratio: peak_a / peak_b })
}

/// Synthetic stand-in for a resolution phantom: a bright square with two
/// vertical and two horizontal edges, a bar pattern, and a flat interior.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionPhantom {
    pub image: ComplexField,
    pub edges: [ProfileLine; 4],
    pub flat_roi: Roi,
}

pub fn resolution_phantom(size: usize, intensity: f64) -> Result<ResolutionPhantom> {
    if size < 64 {
        return Err(dimension("resolution phantom needs at least 64 pixels"));
    }
    let (a, b) = (size / 4, 3 * size / 4);
    let bars = size / 16..size / 4 - 2;
    let image = ComplexField::from_fn(size, size, Domain::Image, |x, y| {
        let v = if (a..b).contains(&x) && (a..b).contains(&y) {
            intensity
        } else if bars.contains(&x) && bars.contains(&y) && (x / 2) % 2 == 0 {
            0.6 * intensity
        } else {
            0.0
        };
        Complex64::new(v, 0.0)
    });
    let half = (size / 10) as f64;
    let mid = (size / 2) as f64;
    let (ea, eb) = (a as f64 - 0.5, b as f64 - 0.5);
    let edges = [
        ProfileLine::new(ea - half, mid, ea + half, mid),
        ProfileLine::new(eb + half, mid, eb - half, mid),
        ProfileLine::new(mid, ea - half, mid, ea + half),
        ProfileLine::new(mid, eb + half, mid, eb - half),
    ];
    Ok(ResolutionPhantom { image, edges, flat_roi: Roi::centered(size, size, size / 4, size / 4) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionResponse {
    pub disk_id: usize,
    pub realization: usize,
    pub visible: bool,
}

pub fn read_responses(path: &Path) -> Result<Vec<DetectionResponse>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn write_responses(path: &Path, responses: &[DetectionResponse]) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(responses)?)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionCell {
    pub disk_id: usize,
    pub diameter: usize,
    pub cnr: f64,
    pub trials: usize,
    pub hits: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionTable {
    /// One cell per ground-truth disk, in disk-id order.
    pub cells: Vec<DetectionCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionDifference {
    pub disk_id: usize,
    pub diameter: usize,
    pub cnr: f64,
    pub probability_a: f64,
    pub probability_b: f64,
    /// `probability_a - probability_b`.
    pub difference: f64,
}

pub fn detection_probability(responses: &[DetectionResponse], truth: &GroundTruthMap) -> Result<DetectionTable> {
    let mut counts = vec![(0usize, 0usize); truth.disks.len()];
    for r in responses {
        truth.disk(r.disk_id)?;
        let c = &mut counts[r.disk_id];
        c.0 += 1;
        c.1 += usize::from(r.visible);
    }
    let cells = truth
        .disks
        .iter()
        .zip(counts)
        .map(|(d, (trials, hits))| DetectionCell {
            disk_id: d.id,
            diameter: d.diameter,
            cnr: d.cnr,
            trials,
            hits,
            probability: if trials == 0 { 0.0 } else { hits as f64 / trials as f64 },
        })
        .collect();
    Ok(DetectionTable { cells })
}

impl DetectionTable {
    pub fn difference(&self, other: &DetectionTable) -> Result<Vec<DetectionDifference>> {
        if self.cells.len() != other.cells.len()
            || self.cells.iter().zip(&other.cells).any(|(a, b)| a.disk_id != b.disk_id)
        {
            return Err(Error::Config("detection tables cover different disks".into()));
        }
        Ok(self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| DetectionDifference {
                disk_id: a.disk_id,
                diameter: a.diameter,
                cnr: a.cnr,
                probability_a: a.probability,
                probability_b: b.probability,
                difference: a.probability - b.probability,
            })
            .collect())
    }
}

/// Default z threshold of the matched-filter proxy.
pub const PROXY_THRESHOLD: f64 = 3.0;

/// Automated stand-in for a human reader (a proxy, not a reader study): a
/// disk is called visible when its mean exceeds the surrounding annulus mean
/// by `threshold` standard errors, the noise level being estimated from the
/// annulus.
pub fn matched_filter_responses(
    image: &RealImage,
    truth: &GroundTruthMap,
    realization: usize,
    threshold: f64,
) -> Result<Vec<DetectionResponse>> {
    if image.dims() != (truth.width, truth.height) {
        return Err(dimension("image does not match the ground-truth map"));
    }
    let limit = truth.cell_size as f64 / 2.0 - 0.5;
    truth
        .disks
        .iter()
        .map(|d| {
            let r = d.diameter as f64 / 2.0;
            let (inner, outer) = (r + 1.5, (r + 5.5).min(limit));
            let inside: Vec<f64> = d.pixels().iter().map(|&(x, y)| image.get(x, y)).collect();
            let span = outer.ceil() as i64;
            let mut ring = Vec::new();
            for dy in -span..=span {
                for dx in -span..=span {
                    let (x, y) = (d.cx.round() as i64 + dx, d.cy.round() as i64 + dy);
                    if x < 0 || y < 0 || x >= truth.width as i64 || y >= truth.height as i64 {
                        continue;
                    }
                    let dist = (x as f64 - d.cx).hypot(y as f64 - d.cy);
                    if dist >= inner && dist <= outer {
                        ring.push(image.get(x as usize, y as usize));
                    }
                }
            }
            if inside.is_empty() || ring.len() < 2 {
                return Err(Error::Degenerate(format!("disk {} has no usable neighbourhood", d.id)));
            }
            let sd = sample_std(&ring);
            let se = sd * (1.0 / inside.len() as f64 + 1.0 / ring.len() as f64).sqrt();
            let z = (mean(&inside) - mean(&ring)) / se;
            Ok(DetectionResponse { disk_id: d.id, realization, visible: z > threshold })
        })
        .collect()
}

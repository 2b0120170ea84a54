use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{RealImage, Roi};

/// First and second order statistics of the two observer classes.
#[derive(Debug, Clone)]
pub struct ClassStats {
    pub roi: Roi,
    pub mean_absent: DVector<f64>,
    pub mean_present: DVector<f64>,
    /// Pooled covariance; each class is centered on its own mean and the
    /// scatter is divided by `n_absent + n_present - 2`.
    pub covariance: DMatrix<f64>,
    pub n_absent: usize,
    pub n_present: usize,
}

impl ClassStats {
    pub fn mean_difference(&self) -> DVector<f64> {
        &self.mean_present - &self.mean_absent
    }

    pub fn dim(&self) -> usize {
        self.roi.len()
    }
}

/// Class statistics from ROI vectors (row-major over `roi`).
pub fn estimate_class_stats(absent: &[Vec<f64>], present: &[Vec<f64>], roi: Roi) -> Result<ClassStats> {
    if absent.len() < 2 || present.len() < 2 {
        return Err(Error::Statistics(format!(
            "need at least 2 samples per class, got {} absent and {} present",
            absent.len(),
            present.len()
        )));
    }
    let p = roi.len();
    if absent.iter().chain(present).any(|v| v.len() != p) {
        return Err(Error::Dimension(format!("sample vectors must have roi dimension {p}")));
    }

    let mean = |samples: &[Vec<f64>]| {
        let mut m = DVector::<f64>::zeros(p);
        for s in samples {
            for (acc, v) in m.iter_mut().zip(s) {
                *acc += v;
            }
        }
        m / samples.len() as f64
    };
    let mean_absent = mean(absent);
    let mean_present = mean(present);

    let n = absent.len() + present.len();
    let mut centered = DMatrix::<f64>::zeros(p, n);
    for (j, (s, m)) in absent
        .iter()
        .map(|s| (s, &mean_absent))
        .chain(present.iter().map(|s| (s, &mean_present)))
        .enumerate()
    {
        for i in 0..p {
            centered[(i, j)] = s[i] - m[i];
        }
    }
    let mut covariance = &centered * centered.transpose();
    covariance /= (n - 2) as f64;
    // Exact symmetry regardless of summation order.
    let covariance = (&covariance + covariance.transpose()) * 0.5;

    Ok(ClassStats {
        roi,
        mean_absent,
        mean_present,
        covariance,
        n_absent: absent.len(),
        n_present: present.len(),
    })
}

pub fn estimate_class_stats_images(absent: &[RealImage], present: &[RealImage], roi: Roi) -> Result<ClassStats> {
    let extract = |imgs: &[RealImage]| imgs.iter().map(|i| roi.extract(i)).collect::<Result<Vec<_>>>();
    estimate_class_stats(&extract(absent)?, &extract(present)?, roi)
}

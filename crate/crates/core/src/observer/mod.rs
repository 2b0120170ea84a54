//! Signal-known-exactly Hotelling model observer.
//!
//! Images are reduced to vectors over an analysis ROI; a template
//! `w ~ C^-1 (g1 - g0)` is fit with an L1-regularized ADMM solve, test
//! statistics are `w . g`, and detectability is summarized by ROC/AUC with
//! leave-one-group-out bootstrapping and paired t-tests.

mod admm;
mod bootstrap;
mod roc;
mod ske;
mod stats;
mod ttest;

use serde::{Deserialize, Serialize};

use crate::field::{ComplexField, RealImage};

pub use admm::{lasso_admm, lasso_objective, solve_template, AdmmSettings, AdmmSolution, ObserverTemplate};
pub use bootstrap::{bootstrap_auc, ObserverConfig, ObserverGroup};
pub use roc::{roc_auc, RocCurve};
pub use ske::{ske_groups, ske_roi, SkeProcessing};
pub use stats::{estimate_class_stats, estimate_class_stats_images, ClassStats};
pub use ttest::{paired_ttest, TTest};

/// Default analysis ROI side length.
pub const DEFAULT_ROI_SIZE: usize = 16;
pub const DEFAULT_LAMBDA_R: f64 = 1e-4;

/// Which real-valued view of a complex image the observer reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObserverChannel {
    /// Real component; linear in the data, used for real-valued objects.
    #[default]
    Real,
    Magnitude,
}

impl ObserverChannel {
    pub fn view(self, field: &ComplexField) -> RealImage {
        match self {
            ObserverChannel::Real => field.real_part(),
            ObserverChannel::Magnitude => field.magnitude(),
        }
    }
}

/// Hotelling test statistic `w . g` over the template's ROI.
pub fn test_statistic(template: &ObserverTemplate, image: &RealImage) -> crate::Result<f64> {
    let g = template.roi.extract(image)?;
    template.statistic(&g)
}

/// AUC of the ideal linear observer for a known signal in white Gaussian
/// noise with detectability `d_prime`: `Phi(d' / sqrt 2)`.
pub fn binormal_auc(d_prime: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().cdf(d_prime / std::f64::consts::SQRT_2)
}

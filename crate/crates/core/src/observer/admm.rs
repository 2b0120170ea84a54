use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stats::ClassStats;
use crate::error::{parameter, Error, Result};
use crate::field::Roi;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmSettings {
    /// Augmented-Lagrangian penalty. `None` picks twice the mean eigenvalue
    /// of `a'a`, large enough that the objective trace descends monotonically
    /// on ill-conditioned designs.
    pub rho: Option<f64>,
    pub max_iters: usize,
    /// Stop once primal plus dual residual norms fall below this value.
    pub tol: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self { rho: None, max_iters: 10_000, tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct AdmmSolution {
    /// Sparse iterate `z`.
    pub x: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Penalty actually used.
    pub rho: f64,
    /// Objective at `z` after every iteration.
    pub objective_trace: Vec<f64>,
}

/// `||a x - b||^2 + lambda ||x||_1`, exactly as the template objective is
/// written (no one-half on the quadratic term).
pub fn lasso_objective(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, x: &DVector<f64>) -> f64 {
    (a * x - b).norm_squared() + lambda * x.lp_norm(1)
}

fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// Scaled-form ADMM for `argmin ||a x - b||^2 + lambda ||x||_1`.
///
/// Halving the objective gives the usual lasso with penalty `lambda / 2`, so
/// the x-update solves `(a'a + rho I) x = a'b + rho (z - u)` with a cached
/// Cholesky factor and the z-update soft-thresholds at `lambda / (2 rho)`.
pub fn lasso_admm(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    settings: AdmmSettings,
) -> Result<AdmmSolution> {
    if !(lambda >= 0.0) {
        return Err(parameter(format!("regularization must be >= 0, got {lambda}")));
    }
    if let Some(rho) = settings.rho {
        if !(rho > 0.0) {
            return Err(parameter(format!("ADMM rho must be > 0, got {rho}")));
        }
    }
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!("design has {} rows but target has {}", a.nrows(), b.len())));
    }
    let n = a.ncols();
    let at = a.transpose();
    let atb = &at * b;
    let mut gram = &at * a;
    let rho = settings.rho.unwrap_or_else(|| {
        let mean_eig = gram.trace() / n.max(1) as f64;
        if mean_eig > 0.0 { 2.0 * mean_eig } else { 1.0 }
    });
    for i in 0..n {
        gram[(i, i)] += rho;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Statistics("ADMM system is not positive definite".into()))?;

    let kappa = lambda / (2.0 * rho);
    let mut z = DVector::<f64>::zeros(n);
    let mut u = DVector::<f64>::zeros(n);
    let mut trace = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..settings.max_iters {
        iterations += 1;
        let x = chol.solve(&(&atb + (&z - &u) * rho));
        let z_prev = z.clone();
        z = (&x + &u).map(|v| soft_threshold(v, kappa));
        u += &x - &z;

        primal = (&x - &z).norm();
        dual = rho * (&z - &z_prev).norm();
        trace.push(lasso_objective(a, b, lambda, &z));
        if primal + dual < settings.tol {
            converged = true;
            break;
        }
    }

    Ok(AdmmSolution { x: z, iterations, primal_residual: primal, dual_residual: dual, converged, rho, objective_trace: trace })
}

#[derive(Debug, Clone, Serialize)]
pub struct ObserverTemplate {
    pub roi: Roi,
    pub w: Vec<f64>,
    pub lambda_r: f64,
    pub rho: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// False when the solver stopped at `max_iters`.
    pub converged: bool,
}

impl ObserverTemplate {
    pub fn statistic(&self, g: &[f64]) -> Result<f64> {
        if g.len() != self.w.len() {
            return Err(Error::Dimension(format!("template has {} entries, image vector {}", self.w.len(), g.len())));
        }
        Ok(self.w.iter().zip(g).map(|(w, g)| w * g).sum())
    }
}

/// Sparse Hotelling template: `argmin_w ||C w - (g1 - g0)||^2 + lambda_r ||w||_1`.
pub fn solve_template(stats: &ClassStats, lambda_r: f64, settings: AdmmSettings) -> Result<ObserverTemplate> {
    let sol = lasso_admm(&stats.covariance, &stats.mean_difference(), lambda_r, settings)?;
    Ok(ObserverTemplate {
        roi: stats.roi,
        w: sol.x.iter().cloned().collect(),
        lambda_r,
        rho: sol.rho,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        converged: sol.converged,
    })
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::admm::{solve_template, AdmmSettings};
use super::roc::{roc_auc, RocCurve};
use super::stats::estimate_class_stats;
use crate::error::{Error, Result};
use crate::field::Roi;

/// One group of realizations, already reduced to ROI vectors.
#[derive(Debug, Clone, Default)]
pub struct ObserverGroup {
    pub absent: Vec<Vec<f64>>,
    pub present: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverConfig {
    pub roi: Roi,
    pub lambda_r: f64,
    pub admm: AdmmSettings,
}

/// Leave-one-group-out evaluation: for each fold the template is trained on
/// every other group and tested on the held-out one. The returned curve is
/// built from the pooled held-out statistics; per-fold AUCs and their mean
/// and sample standard deviation are attached.
pub fn bootstrap_auc(groups: &[ObserverGroup], cfg: &ObserverConfig) -> Result<RocCurve> {
    if groups.len() < 2 {
        return Err(Error::Statistics(format!("bootstrap needs at least 2 groups, got {}", groups.len())));
    }
    if groups.iter().any(|g| g.absent.is_empty() || g.present.is_empty()) {
        return Err(Error::Statistics("every group needs samples of both classes".into()));
    }

    let folds: Vec<(Vec<f64>, Vec<f64>)> = (0..groups.len())
        .into_par_iter()
        .map(|held_out| fold_statistics(groups, held_out, cfg))
        .collect::<Result<_>>()?;

    let fold_aucs = folds
        .iter()
        .map(|(p, a)| roc_auc(p, a).map(|r| r.auc))
        .collect::<Result<Vec<_>>>()?;
    let pooled_present: Vec<f64> = folds.iter().flat_map(|f| f.0.iter().cloned()).collect();
    let pooled_absent: Vec<f64> = folds.iter().flat_map(|f| f.1.iter().cloned()).collect();

    let mut curve = roc_auc(&pooled_present, &pooled_absent)?;
    let (mean, std) = mean_std(&fold_aucs);
    curve.fold_aucs = fold_aucs;
    curve.bootstrap_mean = Some(mean);
    curve.bootstrap_std = Some(std);
    Ok(curve)
}

/// Held-out test statistics `(present, absent)` for one fold.
fn fold_statistics(groups: &[ObserverGroup], held_out: usize, cfg: &ObserverConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let train = |class: fn(&ObserverGroup) -> &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        groups
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held_out)
            .flat_map(|(_, g)| class(g).iter().cloned())
            .collect()
    };
    let stats = estimate_class_stats(&train(|g| &g.absent), &train(|g| &g.present), cfg.roi)?;
    let template = solve_template(&stats, cfg.lambda_r, cfg.admm)?;
    let test = &groups[held_out];
    let score = |samples: &[Vec<f64>]| samples.iter().map(|g| template.statistic(g)).collect::<Result<Vec<_>>>();
    Ok((score(&test.present)?, score(&test.absent)?))
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

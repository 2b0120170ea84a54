use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` operating points from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub fold_aucs: Vec<f64>,
    pub bootstrap_mean: Option<f64>,
    pub bootstrap_std: Option<f64>,
}

impl RocCurve {
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

/// Mann-Whitney AUC (ties count one half) and the threshold-sweep curve.
pub fn roc_auc(present: &[f64], absent: &[f64]) -> Result<RocCurve> {
    if present.is_empty() || absent.is_empty() {
        return Err(Error::Statistics("ROC analysis needs scores for both classes".into()));
    }
    if present.iter().chain(absent).any(|v| !v.is_finite()) {
        return Err(Error::Statistics("non-finite test statistic".into()));
    }
    let (n1, n0) = (present.len() as f64, absent.len() as f64);

    // (score, is_present), highest score first.
    let mut scored: Vec<(f64, bool)> = present
        .iter()
        .map(|&s| (s, true))
        .chain(absent.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    // Rank sum of the present class, using midranks for ties (rank 1 = lowest).
    let total = scored.len();
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j < total && scored[j].0 == scored[i].0 {
            j += 1;
        }
        let tied_present = scored[i..j].iter().filter(|s| s.1).count();
        // Descending positions i..j map to ascending ranks total-j+1 ..= total-i.
        let midrank = ((total - j + 1) + (total - i)) as f64 / 2.0;
        rank_sum += midrank * tied_present as f64;
        tp += tied_present;
        fp += (j - i) - tied_present;
        points.push((fp as f64 / n0, tp as f64 / n1));
        i = j;
    }
    let u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    Ok(RocCurve {
        points,
        auc: u / (n1 * n0),
        fold_aucs: Vec::new(),
        bootstrap_mean: None,
        bootstrap_std: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::SeededGaussian;
    use proptest::prelude::*;

    /// O(n*m) pair counting.
    fn brute_auc(present: &[f64], absent: &[f64]) -> f64 {
        let mut s = 0.0;
        for p in present {
            for a in absent {
                s += if p > a { 1.0 } else if p == a { 0.5 } else { 0.0 };
            }
        }
        s / (present.len() * absent.len()) as f64
    }

    #[test]
    fn separated_and_identical() {
        assert_eq!(roc_auc(&[3.0, 4.0, 5.0], &[0.0, 1.0]).unwrap().auc, 1.0);
        let s = [0.3, 0.1, 0.9, 0.4, 0.4];
        assert_eq!(roc_auc(&s, &s).unwrap().auc, 0.5);
    }

    #[test]
    fn empty_is_error() {
        assert!(roc_auc(&[], &[1.0]).is_err());
        assert!(roc_auc(&[1.0], &[]).is_err());
    }

    #[test]
    fn binormal_oracle() {
        // d' = 3 / sqrt(1.41); AUC = Phi(d' / sqrt(2)) = 0.962988...
        let dprime = 3.0 / 1.41f64.sqrt();
        let mut g = SeededGaussian::new(12);
        let present: Vec<f64> = (0..4000).map(|_| dprime + g.next()).collect();
        let absent: Vec<f64> = (0..4000).map(|_| g.next()).collect();
        let auc = roc_auc(&present, &absent).unwrap().auc;
        assert!((auc - 0.9629887285373094).abs() < 0.006, "{auc}");
    }

    proptest! {
        #[test]
        fn matches_pair_counting_and_trapezoid(
            present in proptest::collection::vec(-5i32..5, 1..40),
            absent in proptest::collection::vec(-5i32..5, 1..40),
        ) {
            let p: Vec<f64> = present.iter().map(|&v| v as f64).collect();
            let a: Vec<f64> = absent.iter().map(|&v| v as f64).collect();
            let roc = roc_auc(&p, &a).unwrap();
            prop_assert!((roc.auc - brute_auc(&p, &a)).abs() < 1e-12);
            prop_assert!((roc.auc - roc.trapezoid_area()).abs() < 1e-9);
            prop_assert!(roc.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
            prop_assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
        }

        #[test]
        fn invariant_under_monotone_transform(
            present in proptest::collection::vec(-3.0f64..3.0, 1..30),
            absent in proptest::collection::vec(-3.0f64..3.0, 1..30),
        ) {
            let f = |v: &f64| (2.0 * v).exp() + 7.0;
            let base = roc_auc(&present, &absent).unwrap().auc;
            let p2: Vec<f64> = present.iter().map(f).collect();
            let a2: Vec<f64> = absent.iter().map(f).collect();
            prop_assert!((roc_auc(&p2, &a2).unwrap().auc - base).abs() < 1e-12);
        }
    }
}

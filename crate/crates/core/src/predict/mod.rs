//! Link probabilities, threshold classification and ROC analysis.

mod cv;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sigmoid;
use crate::network::AdjacencyView;

pub use cv::{run_cv, CvItem, CvMode, CvPlan, CvReport, Estimator, FoldOutcome, ViewCvSummary};

/// `P(y_ij = 1) = logistic(xi~ - |z_i - z_j|^2)` at posterior means.
pub fn link_probability(zi: &[f64], zj: &[f64], xi_tilde: f64) -> f64 {
    let sq: f64 = zi.iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum();
    sigmoid(xi_tilde - sq)
}

/// Which positions produced a probability matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbabilitySource {
    /// The view's own variational positions `z~_ik`.
    PerView,
    /// The fused positions `z_bar_i`.
    Fused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkProbabilityMatrix {
    pub view: usize,
    /// `N x N`; the diagonal is NaN.
    pub probs: DMatrix<f64>,
    pub source: ProbabilitySource,
}

impl LinkProbabilityMatrix {
    pub fn from_positions(
        view: usize,
        positions: &DMatrix<f64>,
        xi_tilde: f64,
        source: ProbabilitySource,
    ) -> Self {
        let n = positions.nrows();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| positions.row(i).iter().copied().collect())
            .collect();
        let probs = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                f64::NAN
            } else {
                link_probability(&rows[i], &rows[j], xi_tilde)
            }
        });
        LinkProbabilityMatrix {
            view,
            probs,
            source,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[(i, j)]
    }
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Median predicted probability over the observed links of `view` (each
/// undirected link counted once). Links are predicted when `p > tau`.
pub fn threshold_tau(probs: &LinkProbabilityMatrix, view: &AdjacencyView) -> Result<f64> {
    let values: Vec<f64> = view
        .observed_dyads()
        .filter(|&(i, j)| view.link(i, j))
        .map(|(i, j)| probs.get(i, j))
        .collect();
    median(values).ok_or(Error::NoObservedLinks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve over all distinct thresholds; tied scores move both rates at
/// once, so the trapezoid AUC equals the Mann-Whitney statistic with ties
/// counted one half.
pub fn roc_auc(scores: &[(f64, bool)]) -> Result<RocResult> {
    let positives = scores.iter().filter(|s| s.1).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut idx = 0;
    while idx < sorted.len() {
        let score = sorted[idx].0;
        let (prev_tp, prev_fp) = (tp, fp);
        while idx < sorted.len() && sorted[idx].0 == score {
            if sorted[idx].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        auc += (fp - prev_fp) as f64 * (tp + prev_tp) as f64 / 2.0;
        points.push((fp as f64 / n, tp as f64 / p));
    }
    Ok(RocResult {
        points,
        auc: auc / (p * n),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    pub false_negative: u64,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.true_positive += 1,
            (true, false) => self.false_positive += 1,
            (false, false) => self.true_negative += 1,
            (false, true) => self.false_negative += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    /// `(FP + FN) / total`; NaN when empty.
    pub fn misclassification(&self) -> f64 {
        (self.false_positive + self.false_negative) as f64 / self.total() as f64
    }

    pub fn add(&mut self, other: &Confusion) {
        self.true_positive += other.true_positive;
        self.false_positive += other.false_positive;
        self.true_negative += other.true_negative;
        self.false_negative += other.false_negative;
    }
}

/// In-sample ROC of a view against its own probability matrix, over every
/// observed dyad.
pub fn in_sample_roc(probs: &LinkProbabilityMatrix, view: &AdjacencyView) -> Result<RocResult> {
    let scores: Vec<(f64, bool)> = view
        .observed_dyads()
        .map(|(i, j)| (probs.get(i, j), view.link(i, j)))
        .collect();
    roc_auc(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn logistic_values() {
        assert_eq!(link_probability(&[0.3, 0.1], &[0.3, 0.1], 0.0), 0.5);
        let p = link_probability(&[0.0, 0.0], &[1.0, 0.0], -0.63);
        assert!((p - 1.0 / (1.0 + 1.63f64.exp())).abs() < 1e-15);
        assert!((p - 0.1638).abs() < 1e-4);
    }

    #[test]
    fn tau_is_link_median() {
        let view = AdjacencyView::from_edges(4, true, [(0, 1), (1, 2), (2, 3)], "t").unwrap();
        let mut probs = DMatrix::from_element(4, 4, 0.1);
        probs[(0, 1)] = 0.2;
        probs[(1, 2)] = 0.9;
        probs[(2, 3)] = 0.6;
        let m = LinkProbabilityMatrix {
            view: 0,
            probs,
            source: ProbabilitySource::PerView,
        };
        assert_eq!(threshold_tau(&m, &view).unwrap(), 0.6);
        let empty = AdjacencyView::empty(4, true, "e");
        assert!(matches!(
            threshold_tau(&m, &empty),
            Err(Error::NoObservedLinks)
        ));
    }

    #[test]
    fn roc_edge_cases() {
        let sep = [(0.9, true), (0.8, true), (0.3, false), (0.1, false)];
        assert_eq!(roc_auc(&sep).unwrap().auc, 1.0);
        let tied = [(0.5, true), (0.5, false), (0.5, false), (0.5, true)];
        let r = roc_auc(&tied).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(matches!(
            roc_auc(&[(0.2, true)]),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn confusion_rate() {
        let mut c = Confusion::default();
        for (p, a) in [
            (true, true),
            (true, false),
            (false, false),
            (false, true),
            (false, false),
        ] {
            c.record(p, a);
        }
        assert_eq!(c.total(), 5);
        assert!((c.misclassification() - 0.4).abs() < 1e-15);
    }

    fn pair_count_auc(scores: &[(f64, bool)]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for a in scores.iter().filter(|s| s.1) {
            for b in scores.iter().filter(|s| !s.1) {
                den += 1.0;
                num += if a.0 > b.0 {
                    1.0
                } else if a.0 == b.0 {
                    0.5
                } else {
                    0.0
                };
            }
        }
        num / den
    }

    proptest! {
        #[test]
        fn auc_equals_pair_counting(
            raw in prop::collection::vec((0u8..6, any::<bool>()), 2..40)
        ) {
            let scores: Vec<(f64, bool)> = raw.iter().map(|&(s, l)| (s as f64 / 5.0, l)).collect();
            prop_assume!(scores.iter().any(|s| s.1) && scores.iter().any(|s| !s.1));
            let r = roc_auc(&scores).unwrap();
            prop_assert!((r.auc - pair_count_auc(&scores)).abs() < 1e-12);
            prop_assert_eq!(*r.points.first().unwrap(), (0.0, 0.0));
            prop_assert_eq!(*r.points.last().unwrap(), (1.0, 1.0));
            for w in r.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            let shifted: Vec<_> = scores.iter().map(|&(s, l)| (s + 3.0, l)).collect();
            prop_assert_eq!(roc_auc(&shifted).unwrap(), r);
        }

        #[test]
        fn probability_monotone_and_symmetric(
            a in prop::collection::vec(-3.0f64..3.0, 2),
            b in prop::collection::vec(-3.0f64..3.0, 2),
            xi in -3.0f64..3.0,
        ) {
            let p = link_probability(&a, &b, xi);
            prop_assert_eq!(p, link_probability(&b, &a, xi));
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert!(link_probability(&a, &b, xi + 0.5) > p);
            let far: Vec<f64> = b.iter().zip(&a).map(|(bj, aj)| aj + 1.5 * (bj - aj) + 0.1).collect();
            let d_near: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            let d_far: f64 = a.iter().zip(&far).map(|(x, y)| (x - y).powi(2)).sum();
            if d_far > d_near {
                prop_assert!(link_probability(&a, &far, xi) < p);
            }
        }
    }
}

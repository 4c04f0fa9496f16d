//! K-fold cross-validation over dyads or nodes.
//!
//! Dyad mode holds the fold's dyads out of every view at once (ordered
//! dyads for directed views, unordered for undirected ones). Node mode is
//! joint-model only: the fold's nodes lose all their dyads in one view at a
//! time while their other views stay observed, so each fold is refitted `K`
//! times.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    roc_auc, threshold_tau, Confusion, LinkProbabilityMatrix, ProbabilitySource, RocResult,
};
use crate::error::{Error, Result};
use crate::lsjm::fit_lsjm;
use crate::lsm::{fit_lsm, FitConfig, PriorConfig};
use crate::network::{AdjacencyView, MultiplexNetwork};
use crate::rng::{derive_seed, substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvMode {
    Dyads,
    Nodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    SingleLsmPerView,
    Lsjm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CvItem {
    Dyad(usize, usize),
    Node(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub mode: CvMode,
    pub folds: usize,
    pub seed: u64,
    items: Vec<CvItem>,
    assignments: Vec<usize>,
}

impl CvPlan {
    /// Shuffles the items with the plan's seed and deals them round-robin
    /// into `folds` folds, so fold sizes differ by at most one.
    pub fn new(
        multiplex: &MultiplexNetwork,
        mode: CvMode,
        folds: usize,
        seed: u64,
    ) -> Result<Self> {
        let items: Vec<CvItem> = match mode {
            CvMode::Nodes => (0..multiplex.n()).map(CvItem::Node).collect(),
            CvMode::Dyads => {
                let directed = multiplex.view(0).is_directed();
                if multiplex
                    .views()
                    .iter()
                    .any(|v| v.is_directed() != directed)
                {
                    return Err(Error::InvalidPlan(
                        "dyad folds need all views to share directedness".into(),
                    ));
                }
                multiplex
                    .view(0)
                    .dyads()
                    .map(|(i, j)| CvItem::Dyad(i, j))
                    .collect()
            }
        };
        if folds < 2 || folds > items.len() {
            return Err(Error::InvalidPlan(format!(
                "{folds} folds for {} items",
                items.len()
            )));
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut substream(seed, Stream::CvPlan, 0));
        let mut assignments = vec![0; items.len()];
        for (pos, &item) in order.iter().enumerate() {
            assignments[item] = pos % folds;
        }
        Ok(CvPlan {
            mode,
            folds,
            seed,
            items,
            assignments,
        })
    }

    pub fn items(&self) -> &[CvItem] {
        &self.items
    }

    /// `(item, fold)` pairs in item order.
    pub fn assignments(&self) -> impl Iterator<Item = (CvItem, usize)> + '_ {
        self.items
            .iter()
            .copied()
            .zip(self.assignments.iter().copied())
    }

    pub fn fold_items(&self, fold: usize) -> impl Iterator<Item = CvItem> + '_ {
        self.assignments()
            .filter(move |&(_, f)| f == fold)
            .map(|(item, _)| item)
    }
}

/// Held-out predictions of one fold in one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub view: usize,
    pub tau: f64,
    pub confusion: Confusion,
    /// `(probability, truth)` for every held-out dyad.
    pub scores: Vec<(f64, bool)>,
    /// `None` when the held-out labels are all one class.
    pub auc: Option<f64>,
    /// Set when the refit failed; the fold then contributes nothing.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewCvSummary {
    pub view: usize,
    pub confusion: Confusion,
    pub misclassification: f64,
    /// ROC of the pooled held-out scores.
    pub roc: Option<RocResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mode: CvMode,
    pub estimator: Estimator,
    pub folds: Vec<FoldOutcome>,
    pub views: Vec<ViewCvSummary>,
}

impl CvReport {
    pub fn failed_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.failure.is_some()).count()
    }
}

fn score_view(
    fold: usize,
    k: usize,
    truth: &AdjacencyView,
    training: &AdjacencyView,
    probs: &LinkProbabilityMatrix,
    held_out: &[(usize, usize)],
) -> FoldOutcome {
    let tau = match threshold_tau(probs, training) {
        Ok(t) => t,
        Err(e) => return failed(fold, k, e.to_string()),
    };
    let mut confusion = Confusion::default();
    let scores: Vec<(f64, bool)> = held_out
        .iter()
        .map(|&(i, j)| {
            let p = probs.get(i, j);
            let y = truth.link(i, j);
            confusion.record(p > tau, y);
            (p, y)
        })
        .collect();
    FoldOutcome {
        fold,
        view: k,
        tau,
        confusion,
        auc: roc_auc(&scores).ok().map(|r| r.auc),
        scores,
        failure: None,
    }
}

fn failed(fold: usize, view: usize, reason: String) -> FoldOutcome {
    log::warn!("fold {fold} view {view} failed: {reason}");
    FoldOutcome {
        fold,
        view,
        tau: f64::NAN,
        confusion: Confusion::default(),
        scores: Vec::new(),
        auc: None,
        failure: Some(reason),
    }
}

fn dyad_fold(
    multiplex: &MultiplexNetwork,
    priors: &[PriorConfig],
    config: &FitConfig,
    plan: &CvPlan,
    estimator: Estimator,
    fold: usize,
) -> Vec<FoldOutcome> {
    let held_out: Vec<(usize, usize)> = plan
        .fold_items(fold)
        .filter_map(|item| match item {
            CvItem::Dyad(i, j) => Some((i, j)),
            CvItem::Node(_) => None,
        })
        .collect();
    let masked: Vec<AdjacencyView> = multiplex
        .views()
        .iter()
        .map(|v| {
            let mut m = v.clone();
            for &(i, j) in &held_out {
                m.mask_dyad(i, j);
            }
            m
        })
        .collect();
    let cfg = FitConfig {
        seed: derive_seed(config.seed, Stream::Fold, fold as u64),
        ..*config
    };
    let targets = |k: usize| -> Vec<(usize, usize)> {
        let view = multiplex.view(k);
        held_out
            .iter()
            .copied()
            .filter(|&(i, j)| view.is_observed(i, j))
            .collect()
    };
    match estimator {
        Estimator::SingleLsmPerView => (0..multiplex.k())
            .map(|k| match fit_lsm(&masked[k], &priors[k], &cfg) {
                Ok((state, _)) => {
                    let probs = LinkProbabilityMatrix::from_positions(
                        k,
                        &state.positions,
                        state.xi_tilde,
                        ProbabilitySource::PerView,
                    );
                    score_view(fold, k, multiplex.view(k), &masked[k], &probs, &targets(k))
                }
                Err(e) => failed(fold, k, e.to_string()),
            })
            .collect(),
        Estimator::Lsjm => {
            let fit = multiplex
                .with_views(masked.clone())
                .and_then(|mx| fit_lsjm(&mx, priors, &cfg));
            match fit {
                Ok(fit) => (0..multiplex.k())
                    .map(|k| {
                        let probs = LinkProbabilityMatrix::from_positions(
                            k,
                            &fit.fused.positions_bar,
                            fit.view_states[k].xi_tilde,
                            ProbabilitySource::Fused,
                        );
                        score_view(fold, k, multiplex.view(k), &masked[k], &probs, &targets(k))
                    })
                    .collect(),
                Err(e) => (0..multiplex.k())
                    .map(|k| failed(fold, k, e.to_string()))
                    .collect(),
            }
        }
    }
}

fn node_fold(
    multiplex: &MultiplexNetwork,
    priors: &[PriorConfig],
    config: &FitConfig,
    plan: &CvPlan,
    fold: usize,
    k: usize,
) -> FoldOutcome {
    let nodes: Vec<usize> = plan
        .fold_items(fold)
        .filter_map(|item| match item {
            CvItem::Node(i) => Some(i),
            CvItem::Dyad(..) => None,
        })
        .collect();
    let truth = multiplex.view(k);
    let held_out: Vec<(usize, usize)> = truth
        .observed_dyads()
        .filter(|(i, j)| nodes.contains(i) || nodes.contains(j))
        .collect();
    let mut views = multiplex.views().to_vec();
    for &i in &nodes {
        views[k].mask_node(i);
    }
    let cfg = FitConfig {
        seed: derive_seed(config.seed, Stream::Fold, fold as u64),
        ..*config
    };
    let fit = multiplex
        .with_views(views.clone())
        .and_then(|mx| fit_lsjm(&mx, priors, &cfg));
    match fit {
        Ok(fit) => {
            let probs = LinkProbabilityMatrix::from_positions(
                k,
                &fit.fused.positions_bar,
                fit.view_states[k].xi_tilde,
                ProbabilitySource::Fused,
            );
            score_view(fold, k, truth, &views[k], &probs, &held_out)
        }
        Err(e) => failed(fold, k, e.to_string()),
    }
}

/// Runs every fold (in parallel), then pools confusion counts and held-out
/// scores per view. A fold whose refit fails is recorded and skipped.
pub fn run_cv(
    multiplex: &MultiplexNetwork,
    priors: &[PriorConfig],
    config: &FitConfig,
    plan: &CvPlan,
    estimator: Estimator,
) -> Result<CvReport> {
    if plan.mode == CvMode::Nodes && estimator != Estimator::Lsjm {
        return Err(Error::InvalidPlan(
            "node folds need the joint model; a single view has no information on a held-out node"
                .into(),
        ));
    }
    let expected = match plan.mode {
        CvMode::Nodes => multiplex.n(),
        CvMode::Dyads => multiplex.view(0).dyads().count(),
    };
    if plan.items.len() != expected {
        return Err(Error::InvalidPlan(
            "plan was built for a different network".into(),
        ));
    }
    if priors.len() != multiplex.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} priors for {} views",
            priors.len(),
            multiplex.k()
        )));
    }
    config.validate()?;
    let folds: Vec<FoldOutcome> = match plan.mode {
        CvMode::Dyads => (0..plan.folds)
            .into_par_iter()
            .flat_map_iter(|f| dyad_fold(multiplex, priors, config, plan, estimator, f))
            .collect(),
        CvMode::Nodes => (0..plan.folds)
            .flat_map(|f| (0..multiplex.k()).map(move |k| (f, k)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(f, k)| node_fold(multiplex, priors, config, plan, f, k))
            .collect(),
    };
    let views = (0..multiplex.k())
        .map(|k| {
            let mut confusion = Confusion::default();
            let mut scores = Vec::new();
            for f in folds.iter().filter(|f| f.view == k) {
                confusion.add(&f.confusion);
                scores.extend_from_slice(&f.scores);
            }
            ViewCvSummary {
                view: k,
                confusion,
                misclassification: confusion.misclassification(),
                roc: roc_auc(&scores).ok(),
            }
        })
        .collect();
    Ok(CvReport {
        mode: plan.mode,
        estimator,
        folds,
        views,
    })
}

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{kl_objective, surrogate_objective};
use super::updates::{covariance_update, position_update, psi2_update, xi_update};
use super::{Expansion, FitConfig, FitReport, PriorConfig, RepairCounts, ViewVariationalState};
use crate::error::{Error, Result};
use crate::network::AdjacencyView;
use crate::rng::{standard_normal_rows, substream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the restart aborted on a numerical error.
    pub failure: Option<String>,
}

/// Initial variational state of restart `restart`: `xi~` and `psi2~` at
/// their prior values, `Sigma~ = I`, positions drawn from `N(0, I)`.
pub fn initial_state(
    n: usize,
    prior: &PriorConfig,
    seed: u64,
    restart: usize,
) -> ViewVariationalState {
    let mut rng = substream(seed, Stream::Restart, restart as u64);
    ViewVariationalState {
        xi_tilde: prior.xi,
        psi2_tilde: prior.psi2,
        positions: standard_normal_rows(&mut rng, n, prior.dim),
        cov: DMatrix::identity(prior.dim, prior.dim),
    }
}

/// Number of step halvings tried before the shortest step is taken anyway.
pub(crate) const MAX_HALVINGS: usize = 10;

pub(crate) struct RestartRun<S> {
    pub state: S,
    pub trace: Vec<f64>,
    pub summary: RestartSummary,
    pub repairs: RepairCounts,
}

/// One variational EM iteration for a single view.
pub(crate) fn lsm_iteration(
    view: &AdjacencyView,
    state: &ViewVariationalState,
    prior: &PriorConfig,
    repairs: &mut RepairCounts,
) -> Result<ViewVariationalState> {
    let cov = covariance_update(view, Expansion::of(state), prior.sigma2, repairs)?;
    let positions = position_update(
        view,
        &state.positions,
        &cov,
        state.xi_tilde,
        state.psi2_tilde,
        prior.sigma2,
        repairs,
    )?;
    let at = Expansion {
        positions: &positions,
        cov: &cov,
        xi: state.xi_tilde,
        psi2: state.psi2_tilde,
    };
    let xi_tilde = xi_update(view, at, prior)?;
    let psi2_tilde = psi2_update(view, Expansion { xi: xi_tilde, ..at }, prior)?;
    let next = ViewVariationalState {
        xi_tilde,
        psi2_tilde,
        positions,
        cov,
    };
    next.check()?;
    Ok(next)
}

/// Variational bound `-KL` used to safeguard steps.
fn elbo(view: &AdjacencyView, state: &ViewVariationalState, prior: &PriorConfig) -> f64 {
    kl_objective(view, state, prior)
        .map(|t| -t.total())
        .unwrap_or(f64::NEG_INFINITY)
}

/// `old + t (new - old)` for every variational parameter. Convex
/// combinations keep `Sigma~` SPD and `psi2~` positive.
pub(crate) fn blend_state(
    old: &ViewVariationalState,
    new: &ViewVariationalState,
    t: f64,
) -> ViewVariationalState {
    ViewVariationalState {
        xi_tilde: old.xi_tilde + t * (new.xi_tilde - old.xi_tilde),
        psi2_tilde: old.psi2_tilde + t * (new.psi2_tilde - old.psi2_tilde),
        positions: &old.positions + (&new.positions - &old.positions) * t,
        cov: &old.cov + (&new.cov - &old.cov) * t,
    }
}

/// Halves the step from `old` towards `full` until `score` stops
/// decreasing. A fixed point of the full update is a fixed point of the
/// damped one, so this only changes the path.
pub(crate) fn damp<S>(
    old: &S,
    old_score: f64,
    full: S,
    score: impl Fn(&S) -> f64,
    blend: impl Fn(&S, &S, f64) -> S,
    repairs: &mut RepairCounts,
) -> (S, f64) {
    let full_score = score(&full);
    if full_score >= old_score || !old_score.is_finite() {
        return (full, full_score);
    }
    repairs.damped += 1;
    let mut t = 1.0;
    let mut candidate = full;
    let mut candidate_score = full_score;
    for _ in 0..MAX_HALVINGS {
        t *= 0.5;
        let trial = blend(old, &candidate, 0.5);
        let trial_score = score(&trial);
        candidate = trial;
        candidate_score = trial_score;
        if trial_score >= old_score {
            break;
        }
    }
    log::trace!("step damped to {t}");
    (candidate, candidate_score)
}

fn run_restart(
    view: &AdjacencyView,
    prior: &PriorConfig,
    config: &FitConfig,
    restart: usize,
) -> RestartRun<ViewVariationalState> {
    let mut state = initial_state(view.n(), prior, config.seed, restart);
    let mut repairs = RepairCounts::default();
    let initial_objective = surrogate_objective(view, &state).unwrap_or(f64::NEG_INFINITY);
    let mut bound = elbo(view, &state, prior);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut failure = None;
    while trace.len() < config.max_iters {
        let step = lsm_iteration(view, &state, prior, &mut repairs).and_then(|full| {
            let (next, b) = damp(
                &state,
                bound,
                full,
                |s| elbo(view, s, prior),
                blend_state,
                &mut repairs,
            );
            surrogate_objective(view, &next).map(|obj| (next, b, obj))
        });
        match step {
            Ok((next, b, obj)) if obj.is_finite() => {
                state = next;
                bound = b;
                trace.push(obj);
            }
            Ok(_) => {
                failure = Some("objective became non-finite".to_string());
                break;
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
        if config.should_stop(&trace) {
            converged = true;
            break;
        }
    }
    let summary = RestartSummary {
        restart,
        initial_objective,
        final_objective: trace.last().copied().unwrap_or(initial_objective),
        iterations: trace.len(),
        converged,
        failure,
    };
    RestartRun {
        state,
        trace,
        summary,
        repairs,
    }
}

/// Picks the restart with the largest final objective; the earliest wins a
/// tie. Restarts that failed numerically are never selected.
pub(crate) fn select_best<S>(runs: Vec<RestartRun<S>>) -> Result<(S, FitReport)> {
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.summary.failure.is_none())
        .fold(None::<(usize, f64)>, |acc, (idx, r)| {
            let obj = r.summary.final_objective;
            match acc {
                Some((_, b)) if b >= obj => acc,
                _ => Some((idx, obj)),
            }
        })
        .map(|(idx, _)| idx);
    let Some(best) = best else {
        let reasons: Vec<_> = runs
            .iter()
            .filter_map(|r| r.summary.failure.clone())
            .collect();
        return Err(Error::NonPositiveDefinite(format!(
            "every restart failed: {}",
            reasons.join("; ")
        )));
    };
    let mut repairs = RepairCounts::default();
    let summaries: Vec<_> = runs.iter().map(|r| r.summary.clone()).collect();
    for r in &runs {
        repairs.add(&r.repairs);
    }
    let run = runs.into_iter().nth(best).expect("index in range");
    let report = FitReport {
        initial_objective: run.summary.initial_objective,
        iterations: run.summary.iterations,
        converged: run.summary.converged,
        best_restart: run.summary.restart,
        objective_trace: run.trace,
        restarts: summaries,
        repairs,
    };
    Ok((run.state, report))
}

/// Fits a single-view latent space model with `config.restarts` random
/// starts and returns the restart with the highest final surrogate
/// objective. Running out of iterations is reported through
/// [`FitReport::converged`], not as an error.
pub fn fit_lsm(
    view: &AdjacencyView,
    prior: &PriorConfig,
    config: &FitConfig,
) -> Result<(ViewVariationalState, FitReport)> {
    prior.validate()?;
    config.validate()?;
    let runs: Vec<_> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(view, prior, config, r))
        .collect();
    select_best(runs)
}

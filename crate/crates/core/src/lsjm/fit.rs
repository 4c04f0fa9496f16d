use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{
    add_fused_repairs, align_or_identity, fuse_counted, validate_priors, FusedPosterior, LsjmFit,
};
use crate::error::{Error, Result};
use crate::lsm::{
    covariance_update, damp, initial_state, kl_objective, position_update, psi2_update,
    select_best, surrogate_at, xi_update, Expansion, FitConfig, PriorConfig, RepairCounts,
    RestartRun, RestartSummary, ViewVariationalState,
};
use crate::network::MultiplexNetwork;

/// Iterate of the joint EM. The per-view states carry `(xi~_k, psi2~_k)`
/// and the latest per-view positions and covariance; the fused posterior
/// is the expansion point of the next iteration.
#[derive(Debug, Clone, PartialEq)]
struct Joint {
    fused: FusedPosterior,
    views: Vec<ViewVariationalState>,
}

fn anchored<'a>(fused: &'a FusedPosterior, view: &ViewVariationalState) -> Expansion<'a> {
    Expansion {
        positions: &fused.positions_bar,
        cov: &fused.cov_bar,
        xi: view.xi_tilde,
        psi2: view.psi2_tilde,
    }
}

fn estep(
    multiplex: &MultiplexNetwork,
    fused: &FusedPosterior,
    views: &[ViewVariationalState],
    sigma2: f64,
    align: bool,
    repairs: &mut RepairCounts,
) -> Result<(Vec<ViewVariationalState>, FusedPosterior)> {
    let covs = multiplex
        .views()
        .par_iter()
        .zip(views)
        .map(|(view, state)| {
            let mut r = RepairCounts::default();
            covariance_update(view, anchored(fused, state), sigma2, &mut r).map(|c| (c, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut updated: Vec<ViewVariationalState> = views
        .iter()
        .zip(&covs)
        .map(|(s, (cov, r))| {
            repairs.add(r);
            ViewVariationalState {
                cov: cov.clone(),
                ..s.clone()
            }
        })
        .collect();
    // positions are expanded around the fused covariance of the new view
    // covariances
    let (provisional, count) = fuse_counted(&updated, sigma2)?;
    add_fused_repairs(repairs, count);
    let positions = multiplex
        .views()
        .par_iter()
        .zip(&updated)
        .map(|(view, state)| {
            let mut r = RepairCounts::default();
            position_update(
                view,
                &fused.positions_bar,
                &provisional.cov_bar,
                state.xi_tilde,
                state.psi2_tilde,
                sigma2,
                &mut r,
            )
            .map(|z| (z, r))
        })
        .collect::<Result<Vec<_>>>()?;
    for (state, (z, r)) in updated.iter_mut().zip(positions) {
        state.positions = z;
        repairs.add(&r);
    }
    if align {
        let (reference, others) = updated.split_first_mut().expect("at least one view");
        for state in others {
            let r = align_or_identity(&reference.positions, &state.positions);
            state.rotate(&r);
        }
    }
    let (next, count) = fuse_counted(&updated, sigma2)?;
    add_fused_repairs(repairs, count);
    Ok((updated, next))
}

fn mstep(
    multiplex: &MultiplexNetwork,
    fused: &FusedPosterior,
    views: &[ViewVariationalState],
    priors: &[PriorConfig],
) -> Result<Vec<(f64, f64)>> {
    multiplex
        .views()
        .iter()
        .zip(views)
        .zip(priors)
        .map(|((view, state), prior)| {
            let at = anchored(fused, state);
            let xi = xi_update(view, at, prior)?;
            let psi2 = psi2_update(view, Expansion { xi, ..at }, prior)?;
            Ok((xi, psi2))
        })
        .collect()
}

/// One joint E-step anchored at the fused posterior of `fit`, without
/// alignment: returns the new per-view states (intercepts unchanged) and
/// their fusion.
pub fn lsjm_estep(
    multiplex: &MultiplexNetwork,
    fit: &LsjmFit,
) -> Result<(Vec<ViewVariationalState>, FusedPosterior)> {
    check_shapes(multiplex, &fit.priors)?;
    let mut repairs = RepairCounts::default();
    estep(
        multiplex,
        &fit.fused,
        &fit.view_states,
        fit.priors[0].sigma2,
        false,
        &mut repairs,
    )
}

/// Per-view `(xi~_k, psi2~_k)` updates at the fused posterior of `fit`.
pub fn lsjm_mstep(multiplex: &MultiplexNetwork, fit: &LsjmFit) -> Result<Vec<(f64, f64)>> {
    check_shapes(multiplex, &fit.priors)?;
    mstep(multiplex, &fit.fused, &fit.view_states, &fit.priors)
}

/// `E_q[log p(Z)]` under the fused posterior.
fn expected_log_prior(fused: &FusedPosterior, sigma2: f64) -> f64 {
    let (n, d) = fused.positions_bar.shape();
    let sq: f64 = fused.positions_bar.iter().map(|v| v * v).sum();
    -0.5 * (n * d) as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
        - (sq + n as f64 * fused.cov_bar.trace()) / (2.0 * sigma2)
}

/// Monitored objective: the per-view surrogates at the fused posterior,
/// minus `(K - 1) E_q[log p(Z)]`.
pub fn lsjm_objective(
    multiplex: &MultiplexNetwork,
    fused: &FusedPosterior,
    view_states: &[ViewVariationalState],
    sigma2: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (view, state) in multiplex.views().iter().zip(view_states) {
        let at = anchored(fused, state);
        total += surrogate_at(view, at.positions, at.cov, at.xi, at.psi2)?;
    }
    let extra = view_states.len() - 1;
    if extra > 0 {
        total -= extra as f64 * expected_log_prior(fused, sigma2);
    }
    Ok(total)
}

/// Variational bound of the joint model with `q(Z)` the fused posterior;
/// used only to safeguard steps. Equals the single-view bound when `K = 1`.
fn joint_elbo(multiplex: &MultiplexNetwork, joint: &Joint, priors: &[PriorConfig]) -> f64 {
    let mut kl = 0.0;
    let mut latent = 0.0;
    for ((view, state), prior) in multiplex.views().iter().zip(&joint.views).zip(priors) {
        let at_fused = ViewVariationalState {
            xi_tilde: state.xi_tilde,
            psi2_tilde: state.psi2_tilde,
            positions: joint.fused.positions_bar.clone(),
            cov: joint.fused.cov_bar.clone(),
        };
        match kl_objective(view, &at_fused, prior) {
            Ok(terms) => {
                kl += terms.total();
                latent = terms.latent;
            }
            Err(_) => return f64::NEG_INFINITY,
        }
    }
    let extra = joint.views.len() - 1;
    if extra > 0 {
        kl -= extra as f64 * latent;
    }
    -kl
}

fn blend_joint(old: &Joint, new: &Joint, t: f64) -> Joint {
    let lerp = |a: &DMatrix<f64>, b: &DMatrix<f64>| a + (b - a) * t;
    Joint {
        fused: FusedPosterior {
            positions_bar: lerp(&old.fused.positions_bar, &new.fused.positions_bar),
            cov_bar: lerp(&old.fused.cov_bar, &new.fused.cov_bar),
        },
        views: old
            .views
            .iter()
            .zip(&new.views)
            .map(|(a, b)| crate::lsm::blend_state(a, b, t))
            .collect(),
    }
}

fn iteration(
    multiplex: &MultiplexNetwork,
    joint: &Joint,
    priors: &[PriorConfig],
    align: bool,
    repairs: &mut RepairCounts,
) -> Result<Joint> {
    let sigma2 = priors[0].sigma2;
    let (mut views, fused) = estep(
        multiplex,
        &joint.fused,
        &joint.views,
        sigma2,
        align,
        repairs,
    )?;
    let alphas = mstep(multiplex, &fused, &views, priors)?;
    for (state, (xi, psi2)) in views.iter_mut().zip(alphas) {
        state.xi_tilde = xi;
        state.psi2_tilde = psi2;
        state.check()?;
    }
    if fused.positions_bar.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonPositiveDefinite(
            "non-finite fused positions".into(),
        ));
    }
    Ok(Joint { fused, views })
}

fn initial_joint(n: usize, priors: &[PriorConfig], seed: u64, restart: usize) -> Joint {
    let start = initial_state(n, &priors[0], seed, restart);
    let views = priors
        .iter()
        .map(|p| ViewVariationalState {
            xi_tilde: p.xi,
            psi2_tilde: p.psi2,
            ..start.clone()
        })
        .collect();
    Joint {
        fused: FusedPosterior {
            positions_bar: start.positions,
            cov_bar: start.cov,
        },
        views,
    }
}

fn run_restart(
    multiplex: &MultiplexNetwork,
    priors: &[PriorConfig],
    config: &FitConfig,
    restart: usize,
) -> RestartRun<Joint> {
    let sigma2 = priors[0].sigma2;
    let mut joint = initial_joint(multiplex.n(), priors, config.seed, restart);
    let mut repairs = RepairCounts::default();
    let initial_objective =
        lsjm_objective(multiplex, &joint.fused, &joint.views, sigma2).unwrap_or(f64::NEG_INFINITY);
    let mut bound = joint_elbo(multiplex, &joint, priors);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut failure = None;
    while trace.len() < config.max_iters {
        let align = trace.len() < config.align_iters && multiplex.k() > 1;
        let step = iteration(multiplex, &joint, priors, align, &mut repairs).and_then(|full| {
            let (next, b) = damp(
                &joint,
                bound,
                full,
                |j| joint_elbo(multiplex, j, priors),
                blend_joint,
                &mut repairs,
            );
            lsjm_objective(multiplex, &next.fused, &next.views, sigma2).map(|obj| (next, b, obj))
        });
        match step {
            Ok((next, b, obj)) if obj.is_finite() => {
                joint = next;
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
        state: joint,
        trace,
        summary,
        repairs,
    }
}

fn check_shapes(multiplex: &MultiplexNetwork, priors: &[PriorConfig]) -> Result<()> {
    if priors.len() != multiplex.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} priors for {} views",
            priors.len(),
            multiplex.k()
        )));
    }
    validate_priors(priors)
}

/// Fits the joint model with `config.restarts` random starts and returns
/// the restart with the highest final monitored objective. View 1 is the
/// rotation reference during the first `config.align_iters` iterations.
pub fn fit_lsjm(
    multiplex: &MultiplexNetwork,
    priors: &[PriorConfig],
    config: &FitConfig,
) -> Result<LsjmFit> {
    check_shapes(multiplex, priors)?;
    config.validate()?;
    let runs: Vec<_> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(multiplex, priors, config, r))
        .collect();
    let (joint, report) = select_best(runs)?;
    Ok(LsjmFit {
        fused: joint.fused,
        view_states: joint.views,
        priors: priors.to_vec(),
        report,
    })
}

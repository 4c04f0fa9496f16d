use nalgebra::{DMatrix, DVector};

use super::kernel::{rows, Kernel};
use super::{PriorConfig, ViewVariationalState};
use crate::error::Result;
use crate::linalg::spd_log_det;
use crate::network::AdjacencyView;

/// `E_q[exp(alpha - |z_i - z_j|^2)]` for `alpha ~ N(xi, psi2)` and
/// independent `z_i ~ N(zi, cov)`, `z_j ~ N(zj, cov)`.
pub fn mgf_term(
    zi: &DVector<f64>,
    zj: &DVector<f64>,
    cov: &DMatrix<f64>,
    xi_tilde: f64,
    psi2_tilde: f64,
) -> Result<f64> {
    let kernel = Kernel::new(cov, xi_tilde, psi2_tilde)?;
    Ok(kernel.log_mgf(&(zi - zj)).exp())
}

/// Jensen-bounded expected log-likelihood, summed over observed ordered
/// dyads:
///
/// `sum_{i != j} y_ij (xi~ - 2 tr Sigma~ - |z~_i - z~_j|^2) - log(1 + m_ij)`.
pub fn surrogate_objective(view: &AdjacencyView, state: &ViewVariationalState) -> Result<f64> {
    surrogate_at(
        view,
        &state.positions,
        &state.cov,
        state.xi_tilde,
        state.psi2_tilde,
    )
}

pub(crate) fn surrogate_at(
    view: &AdjacencyView,
    positions: &DMatrix<f64>,
    cov: &DMatrix<f64>,
    xi: f64,
    psi2: f64,
) -> Result<f64> {
    let kernel = Kernel::new(cov, xi, psi2)?;
    let z = rows(positions);
    let two_tr = 2.0 * cov.trace();
    let n = view.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j || !view.is_observed(i, j) {
                continue;
            }
            let d = &z[i] - &z[j];
            if view.link(i, j) {
                total += xi - two_tr - d.norm_squared();
            }
            total -= kernel.log1p_mgf(&d);
        }
    }
    Ok(total)
}

/// Components of `KL[q || p]` with the additive constant split so that each
/// Gaussian term vanishes when `q` equals the prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlTerms {
    /// `KL[q(alpha) || p(alpha)]`
    pub alpha: f64,
    /// `sum_i KL[q(z_i) || p(z_i)]`
    pub latent: f64,
    /// Surrogate expected log-likelihood (enters with a minus sign).
    pub expected_loglik: f64,
}

impl KlTerms {
    pub fn total(&self) -> f64 {
        self.alpha + self.latent - self.expected_loglik
    }
}

pub fn kl_objective(
    view: &AdjacencyView,
    state: &ViewVariationalState,
    prior: &PriorConfig,
) -> Result<KlTerms> {
    let n = state.n() as f64;
    let d = state.dim() as f64;
    let ratio = state.psi2_tilde / prior.psi2;
    let alpha = 0.5 * (ratio - ratio.ln() + (state.xi_tilde - prior.xi).powi(2) / prior.psi2 - 1.0);
    let log_det = spd_log_det(&state.cov)?;
    let sq_norms: f64 = state.positions.iter().map(|v| v * v).sum();
    let latent = 0.5 * (n * d * prior.sigma2.ln() - n * log_det)
        + n * state.cov.trace() / (2.0 * prior.sigma2)
        + sq_norms / (2.0 * prior.sigma2)
        - 0.5 * n * d;
    Ok(KlTerms {
        alpha,
        latent,
        expected_loglik: surrogate_objective(view, state)?,
    })
}

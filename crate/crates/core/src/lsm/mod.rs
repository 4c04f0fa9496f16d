//! Single-view latent space model fitted by variational EM.
//!
//! The variational posterior is `q(alpha) = N(xi~, psi2~)` and
//! `q(z_i) = N(z~_i, Sigma~)` with one covariance shared by all nodes. The
//! E-step refreshes `Sigma~` and the `z~_i`; the M-step refreshes `xi~` and
//! `psi2~`. Each update is the minimiser of a Taylor-expanded bound around
//! the previous iterate (see [`derivatives`]).

pub mod derivatives;
mod fit;
pub(crate) mod kernel;
mod objective;
mod updates;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use derivatives::{f_derivatives, Derivative, DerivativeTarget, Expansion};
pub(crate) use fit::{blend_state, damp, select_best, RestartRun};
pub use fit::{fit_lsm, initial_state, RestartSummary};
pub(crate) use objective::surrogate_at;
pub use objective::{kl_objective, mgf_term, surrogate_objective, KlTerms};
pub(crate) use updates::{covariance_update, position_update, psi2_update, xi_update, PD_FLOOR};
pub use updates::{estep_update, mstep_update, EStepUpdate, MStepUpdate};

/// Fixed hyperparameters: `alpha ~ N(xi, psi2)`, `z_i ~ N(0, sigma2 I_dim)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub xi: f64,
    pub psi2: f64,
    pub sigma2: f64,
    pub dim: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            xi: 0.0,
            psi2: 2.0,
            sigma2: 1.0,
            dim: 2,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.psi2 > 0.0 && self.psi2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "psi2 must be > 0, got {}",
                self.psi2
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma2 must be > 0, got {}",
                self.sigma2
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("latent dimension must be >= 1".into()));
        }
        if !self.xi.is_finite() {
            return Err(Error::InvalidConfig("xi must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewVariationalState {
    pub xi_tilde: f64,
    pub psi2_tilde: f64,
    /// `N x D`, row `i` is `z~_i`.
    pub positions: DMatrix<f64>,
    /// `D x D` covariance shared by all nodes.
    pub cov: DMatrix<f64>,
}

impl ViewVariationalState {
    pub fn n(&self) -> usize {
        self.positions.nrows()
    }

    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }

    pub fn check(&self) -> Result<()> {
        if self.psi2_tilde.is_nan() || self.psi2_tilde <= 0.0 {
            return Err(Error::NonPositiveDefinite(format!(
                "psi2~ = {}",
                self.psi2_tilde
            )));
        }
        if self.cov.nrows() != self.dim() || self.cov.ncols() != self.dim() {
            return Err(Error::DimensionMismatch("covariance is not D x D".into()));
        }
        if !crate::linalg::is_spd(&self.cov) {
            return Err(Error::NonPositiveDefinite("Sigma~".into()));
        }
        if self.positions.iter().any(|v| !v.is_finite()) || !self.xi_tilde.is_finite() {
            return Err(Error::NonPositiveDefinite(
                "non-finite variational state".into(),
            ));
        }
        Ok(())
    }

    /// Applies `z -> R' z` to every position and `Sigma -> R' Sigma R`,
    /// i.e. right-multiplies the position matrix by `R`.
    pub fn rotate(&mut self, r: &DMatrix<f64>) {
        self.positions = &self.positions * r;
        self.cov = crate::linalg::symmetrize(&(r.transpose() * &self.cov * r));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub tol: f64,
    pub min_iters: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub align_iters: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tol: 1e-2,
            min_iters: 10,
            max_iters: 500,
            restarts: 10,
            seed: 0,
            align_iters: 10,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.min_iters > self.max_iters && self.max_iters > 0 {
            return Err(Error::InvalidConfig(format!(
                "min_iters ({}) exceeds max_iters ({})",
                self.min_iters, self.max_iters
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        Ok(())
    }

    /// Stopping rule: at least `min_iters` iterations and an absolute change
    /// of the monitored objective below `tol`.
    pub fn should_stop(&self, trace: &[f64]) -> bool {
        let t = trace.len();
        t >= self.min_iters.max(2) && (trace[t - 1] - trace[t - 2]).abs() < self.tol
    }
}

/// Counts of numerical repairs applied during a fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairCounts {
    /// Node systems whose Taylor Hessian had its negative spectrum clipped.
    pub hessian: u64,
    /// Covariance systems whose Jacobian had its negative spectrum clipped.
    pub covariance: u64,
    /// Fused precisions with eigenvalues raised to the floor.
    pub fused: u64,
    /// Iterations whose full step lowered the variational bound and was
    /// shortened.
    pub damped: u64,
}

impl RepairCounts {
    pub fn total(&self) -> u64 {
        self.hessian + self.covariance + self.fused + self.damped
    }

    pub(crate) fn add(&mut self, other: &RepairCounts) {
        self.hessian += other.hessian;
        self.covariance += other.covariance;
        self.fused += other.fused;
        self.damped += other.damped;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Monitored objective after each iteration of the selected restart.
    pub objective_trace: Vec<f64>,
    /// Monitored objective at the initial state of the selected restart.
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub repairs: RepairCounts,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }
}

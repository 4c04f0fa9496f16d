//! Latent space joint model: `K` views of one node set share latent
//! positions. Each view is updated like a single-view model anchored at the
//! fused posterior, and the per-view Gaussian posteriors are merged by
//!
//! ```text
//! Sigma_bar = [ sum_k Sigma_k^{-1} - (K - 1) / sigma2 I ]^{-1}
//! z_bar_i   = Sigma_bar sum_k Sigma_k^{-1} z_ik
//! ```
//!
//! which is the product of the view posteriors divided by `K - 1` copies of
//! the prior.

mod fit;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{map_eigenvalues, min_eigenvalue, spd_inverse, symmetrize};
use crate::lsm::{FitReport, PriorConfig, RepairCounts, ViewVariationalState, PD_FLOOR};

pub use fit::{fit_lsjm, lsjm_estep, lsjm_mstep, lsjm_objective};

/// Eigenvalue a non-PD fused precision is raised to.
const FUSED_EIGEN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FusedPosterior {
    /// `N x D`, row `i` is `z_bar_i`.
    pub positions_bar: DMatrix<f64>,
    pub cov_bar: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsjmFit {
    pub fused: FusedPosterior,
    pub view_states: Vec<ViewVariationalState>,
    pub priors: Vec<PriorConfig>,
    pub report: FitReport,
}

impl LsjmFit {
    /// `(xi~_k, psi2~_k)` for every view.
    pub fn alphas(&self) -> Vec<(f64, f64)> {
        self.view_states
            .iter()
            .map(|s| (s.xi_tilde, s.psi2_tilde))
            .collect()
    }
}

/// Checks that per-view priors agree on everything the shared latent space
/// depends on.
pub fn validate_priors(priors: &[PriorConfig]) -> Result<()> {
    let first = priors
        .first()
        .ok_or_else(|| Error::InvalidConfig("at least one view prior is required".into()))?;
    for p in priors {
        p.validate()?;
        if p.sigma2 != first.sigma2 || p.dim != first.dim {
            return Err(Error::InvalidConfig(
                "view priors must share sigma2 and dim".into(),
            ));
        }
    }
    Ok(())
}

/// Fuses per-view Gaussian posteriors. With one view the result is an exact
/// copy. A fused precision with eigenvalues at or below `1e-8` has them
/// raised to `1e-6`; `Err(FusedPrecisionNotPd)` is never returned by this
/// function, the repair count is returned instead.
pub fn fuse(view_states: &[ViewVariationalState], sigma2: f64) -> Result<FusedPosterior> {
    fuse_counted(view_states, sigma2).map(|(f, _)| f)
}

pub(crate) fn fuse_counted(
    view_states: &[ViewVariationalState],
    sigma2: f64,
) -> Result<(FusedPosterior, u64)> {
    let (first, rest) = view_states
        .split_first()
        .ok_or_else(|| Error::InvalidConfig("nothing to fuse".into()))?;
    if rest.is_empty() {
        return Ok((
            FusedPosterior {
                positions_bar: first.positions.clone(),
                cov_bar: first.cov.clone(),
            },
            0,
        ));
    }
    let (n, dim) = (first.n(), first.dim());
    if rest.iter().any(|s| s.n() != n || s.dim() != dim) {
        return Err(Error::DimensionMismatch("views disagree on N or D".into()));
    }
    let k = view_states.len() as f64;
    let precisions = view_states
        .iter()
        .map(|s| spd_inverse(&s.cov))
        .collect::<Result<Vec<_>>>()?;
    let mut precision = DMatrix::identity(dim, dim) * (-(k - 1.0) / sigma2);
    for p in &precisions {
        precision += p;
    }
    let precision = symmetrize(&precision);
    let mut repaired = 0;
    let precision = if min_eigenvalue(&precision) <= PD_FLOOR {
        repaired = 1;
        log::debug!("fused precision repaired");
        map_eigenvalues(&precision, |v| {
            if v <= PD_FLOOR {
                FUSED_EIGEN_FLOOR
            } else {
                v
            }
        })
    } else {
        precision
    };
    let cov_bar = symmetrize(&spd_inverse(&precision).map_err(|_| Error::FusedPrecisionNotPd)?);
    // rows: z_bar_i' = sum_k z_ik' P_k Sigma_bar  (P_k, Sigma_bar symmetric)
    let mut weighted = DMatrix::zeros(n, dim);
    for (s, p) in view_states.iter().zip(&precisions) {
        weighted += &s.positions * p;
    }
    Ok((
        FusedPosterior {
            positions_bar: weighted * &cov_bar,
            cov_bar,
        },
        repaired,
    ))
}

/// Orthogonal `R` minimizing `|reference - target R|_F` (reflections
/// allowed). Fails with `DegenerateSvd` when `target` is rank deficient, in
/// which case callers keep the identity.
pub fn align(reference: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if reference.shape() != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "reference {:?} vs target {:?}",
            reference.shape(),
            target.shape()
        )));
    }
    let dim = target.ncols();
    let sv = target.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if sv.len() < dim || top == 0.0 || sv.iter().any(|&s| s <= 1e-12 * top) {
        return Err(Error::DegenerateSvd);
    }
    let svd = (target.transpose() * reference).svd(true, true);
    let (u, v_t) = (
        svd.u.ok_or(Error::DegenerateSvd)?,
        svd.v_t.ok_or(Error::DegenerateSvd)?,
    );
    Ok(u * v_t)
}

/// [`align`] falling back to the identity on degenerate input.
pub fn align_or_identity(reference: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    align(reference, target).unwrap_or_else(|_| {
        log::debug!("degenerate alignment target, keeping identity");
        DMatrix::identity(target.ncols(), target.ncols())
    })
}

pub(crate) fn add_fused_repairs(repairs: &mut RepairCounts, count: u64) {
    repairs.fused += count;
}

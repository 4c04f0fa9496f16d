use nalgebra::{DMatrix, DVector};

use super::derivatives::{node_grad_hess, psi2_first, sigma_jacobian, xi_first_second, Expansion};
use super::kernel::{rows, Kernel};
use super::{PriorConfig, RepairCounts, ViewVariationalState};
use crate::error::Result;
use crate::linalg::{map_eigenvalues, min_eigenvalue, spd_inverse, spd_solve, symmetrize};
use crate::network::AdjacencyView;

/// Smallest eigenvalue accepted in a linear system before repair.
pub(crate) const PD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EStepUpdate {
    pub positions: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    pub repairs: RepairCounts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MStepUpdate {
    pub xi_tilde: f64,
    pub psi2_tilde: f64,
}

/// One E-step: `Sigma~` from the Jacobian at the current iterate, then every
/// `z~_i` from the gradient and Hessian at the current positions with the
/// new `Sigma~`. All nodes read the previous positions (Jacobi sweep).
pub fn estep_update(
    view: &AdjacencyView,
    state: &ViewVariationalState,
    prior: &PriorConfig,
) -> Result<EStepUpdate> {
    let mut repairs = RepairCounts::default();
    let cov = covariance_update(view, Expansion::of(state), prior.sigma2, &mut repairs)?;
    let positions = position_update(
        view,
        &state.positions,
        &cov,
        state.xi_tilde,
        state.psi2_tilde,
        prior.sigma2,
        &mut repairs,
    )?;
    Ok(EStepUpdate {
        positions,
        cov,
        repairs,
    })
}

/// One M-step: `xi~` by a Newton step on its bound, then `psi2~` using the
/// new `xi~`.
pub fn mstep_update(
    view: &AdjacencyView,
    state: &ViewVariationalState,
    prior: &PriorConfig,
) -> Result<MStepUpdate> {
    let xi_tilde = xi_update(view, Expansion::of(state), prior)?;
    let psi2_tilde = psi2_update(
        view,
        Expansion {
            xi: xi_tilde,
            ..Expansion::of(state)
        },
        prior,
    )?;
    Ok(MStepUpdate {
        xi_tilde,
        psi2_tilde,
    })
}

/// `Sigma~ = N/2 [ (N / (2 sigma2) + 2 sum y_ij) I + J ]^{-1}`.
pub(crate) fn covariance_update(
    view: &AdjacencyView,
    at: Expansion<'_>,
    sigma2: f64,
    repairs: &mut RepairCounts,
) -> Result<DMatrix<f64>> {
    let n = view.n() as f64;
    let dim = at.cov.nrows();
    let diag = n / (2.0 * sigma2) + 2.0 * view.link_sum();
    let mut jac = sigma_jacobian(view, at)?;
    let mut system = DMatrix::identity(dim, dim) * diag + &jac;
    if min_eigenvalue(&system) <= PD_FLOOR {
        jac = map_eigenvalues(&jac, |v| v.max(0.0));
        system = DMatrix::identity(dim, dim) * diag + &jac;
        repairs.covariance += 1;
        log::debug!("covariance system repaired (view {})", view.label());
    }
    Ok(symmetrize(&(spd_inverse(&system)? * (0.5 * n))))
}

/// Position update for every node, expanding around `anchor` (which also
/// supplies the neighbour positions on the right-hand side).
pub(crate) fn position_update(
    view: &AdjacencyView,
    anchor: &DMatrix<f64>,
    cov: &DMatrix<f64>,
    xi: f64,
    psi2: f64,
    sigma2: f64,
    repairs: &mut RepairCounts,
) -> Result<DMatrix<f64>> {
    let kernel = Kernel::new(cov, xi, psi2)?;
    let z = rows(anchor);
    let n = view.n();
    let dim = anchor.ncols();
    let mut out = DMatrix::zeros(n, dim);
    for i in 0..n {
        let (grad, mut hess) = node_grad_hess(view, &kernel, &z, i);
        let diag = 1.0 / (2.0 * sigma2) + view.degree_weight(i);
        let mut system = DMatrix::identity(dim, dim) * diag + &hess;
        if min_eigenvalue(&system) <= PD_FLOOR {
            hess = map_eigenvalues(&hess, |v| v.max(0.0));
            system = DMatrix::identity(dim, dim) * diag + &hess;
            repairs.hessian += 1;
        }
        let mut rhs: DVector<f64> = &hess * &z[i] - grad;
        for (j, zj) in z.iter().enumerate() {
            if j != i {
                let w = view.y(i, j) + view.y(j, i);
                if w != 0.0 {
                    rhs.axpy(w, zj, 1.0);
                }
            }
        }
        let zi = spd_solve(&system, &rhs)?;
        out.set_row(i, &zi.transpose());
    }
    Ok(out)
}

/// `xi~ = [xi + psi2 (sum y - f' + xi0 f'')] / (1 + psi2 f'')`.
pub(crate) fn xi_update(
    view: &AdjacencyView,
    at: Expansion<'_>,
    prior: &PriorConfig,
) -> Result<f64> {
    let (f1, f2) = xi_first_second(view, at)?;
    Ok((prior.xi + prior.psi2 * (view.link_sum() - f1 + at.xi * f2)) / (1.0 + prior.psi2 * f2))
}

/// `psi2~ = (1 / psi2 + 2 f'(psi2~))^{-1}`.
pub(crate) fn psi2_update(
    view: &AdjacencyView,
    at: Expansion<'_>,
    prior: &PriorConfig,
) -> Result<f64> {
    let f1 = psi2_first(view, at)?;
    Ok(1.0 / (1.0 / prior.psi2 + 2.0 * f1))
}

//! Closed-form derivatives of the softplus-of-MGF terms used by the Taylor
//! expansions behind every variational update.
//!
//! With `m_ij` the expected link kernel (see [`super::mgf_term`]) and
//! `p_ij = m_ij / (1 + m_ij)`, `B = (I + 4 Sigma)^{-1}`, `d = z_i - z_j`:
//!
//! * node function `f_i(z_i) = 1/2 sum_j (o_ij + o_ji) log(1 + m_ij)`,
//!   `G = -2 B sum_j w_ij p_ij d`,
//!   `H = -2 B sum_j w_ij p_ij (I - 2 (1 - p_ij) d d' B)`;
//! * covariance function `f(Sigma) = sum_{i != j} o_ij log(1 + m_ij)`,
//!   `J = 4 B sum o_ij p_ij (d d' B - I / 2)`;
//! * intercept: `f'(xi) = sum o_ij p_ij`, `f''(xi) = sum o_ij p_ij (1 - p_ij)`;
//! * variance: `f'(psi2) = 1/2 sum o_ij p_ij`.
//!
//! `o_ij` is the observation mask; on a fully observed view the node weight
//! `w_ij = (o_ij + o_ji) / 2` is 1 and these are the textbook sums.

use nalgebra::{DMatrix, DVector};

use super::kernel::{rows, Kernel};
use super::ViewVariationalState;
use crate::error::Result;
use crate::network::AdjacencyView;

/// Point around which a Taylor expansion is taken.
#[derive(Debug, Clone, Copy)]
pub struct Expansion<'a> {
    pub positions: &'a DMatrix<f64>,
    pub cov: &'a DMatrix<f64>,
    pub xi: f64,
    pub psi2: f64,
}

impl<'a> Expansion<'a> {
    pub fn of(state: &'a ViewVariationalState) -> Self {
        Expansion {
            positions: &state.positions,
            cov: &state.cov,
            xi: state.xi_tilde,
            psi2: state.psi2_tilde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeTarget {
    PositionGradHess(usize),
    SigmaJacobian,
    XiFirstSecond,
    Psi2First,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Derivative {
    PositionGradHess {
        gradient: DVector<f64>,
        hessian: DMatrix<f64>,
    },
    SigmaJacobian(DMatrix<f64>),
    XiFirstSecond {
        first: f64,
        second: f64,
    },
    Psi2First(f64),
}

pub fn f_derivatives(
    view: &AdjacencyView,
    state: &ViewVariationalState,
    target: DerivativeTarget,
) -> Result<Derivative> {
    let at = Expansion::of(state);
    Ok(match target {
        DerivativeTarget::PositionGradHess(i) => {
            let kernel = Kernel::new(at.cov, at.xi, at.psi2)?;
            let z = rows(at.positions);
            let (gradient, hessian) = node_grad_hess(view, &kernel, &z, i);
            Derivative::PositionGradHess { gradient, hessian }
        }
        DerivativeTarget::SigmaJacobian => Derivative::SigmaJacobian(sigma_jacobian(view, at)?),
        DerivativeTarget::XiFirstSecond => {
            let (first, second) = xi_first_second(view, at)?;
            Derivative::XiFirstSecond { first, second }
        }
        DerivativeTarget::Psi2First => Derivative::Psi2First(psi2_first(view, at)?),
    })
}

pub(crate) fn node_grad_hess(
    view: &AdjacencyView,
    kernel: &Kernel,
    z: &[DVector<f64>],
    i: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let dim = z[i].len();
    let mut g = DVector::zeros(dim);
    let mut scalar = 0.0;
    let mut outer = DMatrix::zeros(dim, dim);
    for (j, zj) in z.iter().enumerate() {
        if j == i {
            continue;
        }
        let w = 0.5 * (view.is_observed(i, j) as u8 + view.is_observed(j, i) as u8) as f64;
        if w == 0.0 {
            continue;
        }
        let d = &z[i] - zj;
        let p = kernel.weight(&d);
        g.axpy(w * p, &d, 1.0);
        scalar += w * p;
        let bd = &kernel.b * &d;
        outer.ger(w * p * (1.0 - p), &bd, &bd, 1.0);
    }
    let gradient = -2.0 * (&kernel.b * g);
    // -2 B [sum w p I - 2 sum w p (1-p) d d' B] = -2 sum w p B + 4 sum w p (1-p) (Bd)(Bd)'
    let hessian = &kernel.b * (-2.0 * scalar) + outer * 4.0;
    (gradient, crate::linalg::symmetrize(&hessian))
}

pub(crate) fn sigma_jacobian(view: &AdjacencyView, at: Expansion<'_>) -> Result<DMatrix<f64>> {
    let kernel = Kernel::new(at.cov, at.xi, at.psi2)?;
    let z = rows(at.positions);
    let dim = at.cov.nrows();
    let n = view.n();
    let mut scalar = 0.0;
    let mut outer = DMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            if i == j || !view.is_observed(i, j) {
                continue;
            }
            let d = &z[i] - &z[j];
            let p = kernel.weight(&d);
            let bd = &kernel.b * &d;
            outer.ger(p, &bd, &bd, 1.0);
            scalar += p;
        }
    }
    Ok(crate::linalg::symmetrize(
        &((outer - &kernel.b * (0.5 * scalar)) * 4.0),
    ))
}

fn weight_sums(view: &AdjacencyView, at: Expansion<'_>) -> Result<(f64, f64)> {
    let kernel = Kernel::new(at.cov, at.xi, at.psi2)?;
    let z = rows(at.positions);
    let n = view.n();
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j || !view.is_observed(i, j) {
                continue;
            }
            let p = kernel.weight(&(&z[i] - &z[j]));
            s1 += p;
            s2 += p * (1.0 - p);
        }
    }
    Ok((s1, s2))
}

/// `f'(xi)` and `f''(xi)` at the expansion point.
pub(crate) fn xi_first_second(view: &AdjacencyView, at: Expansion<'_>) -> Result<(f64, f64)> {
    weight_sums(view, at)
}

/// `f'(psi2)` at the expansion point.
pub(crate) fn psi2_first(view: &AdjacencyView, at: Expansion<'_>) -> Result<f64> {
    Ok(0.5 * weight_sums(view, at)?.0)
}

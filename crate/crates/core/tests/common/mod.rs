//! Numerical checks shared by the oracle tests and the acceptance report.
//! Each returns the worst observed error on success and a description of
//! the first violation otherwise.

#![allow(dead_code)]

use std::f64::consts::PI;

use lsjm_core::lsjm::{align, fuse};
use lsjm_core::lsm::{f_derivatives, mgf_term, surrogate_objective, Derivative, DerivativeTarget};
use lsjm_core::{AdjacencyView, ViewVariationalState};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Check = Result<f64, String>;

pub fn m(rows: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_row_iterator(
        rows.len(),
        rows[0].len(),
        rows.iter().flat_map(|r| r.iter().copied()),
    )
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn rotation(theta: f64) -> DMatrix<f64> {
    m(&[&[theta.cos(), -theta.sin()], &[theta.sin(), theta.cos()]])
}

pub struct Instance {
    pub view: AdjacencyView,
    pub state: ViewVariationalState,
}

pub fn random_spd(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a * a.transpose()) * (scale / d as f64) + DMatrix::identity(d, d) * 0.05
}

/// Random view on 3..=6 nodes (directed or not, sometimes with a hidden
/// dyad) and a random variational state in two dimensions.
pub fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(3..=6);
    let directed = rng.gen_bool(0.5);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && (directed || i < j) && rng.gen_bool(0.4) {
                edges.push((i, j));
            }
        }
    }
    let mut view = AdjacencyView::from_edges(n, directed, edges, "r").unwrap();
    if rng.gen_bool(0.5) {
        let (i, j) = (0, 1 + rng.gen_range(0..n - 1));
        view.mask_dyad(i, j);
    }
    let positions = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let state = ViewVariationalState {
        xi_tilde: rng.gen_range(-1.5..1.5),
        psi2_tilde: rng.gen_range(0.05..2.0),
        cov: random_spd(rng, 2, 0.5),
        positions,
    };
    Instance { view, state }
}

/// `sum_{i != j} o_ij log(1 + m_ij)`.
fn softplus_sum(
    view: &AdjacencyView,
    z: &DMatrix<f64>,
    cov: &DMatrix<f64>,
    xi: f64,
    psi2: f64,
) -> f64 {
    let n = view.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && view.is_observed(i, j) {
                let zi = z.row(i).transpose();
                let zj = z.row(j).transpose();
                total += mgf_term(&zi, &zj, cov, xi, psi2).unwrap().ln_1p();
            }
        }
    }
    total
}

/// The terms of the sum above involving node `i`, each dyad weighted by the
/// share of its two directions that is observed.
fn node_function(
    view: &AdjacencyView,
    z: &DMatrix<f64>,
    cov: &DMatrix<f64>,
    xi: f64,
    psi2: f64,
    i: usize,
) -> f64 {
    let mut total = 0.0;
    for j in 0..view.n() {
        if j == i {
            continue;
        }
        let w = 0.5 * (view.is_observed(i, j) as u8 + view.is_observed(j, i) as u8) as f64;
        let zi = z.row(i).transpose();
        let zj = z.row(j).transpose();
        total += w * mgf_term(&zi, &zj, cov, xi, psi2).unwrap().ln_1p();
    }
    total
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1e-3)
}

/// G, H, J, f'(xi), f''(xi), f'(psi2) against central differences on 20
/// random instances.
pub fn derivatives_vs_finite_differences(tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-5;
    let worst = std::cell::Cell::new(0.0f64);
    let judge = |what: &str, e: f64, shown: String| -> Result<(), String> {
        worst.set(worst.get().max(e));
        if e < tol {
            Ok(())
        } else {
            Err(format!("{what}: {shown} (rel {e:.2e})"))
        }
    };
    let note = |what: &str, analytic: f64, numeric: f64| {
        judge(
            what,
            rel_err(analytic, numeric),
            format!("analytic {analytic} vs numeric {numeric}"),
        )
    };
    // vectors and matrices: largest entry error relative to the largest entry
    let note_matrix = |what: &str, analytic: &DMatrix<f64>, numeric: &DMatrix<f64>| {
        let scale = numeric.amax().max(1e-3);
        judge(
            what,
            max_abs_diff(analytic, numeric) / scale,
            format!("analytic {analytic} vs numeric {numeric}"),
        )
    };
    for _ in 0..20 {
        let Instance { view, state: s } = instance(&mut rng);
        let (xi, psi2) = (s.xi_tilde, s.psi2_tilde);

        for i in 0..view.n() {
            let Derivative::PositionGradHess { gradient, hessian } =
                f_derivatives(&view, &s, DerivativeTarget::PositionGradHess(i))
                    .map_err(|e| e.to_string())?
            else {
                unreachable!()
            };
            let f = |z: &DMatrix<f64>| node_function(&view, z, &s.cov, xi, psi2, i);
            let shifted = |du: f64, dv: f64| {
                let mut z = s.positions.clone();
                z[(i, 0)] += du;
                z[(i, 1)] += dv;
                f(&z)
            };
            let g = DVector::from_fn(2, |d, _| {
                let e = if d == 0 { (h, 0.0) } else { (0.0, h) };
                (shifted(e.0, e.1) - shifted(-e.0, -e.1)) / (2.0 * h)
            });
            note_matrix(
                "G",
                &DMatrix::from_column_slice(2, 1, gradient.as_slice()),
                &DMatrix::from_column_slice(2, 1, g.as_slice()),
            )?;
            // second-order stencils on f itself
            let hh = 1e-4;
            let f0 = shifted(0.0, 0.0);
            let uu = (shifted(hh, 0.0) - 2.0 * f0 + shifted(-hh, 0.0)) / (hh * hh);
            let vv = (shifted(0.0, hh) - 2.0 * f0 + shifted(0.0, -hh)) / (hh * hh);
            let uv = (shifted(hh, hh) - shifted(hh, -hh) - shifted(-hh, hh) + shifted(-hh, -hh))
                / (4.0 * hh * hh);
            note_matrix("H", &hessian, &m(&[&[uu, uv], &[uv, vv]]))?;
        }

        let Derivative::SigmaJacobian(jac) =
            f_derivatives(&view, &s, DerivativeTarget::SigmaJacobian).map_err(|e| e.to_string())?
        else {
            unreachable!()
        };
        // symmetric directions: d/de f(Sigma + e E) = tr(J E)
        for (a, b) in [(0, 0), (1, 1), (0, 1)] {
            let mut e = DMatrix::zeros(2, 2);
            e[(a, b)] = 1.0;
            e[(b, a)] = 1.0;
            let up = softplus_sum(&view, &s.positions, &(&s.cov + &e * h), xi, psi2);
            let dn = softplus_sum(&view, &s.positions, &(&s.cov - &e * h), xi, psi2);
            note("J", (&jac * &e).trace(), (up - dn) / (2.0 * h))?;
        }

        let Derivative::XiFirstSecond { first, second } =
            f_derivatives(&view, &s, DerivativeTarget::XiFirstSecond).map_err(|e| e.to_string())?
        else {
            unreachable!()
        };
        let f = |x: f64| softplus_sum(&view, &s.positions, &s.cov, x, psi2);
        note("f'(xi)", first, (f(xi + h) - f(xi - h)) / (2.0 * h))?;
        let hh = 1e-4;
        note(
            "f''(xi)",
            second,
            (f(xi + hh) - 2.0 * f(xi) + f(xi - hh)) / (hh * hh),
        )?;

        let Derivative::Psi2First(p1) =
            f_derivatives(&view, &s, DerivativeTarget::Psi2First).map_err(|e| e.to_string())?
        else {
            unreachable!()
        };
        let f = |p: f64| softplus_sum(&view, &s.positions, &s.cov, xi, p);
        note("f'(psi2)", p1, (f(psi2 + h) - f(psi2 - h)) / (2.0 * h))?;
    }
    Ok(worst.get())
}

/// Closed-form kernel expectation against Monte Carlo; returns the largest
/// deviation in standard errors.
pub fn mgf_vs_monte_carlo(samples: usize, draws: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let zi = DVector::from_fn(2, |_, _| rng.gen_range(-0.8..0.8));
        let zj = DVector::from_fn(2, |_, _| rng.gen_range(-0.8..0.8));
        let cov = random_spd(&mut rng, 2, 0.2);
        let xi = rng.gen_range(-1.0..1.0);
        let psi2 = rng.gen_range(0.05..0.5);
        let exact = mgf_term(&zi, &zj, &cov, xi, psi2).map_err(|e| e.to_string())?;

        let chol = cov.clone().cholesky().ok_or("covariance not SPD")?.l();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let a = xi + psi2.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let ei = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let ej = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let d = (&zi + &chol * ei) - (&zj + &chol * ej);
            let v = (a - d.norm_squared()).exp();
            sum += v;
            sum_sq += v * v;
        }
        let n = samples as f64;
        let mean = sum / n;
        let se = ((sum_sq / n - mean * mean) / n).sqrt();
        let z = (mean - exact).abs() / se;
        worst = worst.max(z);
        if z >= 3.0 {
            return Err(format!("monte carlo {mean} ± {se} vs closed form {exact}"));
        }
    }
    Ok(worst)
}

fn state_1d(mu: f64, var: f64) -> ViewVariationalState {
    ViewVariationalState {
        xi_tilde: 0.0,
        psi2_tilde: 1.0,
        positions: DMatrix::from_element(1, 1, mu),
        cov: DMatrix::from_element(1, 1, var),
    }
}

/// Fused moments against trapezoid integration of `prod_k q_k / p^{K-1}`
/// in one dimension, plus the exact single-view reduction.
pub fn fusion_vs_quadrature() -> Check {
    let sigma2 = 1.0;
    let cases = [
        vec![(0.4, 0.3), (-0.2, 0.5)],
        vec![(1.0, 0.2), (0.5, 0.4), (-0.3, 0.6)],
        vec![(-0.7, 0.25)],
        vec![(2.0, 0.8), (1.5, 0.9)],
    ];
    let mut worst = 0.0f64;
    for case in cases {
        let k = case.len() as f64;
        let states: Vec<_> = case.iter().map(|&(mu, var)| state_1d(mu, var)).collect();
        let fused = fuse(&states, sigma2).map_err(|e| e.to_string())?;
        let log_density = |z: f64| {
            let mut l = (k - 1.0) * z * z / (2.0 * sigma2);
            for &(mu, var) in &case {
                l -= (z - mu) * (z - mu) / (2.0 * var);
            }
            l
        };
        let (lo, hi, steps) = (-10.0, 10.0, 200_000);
        let dz = (hi - lo) / steps as f64;
        let (mut mass, mut first, mut second) = (0.0, 0.0, 0.0);
        for s in 0..=steps {
            let z = lo + s as f64 * dz;
            let w = log_density(z).exp() * if s == 0 || s == steps { 0.5 } else { 1.0 };
            mass += w;
            first += w * z;
            second += w * z * z;
        }
        let mean = first / mass;
        let var = second / mass - mean * mean;
        let err = (fused.positions_bar[(0, 0)] - mean)
            .abs()
            .max((fused.cov_bar[(0, 0)] - var).abs());
        worst = worst.max(err);
        if err >= 1e-4 {
            return Err(format!(
                "{case:?}: fused ({}, {}) vs grid ({mean}, {var})",
                fused.positions_bar, fused.cov_bar
            ));
        }
    }
    // a single view fuses to itself
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let one = ViewVariationalState {
        xi_tilde: 0.0,
        psi2_tilde: 1.0,
        positions: DMatrix::from_fn(7, 2, |_, _| rng.sample::<f64, _>(StandardNormal)),
        cov: random_spd(&mut rng, 2, 0.5),
    };
    let fused = fuse(std::slice::from_ref(&one), sigma2).map_err(|e| e.to_string())?;
    let err = max_abs_diff(&fused.positions_bar, &one.positions)
        .max(max_abs_diff(&fused.cov_bar, &one.cov));
    if err > 1e-12 {
        return Err(format!("single-view fusion moved by {err:e}"));
    }
    Ok(worst)
}

fn misfit(reference: &DMatrix<f64>, target: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    (reference - target * r).norm()
}

/// Planted rotations at every whole degree are recovered, and on random
/// pairs of clouds the SVD solution is at least as good as the best
/// rotation or reflection on a 1-degree grid.
pub fn procrustes() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reference = DMatrix::from_fn(12, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut worst = 0.0f64;
    for deg in 0..360 {
        let r = rotation(deg as f64 * PI / 180.0);
        let target = &reference * r.transpose();
        let found = align(&reference, &target).map_err(|e| e.to_string())?;
        let err = misfit(&reference, &target, &found);
        worst = worst.max(err);
        if err >= 1e-10 {
            return Err(format!("planted {deg}°: misfit {err:e}"));
        }
    }
    let flip = m(&[&[1.0, 0.0], &[0.0, -1.0]]);
    for _ in 0..20 {
        let a = DMatrix::from_fn(15, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(15, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let found = align(&a, &b).map_err(|e| e.to_string())?;
        let best = misfit(&a, &b, &found);
        for deg in 0..360 {
            let r = rotation(deg as f64 * PI / 180.0);
            for cand in [r.clone(), &flip * &r] {
                let grid = misfit(&a, &b, &cand);
                if grid < best - 1e-12 {
                    return Err(format!("grid {deg}° beats svd: {grid} < {best}"));
                }
            }
        }
    }
    Ok(worst)
}

/// Surrogate objective under random joint rotations of positions and
/// covariance.
pub fn rotation_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let Instance { view, state } = instance(&mut rng);
        let before = surrogate_objective(&view, &state).map_err(|e| e.to_string())?;
        let mut turned = state.clone();
        let r = rotation(rng.gen_range(0.0..2.0 * PI));
        let r = if rng.gen_bool(0.5) {
            &r * m(&[&[1.0, 0.0], &[0.0, -1.0]])
        } else {
            r
        };
        turned.rotate(&r);
        let after = surrogate_objective(&view, &turned).map_err(|e| e.to_string())?;
        let err = (after - before).abs();
        worst = worst.max(err);
        if err >= 1e-8 {
            return Err(format!("objective moved by {err:e}"));
        }
    }
    Ok(worst)
}

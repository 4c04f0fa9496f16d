//! Independent checks of the numerical core: frozen values from a second
//! implementation (tests/oracles/reference.py), finite differences,
//! Monte Carlo, quadrature and symmetry properties.

mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use common::{instance, m, rotation, Instance};
use lsjm_core::lsjm::{align, lsjm_estep, FusedPosterior, LsjmFit};
use lsjm_core::lsm::{estep_update, kl_objective, mstep_update, surrogate_objective};
use lsjm_core::{
    build_multiplex, AdjacencyView, FitReport, NodeSet, PriorConfig, ViewVariationalState,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn assert_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() < tol, "{a}\nvs\n{b}");
    }
}

// python3 tests/oracles/reference.py path4-estep
#[test]
fn path4_iteration_matches_reference() {
    let view = AdjacencyView::from_edges(4, false, [(0, 1), (1, 2), (2, 3)], "p").unwrap();
    let prior = PriorConfig {
        xi: 0.0,
        psi2: 2.0,
        sigma2: 1.0,
        dim: 2,
    };
    let state = ViewVariationalState {
        xi_tilde: 0.0,
        psi2_tilde: 2.0,
        positions: m(&[&[0.3, -0.2], &[-0.5, 0.8], &[1.1, 0.4], &[-0.7, -1.3]]),
        cov: m(&[&[0.9, 0.1], &[0.1, 0.7]]),
    };
    let e = estep_update(&view, &state, &prior).unwrap();
    assert_eq!(e.repairs.total(), 0, "reference has no repair step");
    let mid = ViewVariationalState {
        positions: e.positions.clone(),
        cov: e.cov.clone(),
        ..state
    };
    let mstep = mstep_update(&view, &mid, &prior).unwrap();
    let next = ViewVariationalState {
        xi_tilde: mstep.xi_tilde,
        psi2_tilde: mstep.psi2_tilde,
        ..mid
    };

    let z = m(&[
        &[-0.619876582093196, 0.7711900284163266],
        &[0.38468596502094443, 0.3672945070837839],
        &[-0.2203735458828375, -0.17853114701803244],
        &[0.5047155931288051, -0.4617157772882953],
    ]);
    let cov = m(&[
        &[0.14986045327771652, -0.002764851538363651],
        &[-0.002764851538363651, 0.14850596992925258],
    ]);
    assert_close(&next.positions, &z, 1e-10);
    assert_close(&next.cov, &cov, 1e-10);
    assert!((next.xi_tilde - 0.15570361164521856).abs() < 1e-10);
    assert!((next.psi2_tilde - 0.15567662578716301).abs() < 1e-10);
    let obj = surrogate_objective(&view, &next).unwrap();
    assert!((obj - -11.651526590764279).abs() < 1e-10, "{obj}");
}

// python3 tests/oracles/reference.py lsjm-step; nodes 0 and 4 of the second
// view hit the indefinite-Hessian repair, which the reference mirrors.
#[test]
fn joint_estep_matches_reference() {
    let edges: [&[(usize, usize)]; 3] = [
        &[(0, 1), (1, 2), (3, 4)],
        &[(0, 1), (1, 2), (2, 3)],
        &[(0, 2), (1, 2), (3, 4), (0, 4)],
    ];
    let views = edges
        .iter()
        .enumerate()
        .map(|(k, e)| {
            AdjacencyView::from_edges(5, true, e.iter().copied(), format!("v{k}")).unwrap()
        })
        .collect();
    let mx = build_multiplex(NodeSet::new(["a", "b", "c", "d", "e"]).unwrap(), views).unwrap();
    let zbar = m(&[
        &[0.2, 0.1],
        &[-0.4, 0.5],
        &[0.9, -0.3],
        &[-0.6, -0.8],
        &[0.3, 1.2],
    ]);
    let covbar = m(&[&[0.5, 0.05], &[0.05, 0.4]]);
    let prior = PriorConfig {
        xi: 0.0,
        psi2: 2.0,
        sigma2: 1.0,
        dim: 2,
    };
    let view_states = [(-0.3, 1.5), (0.1, 2.0), (-0.5, 0.8)]
        .iter()
        .map(|&(xi, psi2)| ViewVariationalState {
            xi_tilde: xi,
            psi2_tilde: psi2,
            positions: DMatrix::zeros(5, 2),
            cov: DMatrix::identity(2, 2),
        })
        .collect();
    let fit = LsjmFit {
        fused: FusedPosterior {
            positions_bar: zbar,
            cov_bar: covbar,
        },
        view_states,
        priors: vec![prior; 3],
        report: FitReport::default(),
    };
    let (views, fused) = lsjm_estep(&mx, &fit).unwrap();

    let covs = [
        m(&[
            &[0.37183305863450056, -0.009924448172297352],
            &[-0.009924448172297352, 0.33942555617903547],
        ]),
        m(&[
            &[0.43445573470529875, -0.019865378261891796],
            &[-0.019865378261891796, 0.36492674198867225],
        ]),
        m(&[
            &[0.2675017060692232, -0.0034538204258564593],
            &[-0.0034538204258564593, 0.2567255680656274],
        ]),
    ];
    let zs = [
        m(&[
            &[-1.8864617993750632, 0.8126778220009504],
            &[0.2926875543120854, 0.03300146664514043],
            &[0.5123570658403226, -0.10751728006093102],
            &[-0.6388039379380219, 0.053793298606614616],
            &[-0.5966867645732008, 0.4881853208019838],
        ]),
        m(&[
            &[-0.057315385259612696, 0.22039663693956513],
            &[0.24177548682556402, 0.09823176162736776],
            &[0.1236922417409466, -0.790170021776439],
            &[0.9181706753373202, -2.039222902030284],
            &[0.7216813745173716, 2.8216082395977797],
        ]),
        m(&[
            &[0.6809682889973805, 0.3882738195591661],
            &[0.46207211241086, -0.0897023272479198],
            &[0.25583400230437603, 0.050240884957564805],
            &[-0.3835265711455544, 0.19781298738670353],
            &[-0.11062099783353536, 0.154857557459784],
        ]),
    ];
    for k in 0..3 {
        assert_close(&views[k].cov, &covs[k], 1e-10);
        assert_close(&views[k].positions, &zs[k], 1e-10);
    }
    assert_close(
        &fused.positions_bar,
        &m(&[
            &[-0.40118050308600667, 0.5921144472694704],
            &[0.4577814084513185, -0.0029272477273261242],
            &[0.384931342772997, -0.3057706699648047],
            &[-0.16664889380792833, -0.6039044656563488],
            &[-0.04211977657165924, 1.2965672822871586],
        ]),
        1e-10,
    );
    assert_close(
        &fused.cov_bar,
        &m(&[
            &[0.14860259690576563, -0.004983955671503647],
            &[-0.004983955671503647, 0.13189419762361673],
        ]),
        1e-10,
    );
}

#[test]
fn derivatives_agree_with_finite_differences() {
    let worst = common::derivatives_vs_finite_differences(1e-5).unwrap();
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn mgf_matches_monte_carlo() {
    common::mgf_vs_monte_carlo(1_000_000, 10).unwrap();
}

#[test]
fn fusion_matches_quadrature_in_one_dimension() {
    common::fusion_vs_quadrature().unwrap();
}

#[test]
fn procrustes_recovers_planted_rotations_and_beats_a_grid() {
    common::procrustes().unwrap();
}

#[test]
fn procrustes_with_noise_and_reflection() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let reference = DMatrix::from_fn(30, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let flip = m(&[&[1.0, 0.0], &[0.0, -1.0]]);
    let planted = rotation(1.1) * flip;
    let noise = DMatrix::from_fn(30, 2, |_, _| 0.01 * rng.sample::<f64, _>(StandardNormal));
    let target = &reference * planted.transpose() + noise;
    let found = align(&reference, &target).unwrap();
    assert_close(&found, &planted, 5e-3);
    assert_relative_eq!(
        (found.transpose() * &found),
        DMatrix::identity(2, 2),
        epsilon = 1e-12
    );
}

#[test]
fn surrogate_is_rotation_invariant() {
    common::rotation_invariance().unwrap();
}

#[test]
fn kl_and_updates_are_rotation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let prior = PriorConfig::default();
    for _ in 0..20 {
        let Instance { view, state } = instance(&mut rng);
        let before = surrogate_objective(&view, &state).unwrap();
        let kl_before = kl_objective(&view, &state, &prior).unwrap().total();
        let mut turned = state.clone();
        let r = rotation(rng.gen_range(0.0..2.0 * PI));
        turned.rotate(&r);
        assert!((surrogate_objective(&view, &turned).unwrap() - before).abs() < 1e-8);
        assert!((kl_objective(&view, &turned, &prior).unwrap().total() - kl_before).abs() < 1e-8);

        // the updates commute with the rotation
        let a = estep_update(&view, &state, &prior).unwrap();
        let b = estep_update(&view, &turned, &prior).unwrap();
        if a.repairs.total() == 0 {
            assert_close(&(&a.positions * &r), &b.positions, 1e-8);
            assert_close(&(r.transpose() * &a.cov * &r), &b.cov, 1e-8);
        }
    }
}

#[test]
fn objectives_are_node_exchangeable() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let Instance { view, state } = instance(&mut rng);
        let n = view.n();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        // node perm[i] of the original becomes node i
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && view.link(perm[i], perm[j]) {
                    edges.push((i, j));
                }
            }
        }
        let mut permuted = AdjacencyView::from_edges(n, true, edges, "p").unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j && !view.is_observed(perm[i], perm[j]) {
                    permuted.mask_dyad(i, j);
                }
            }
        }
        let moved = ViewVariationalState {
            positions: DMatrix::from_fn(n, 2, |i, d| state.positions[(perm[i], d)]),
            ..state.clone()
        };
        let a = surrogate_objective(&view, &state).unwrap();
        let b = surrogate_objective(&permuted, &moved).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

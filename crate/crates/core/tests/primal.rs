mod common;

use common::*;
use gcca_core::cca::{
    disagreement_bound, disagreement_penalty, fit_cca, fit_gcca, gcca_objective, graph_term, primal_objective,
    CovarianceSet, PairedViews,
};
use gcca_core::graph::{laplacian, SourceGraph};
use gcca_core::Matrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn views(seed: u64, dx: usize, dy: usize, n: usize) -> PairedViews {
    let mut g = rng(seed);
    let (x, y) = correlated_views(&mut g, dx, dy, n, 2);
    PairedViews::center(&x, &y).unwrap()
}

#[test]
fn fit_cca_matches_block_pencil_oracle() {
    let mut g = rng(11);
    let (x, y) = correlated_views(&mut g, 3, 2, 50, 1);
    let v = PairedViews::center(&x, &y).unwrap();
    let model = fit_cca(&v, 2, 0.0).unwrap();
    let (rho, u, w) = block_cca_oracle(&x, &y, 2);
    for k in 0..2 {
        assert!(
            (model.singulars[k] - rho[k]).abs() < 1e-8,
            "rho {k}: {} vs {}",
            model.singulars[k],
            rho[k]
        );
    }
    assert!(signless_diff(&model.u, &u) < 1e-7);
    assert!(signless_diff(&model.v, &w) < 1e-7);
}

#[test]
fn identical_views_have_unit_correlation() {
    let mut g = rng(12);
    let x = gaussian(&mut g, 4, 60);
    let v = PairedViews::center(&x, &x).unwrap();
    let m = fit_cca(&v, 1, 0.0).unwrap();
    assert!((m.singulars[0] - 1.0).abs() < 1e-8);
}

#[test]
fn independent_views_have_small_correlations() {
    let mut g = rng(13);
    let x = gaussian(&mut g, 5, 2000);
    let y = gaussian(&mut g, 5, 2000);
    let m = fit_cca(&PairedViews::center(&x, &y).unwrap(), 5, 0.0).unwrap();
    assert!(
        m.singulars.iter().all(|&r| (0.0..0.3).contains(&r)),
        "{:?}",
        m.singulars
    );
}

#[test]
fn fitted_objective_beats_random_feasible_points() {
    let v = views(21, 6, 5, 40);
    let mut g = rng(22);
    let graph = random_graph(&mut g, 40, 0.2);
    let model = fit_gcca(&v, &graph, 0.1, 3, 0.0).unwrap();
    let best = gcca_objective(&model, &v, &graph).unwrap();
    let cov = CovarianceSet::from_views(&v);
    for _ in 0..1000 {
        let u = random_feasible(&mut g, &cov.sxx, 3);
        let w = random_feasible(&mut g, &cov.syy, 3);
        let f = primal_objective(&u, &w, 0.1, &v, &graph).unwrap();
        assert!(f <= best + 1e-10, "feasible point {f} beats fitted {best}");
    }
    assert!((best - model.singulars.sum()).abs() < 1e-8 * best.abs().max(1.0));
}

#[test]
fn objective_is_zero_for_zero_directions() {
    let v = views(23, 4, 3, 30);
    let graph = SourceGraph::empty(30);
    let z = DMatrix::zeros(4, 2);
    let w = DMatrix::from_element(3, 2, 1.0);
    assert_eq!(primal_objective(&z, &w, 0.5, &v, &graph).unwrap(), 0.0);
}

#[test]
fn leading_pair_satisfies_stationarity() {
    for seed in 0..5 {
        let v = views(30 + seed, 5, 4, 80);
        let m = fit_cca(&v, 1, 0.0).unwrap();
        let cov = CovarianceSet::from_views(&v);
        let u = m.u.column(0).into_owned();
        let w = m.v.column(0).into_owned();
        let two_lambda = u.dot(&(&cov.sxy * &w));
        let rx = &cov.sxy * &w - &cov.sxx * &u * two_lambda;
        let ry = cov.sxy.transpose() * &u - &cov.syy * &w * two_lambda;
        assert!(
            rx.amax() < 1e-7 && ry.amax() < 1e-7,
            "residuals {} {}",
            rx.amax(),
            ry.amax()
        );
        assert!((two_lambda - m.singulars[0]).abs() < 1e-9);
    }
}

#[test]
fn graph_term_shrinks_as_gamma_grows() {
    let gammas: Vec<f64> = (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect();
    for seed in 0..20 {
        let v = views(100 + seed, 5, 4, 30);
        let mut g = rng(200 + seed);
        let graph = random_graph(&mut g, 30, 0.3);
        let mut prev = f64::INFINITY;
        for &gamma in &gammas {
            let m = fit_gcca(&v, &graph, gamma, 2, 0.0).unwrap();
            let t = graph_term(&m.u, &m.v, &v, &graph).unwrap();
            assert!(
                t <= prev + 1e-8 * prev.abs().max(1.0),
                "seed {seed}: term rose to {t} from {prev} at γ={gamma}"
            );
            prev = t;
        }
    }
}

#[test]
fn scaling_a_view_rescales_directions_only() {
    let mut g = rng(41);
    let (x, y) = correlated_views(&mut g, 5, 4, 60, 2);
    let graph = random_graph(&mut g, 60, 0.2);
    let c = 7.5;
    let a = fit_gcca(&PairedViews::center(&x, &y).unwrap(), &graph, 0.01, 3, 0.0).unwrap();
    let b = fit_gcca(&PairedViews::center(&(&x * c), &y).unwrap(), &graph, 0.01, 3, 0.0).unwrap();
    assert!(max_abs_diff(&(&b.u * c), &a.u) < 1e-8);
    let ea = a.project_x(&x).unwrap();
    let eb = b.project_x(&(&x * c)).unwrap();
    assert!(max_abs_diff(&ea, &eb) < 1e-8);
}

#[test]
fn scaling_without_a_graph_leaves_embeddings_unchanged() {
    let mut g = rng(42);
    let (x, y) = correlated_views(&mut g, 6, 3, 50, 2);
    let a = fit_cca(&PairedViews::center(&x, &y).unwrap(), 3, 0.0).unwrap();
    let b = fit_cca(&PairedViews::center(&(&x * 0.01), &y).unwrap(), 3, 0.0).unwrap();
    assert!(max_abs_diff(&(&b.u * 0.01), &a.u) < 1e-8);
    assert!(max_abs_diff(&a.project_x(&x).unwrap(), &b.project_x(&(&x * 0.01)).unwrap()) < 1e-8);
}

/// Top-d singular pairs of the whitened cross matrix, one at a time by
/// power iteration and rank-one deflation, using Cholesky whitening.
fn sequential_oracle(v: &PairedViews, graph: &SourceGraph, gamma: f64, d: usize) -> (Vec<f64>, Matrix, Matrix) {
    let cov = CovarianceSet::from_views(v);
    let lx = cholesky_whitener(&cov.sxx);
    let ly = cholesky_whitener(&cov.syy);
    let cross = &cov.sxy - v.x() * graph.laplacian() * v.y().transpose() * gamma;
    let mut c = &lx * cross * ly.transpose();
    let mut u = DMatrix::zeros(v.dx(), d);
    let mut w = DMatrix::zeros(v.dy(), d);
    let mut s = Vec::new();
    for k in 0..d {
        let (sk, a, b) = power_top_pair(&c, 7 + k as u64);
        c -= &a * b.transpose() * sk;
        u.set_column(k, &(lx.transpose() * a));
        w.set_column(k, &(ly.transpose() * b));
        s.push(sk);
    }
    (s, u, w)
}

#[test]
fn simultaneous_fit_matches_sequential_deflation() {
    let v = views(51, 5, 4, 70);
    let mut g = rng(52);
    let graph = random_graph(&mut g, 70, 0.2);
    let m = fit_gcca(&v, &graph, 0.05, 2, 0.0).unwrap();
    let (s, u, w) = sequential_oracle(&v, &graph, 0.05, 2);
    for k in 0..2 {
        assert!((m.singulars[k] - s[k]).abs() < 1e-9 * s[0]);
    }
    assert!(signless_diff(&m.u, &u) < 1e-7, "{}", signless_diff(&m.u, &u));
    assert!(signless_diff(&m.v, &w) < 1e-7);
}

#[test]
fn empty_graph_reduces_to_cca_at_any_gamma() {
    let v = views(61, 6, 5, 50);
    let cca = fit_cca(&v, 4, 0.0).unwrap();
    for gamma in [0.0, 0.3, 100.0] {
        let m = fit_gcca(&v, &SourceGraph::empty(50), gamma, 4, 0.0).unwrap();
        assert!(max_abs_diff(&m.u, &cca.u) < 1e-8);
        assert!(max_abs_diff(&m.v, &cca.v) < 1e-8);
    }
}

#[test]
fn projection_of_the_mean_is_zero_and_training_embeddings_are_white() {
    let mut g = rng(71);
    let (x, y) = correlated_views(&mut g, 4, 3, 45, 2);
    let v = PairedViews::center(&x, &y).unwrap();
    let m = fit_cca(&v, 2, 0.0).unwrap();
    let mean = DMatrix::from_fn(4, 3, |i, _| v.x_mean()[i]);
    assert!(m.project_x(&mean).unwrap().amax() < 1e-12);
    let e = m.project_x(&x).unwrap();
    let cov = &e * e.transpose() / 45.0;
    assert!(max_abs_diff(&cov, &DMatrix::identity(2, 2)) < 1e-8);
}

#[test]
fn hand_built_projection() {
    let x = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 6.0]);
    let y = DMatrix::from_row_slice(1, 2, &[0.0, 4.0]);
    let v = PairedViews::center(&x, &y).unwrap();
    assert_eq!(v.x_mean().as_slice(), &[2.0, 4.0]);
    let u = DMatrix::from_column_slice(2, 1, &[0.5, -1.0]);
    let model = gcca_core::cca::GccaModel {
        u,
        v: DMatrix::from_element(1, 1, 1.0),
        gamma: 0.0,
        singulars: DVector::from_element(1, 1.0),
        jitter: 0.0,
        x_mean: v.x_mean().clone(),
        y_mean: v.y_mean().clone(),
    };
    let p = model.project_x(&DMatrix::from_column_slice(2, 1, &[4.0, 4.0])).unwrap();
    // (4-2)*0.5 + (4-4)*(-1)
    assert_eq!(p[(0, 0)], 1.0);
}

#[test]
fn centering_examples() {
    let mut g = rng(81);
    let x = gaussian(&mut g, 5, 20);
    let c = PairedViews::center(&x, &x).unwrap();
    for row in c.x().row_iter() {
        assert!(row.sum().abs() < 1e-12);
    }
    let again = PairedViews::center(c.x(), c.y()).unwrap();
    assert!(max_abs_diff(again.x(), c.x()) < 1e-15);
    assert!(again.x_mean().amax() < 1e-15);
    let flat = DMatrix::from_fn(3, 8, |i, _| i as f64 + 1.0);
    assert_eq!(PairedViews::center(&flat, &flat).unwrap().x().amax(), 0.0);
}

#[test]
fn disagreement_bound_is_tight_for_regular_antipodal_pairs() {
    // Cycle graph: every degree equals d_max = 2.
    let n = 12;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, (i + 1) % n)] = 1.0;
        w[((i + 1) % n, i)] = 1.0;
    }
    let graph = laplacian(&w).unwrap();
    let mut g = rng(91);
    let x = gaussian(&mut g, 3, n);
    let y = -&x;
    let v = PairedViews::center(&x, &y).unwrap();
    let u = DVector::from_vec(vec![0.3, -1.2, 0.8]);
    let pen = disagreement_penalty(&v, &graph, &u, &u);
    let bound = disagreement_bound(&v, &graph, &u, &u);
    assert!((pen - bound).abs() < 1e-10 * bound, "{pen} vs {bound}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constraints_hold_for_random_instances(seed in 0u64..10_000, gamma in 0.0f64..5.0, d in 1usize..4) {
        let v = views(seed, 5, 4, 35);
        let mut g = rng(seed ^ 0x55);
        let graph = random_graph(&mut g, 35, 0.25);
        let m = fit_gcca(&v, &graph, gamma, d, 0.0).unwrap();
        let cov = CovarianceSet::from_views(&v);
        let eye = DMatrix::<f64>::identity(d, d);
        prop_assert!(max_abs_diff(&(m.u.transpose() * &cov.sxx * &m.u), &eye) < 1e-8);
        prop_assert!(max_abs_diff(&(m.v.transpose() * &cov.syy * &m.v), &eye) < 1e-8);
        let f = gcca_objective(&m, &v, &graph).unwrap();
        prop_assert!((f - m.singulars.sum()).abs() < 1e-8 * f.abs().max(1.0));
        for k in 1..d {
            prop_assert!(m.singulars[k - 1] >= m.singulars[k]);
        }
    }

    #[test]
    fn disagreement_never_exceeds_bound(seed in 0u64..10_000) {
        let mut g = rng(seed);
        let v = PairedViews::center(&gaussian(&mut g, 3, 15), &gaussian(&mut g, 2, 15)).unwrap();
        let graph = random_graph(&mut g, 15, 0.4);
        let u = DVector::from_fn(3, |_, _| gaussian(&mut g, 1, 1)[(0, 0)]);
        let w = DVector::from_fn(2, |_, _| gaussian(&mut g, 1, 1)[(0, 0)]);
        prop_assert!(disagreement_penalty(&v, &graph, &u, &w) <= disagreement_bound(&v, &graph, &u, &w));
    }

    #[test]
    fn gamma_zero_matches_cca(seed in 0u64..10_000) {
        let v = views(seed, 4, 4, 40);
        let mut g = rng(seed + 1);
        let graph = random_graph(&mut g, 40, 0.3);
        let a = fit_gcca(&v, &graph, 0.0, 3, 0.0).unwrap();
        let b = fit_cca(&v, 3, 0.0).unwrap();
        prop_assert!(max_abs_diff(&a.u, &b.u) < 1e-6);
        prop_assert!(max_abs_diff(&a.v, &b.v) < 1e-6);
        prop_assert!(b.singulars.iter().all(|&r| (0.0..=1.0 + 1e-8).contains(&r)));
    }
}

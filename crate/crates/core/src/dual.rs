//! Dual graph-regularized CCA for the N ≪ D regime.
//!
//! Canonical vectors are expressed through sample-space coefficients,
//! `U = X A` and `V = Y B`, with the Tikhonov-regularized constraints
//! `Aᵀ(XᵀX)²A + ε AᵀXᵀXA = I` (and the Y counterpart). The problem is the
//! kernel problem with linear Gram matrices of the centered views, and is
//! solved by the same closed-form SVD route.

use crate::cca::{subtract_mean, PairedViews};
use crate::error::{Error, Result};
use crate::graph::GraphOperator;
use crate::spectral::{self, GramPair};
use crate::{Matrix, Vector};

pub use crate::spectral::{constraint_residual, dual_objective};

/// Fitted dual coefficients plus the training views needed to realize `U = XA`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualModel {
    /// N×d.
    pub a: Matrix,
    /// N×d.
    pub b: Matrix,
    pub gamma: f64,
    pub epsilon: f64,
    /// Squared canonical values `(λ*)²`, descending.
    pub eigvals: Vector,
    /// Centered training views, Dx×N and Dy×N.
    pub x_train: Matrix,
    pub y_train: Matrix,
    pub x_mean: Vector,
    pub y_mean: Vector,
}

impl DualModel {
    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `λ*`, the per-pair objective values.
    pub fn singulars(&self) -> Vector {
        self.eigvals.map(|e| e.max(0.0).sqrt())
    }

    /// `U = X A`, Dx×d. Materializes a dense matrix; prefer [`Self::project_x`].
    pub fn u(&self) -> Matrix {
        &self.x_train * &self.a
    }

    /// `V = Y B`, Dy×d.
    pub fn v(&self) -> Matrix {
        &self.y_train * &self.b
    }

    /// `Aᵀ Xᵀ (x_new − x̄)`, d×M, without forming `U`.
    pub fn project_x(&self, x_new: &Matrix) -> Result<Matrix> {
        project(&self.x_train, &self.x_mean, &self.a, x_new, "X")
    }

    /// `Bᵀ Yᵀ (y_new − ȳ)`, d×M.
    pub fn project_y(&self, y_new: &Matrix) -> Result<Matrix> {
        project(&self.y_train, &self.y_mean, &self.b, y_new, "Y")
    }
}

fn project(train: &Matrix, mean: &Vector, coef: &Matrix, data: &Matrix, view: &str) -> Result<Matrix> {
    if data.nrows() != train.nrows() {
        return Err(Error::dims(format!(
            "{view} data has {} features, model expects {}",
            data.nrows(),
            train.nrows()
        )));
    }
    let cross = train.transpose() * subtract_mean(data, mean);
    Ok(coef.transpose() * cross)
}

/// Linear Gram matrix `XᵀX` of a centered view.
pub fn linear_gram(x: &Matrix) -> Matrix {
    crate::matkit::symmetrize(&(x.transpose() * x))
}

/// Per-dataset precomputation for dual fits across many `(γ, ε)` cells.
#[derive(Debug, Clone)]
pub struct GdccaProblem {
    pair: GramPair,
    views: PairedViews,
}

impl GdccaProblem {
    pub fn new<G: GraphOperator + ?Sized>(views: &PairedViews, graph: Option<&G>) -> Result<Self> {
        let pair = GramPair::new(&linear_gram(views.x()), &linear_gram(views.y()), graph)?;
        Ok(GdccaProblem {
            pair,
            views: views.clone(),
        })
    }

    pub fn fit(&self, gamma: f64, epsilon: f64, d: usize) -> Result<DualModel> {
        check_gamma(gamma)?;
        check_epsilon(epsilon)?;
        let sol = self.pair.solve(gamma, epsilon, d)?;
        Ok(DualModel {
            a: sol.a,
            b: sol.b,
            gamma,
            epsilon,
            eigvals: sol.singulars.map(|s| s * s),
            x_train: self.views.x().clone(),
            y_train: self.views.y().clone(),
            x_mean: self.views.x_mean().clone(),
            y_mean: self.views.y_mean().clone(),
        })
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be nonnegative and finite, got {gamma}"
        )));
    }
    Ok(())
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::EpsilonNonPositive(epsilon));
    }
    Ok(())
}

/// Dual graph-regularized CCA with Tikhonov parameter `ε > 0`.
pub fn fit_gdcca<G: GraphOperator + ?Sized>(
    views: &PairedViews,
    graph: &G,
    gamma: f64,
    epsilon: f64,
    d: usize,
) -> Result<DualModel> {
    check_epsilon(epsilon)?;
    GdccaProblem::new(views, Some(graph))?.fit(gamma, epsilon, d)
}

/// Objective `Tr(Aᵀ XᵀX (I − γL) YᵀY B)` of a dual model on `views`.
pub fn gdcca_objective<G: GraphOperator + ?Sized>(model: &DualModel, views: &PairedViews, graph: &G) -> Result<f64> {
    if model.n() != views.n() {
        return Err(Error::dims(format!(
            "model has {} dual coefficients, views have {} samples",
            model.n(),
            views.n()
        )));
    }
    spectral::dual_objective(
        &linear_gram(views.x()),
        &linear_gram(views.y()),
        &model.a,
        &model.b,
        model.gamma,
        graph,
    )
}

/// Default Tikhonov parameter `1e-3 · Tr(XᵀX) / N`.
pub fn default_epsilon(views: &PairedViews) -> f64 {
    1e-3 * views.x().norm_squared() / views.n() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, SourceGraph};
    use crate::matkit::test_util::*;
    use nalgebra::DMatrix;

    fn setup(seed: u64, dx: usize, dy: usize, n: usize) -> (PairedViews, SourceGraph) {
        let mut g = rng(seed);
        let x = gaussian(&mut g, dx, n);
        let y = gaussian(&mut g, dy, 3) * x.rows(0, 3) + gaussian(&mut g, dy, n) * 0.5;
        let w = gaussian(&mut g, n, n).abs();
        let graph = laplacian(&(&w + w.transpose())).unwrap();
        (PairedViews::center(&x, &y).unwrap(), graph)
    }

    #[test]
    fn constraints_hold_and_objective_matches() {
        let (views, graph) = setup(1, 30, 40, 12);
        let m = fit_gdcca(&views, &graph, 0.2, 0.5, 4).unwrap();
        let kx = linear_gram(views.x());
        let ky = linear_gram(views.y());
        assert!(constraint_residual(&kx, &m.a, 0.5) < 1e-7);
        assert!(constraint_residual(&ky, &m.b, 0.5) < 1e-7);
        let obj = gdcca_objective(&m, &views, &graph).unwrap();
        assert!((obj - m.singulars().sum()).abs() < 1e-8 * obj.abs().max(1.0));
        assert!(m.eigvals.iter().all(|&e| e >= -1e-10));
    }

    #[test]
    fn single_pair_objective_is_leading_value() {
        let (views, graph) = setup(2, 20, 25, 15);
        let m = fit_gdcca(&views, &graph, 1.0, 0.1, 1).unwrap();
        let obj = gdcca_objective(&m, &views, &graph).unwrap();
        assert!((obj - m.eigvals[0].sqrt()).abs() < 1e-8 * obj.abs().max(1.0));
    }

    #[test]
    fn kkt_stationarity_for_one_pair() {
        let (views, graph) = setup(3, 10, 12, 14);
        let (gamma, eps) = (0.3, 0.2);
        let m = fit_gdcca(&views, &graph, gamma, eps, 1).unwrap();
        let kx = linear_gram(views.x());
        let ky = linear_gram(views.y());
        let op = DMatrix::identity(14, 14) - graph.laplacian() * gamma;
        let lam = m.singulars()[0];
        let a = m.a.column(0).into_owned();
        let b = m.b.column(0).into_owned();
        let rx = &kx * &op * &ky * &b - (&kx * &kx + &kx * eps) * &a * lam;
        let ry = &ky * &op * &kx * &a - (&ky * &ky + &ky * eps) * &b * lam;
        let scale = (&kx * &op * &ky * &b).amax();
        assert!(rx.amax() / scale < 1e-7);
        assert!(ry.amax() / scale < 1e-7);
    }

    #[test]
    fn lazy_projection_matches_materialized_u() {
        let (views, graph) = setup(4, 25, 30, 10);
        let m = fit_gdcca(&views, &graph, 0.1, 0.3, 3).unwrap();
        let mut g = rng(44);
        let fresh = gaussian(&mut g, 25, 4);
        let lazy = m.project_x(&fresh).unwrap();
        let eager = m.u().transpose() * subtract_mean(&fresh, &m.x_mean);
        assert!(max_abs_diff(&lazy, &eager) < 1e-10);
        let train_raw = subtract_mean(views.x(), &(-views.x_mean()));
        let emb = m.project_x(&train_raw).unwrap();
        let kx = linear_gram(views.x());
        assert!(max_abs_diff(&emb, &(m.a.transpose() * kx)) < 1e-8);
    }

    #[test]
    fn parameter_errors() {
        let (views, graph) = setup(5, 5, 6, 8);
        assert!(matches!(
            fit_gdcca(&views, &graph, 0.1, 0.0, 1),
            Err(Error::EpsilonNonPositive(_))
        ));
        assert!(matches!(
            fit_gdcca(&views, &graph, 0.1, 1.0, 9),
            Err(Error::RankRequestTooLarge { .. })
        ));
        assert!(matches!(
            fit_gdcca(&views, &SourceGraph::empty(7), 0.1, 1.0, 1),
            Err(Error::GraphSizeMismatch { .. })
        ));
        let m = fit_gdcca(&views, &graph, 0.1, 1.0, 1).unwrap();
        let zero = DualModel {
            a: DMatrix::zeros(8, 1),
            ..m
        };
        assert_eq!(gdcca_objective(&zero, &views, &graph).unwrap(), 0.0);
    }
}

//! Standard CCA and primal graph-regularized CCA.
//!
//! Both views are stored with samples as columns. The graph-regularized
//! problem
//!
//! ```text
//! max  Tr(Uᵀ Σxy V − γ Uᵀ X L Yᵀ V)   s.t.  Uᵀ Σx U = I,  Vᵀ Σy V = I
//! ```
//!
//! is solved in closed form: with `C = Σx^{-1/2} (Σxy − γ X L Yᵀ) Σy^{-1/2}`,
//! `U = Σx^{-1/2} Ū` and `V = Σy^{-1/2} V̄` where `Ū`, `V̄` are the leading
//! singular vectors of `C`, and the optimum equals the sum of the leading
//! singular values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{GraphOperator, SourceGraph};
use crate::matkit::{self, check_finite};
use crate::{Matrix, Vector};

/// Correlations at or below this are not separable by the block eigen route.
const EIGEN_ROUTE_FLOOR: f64 = 1e-10;

/// Two centered views of the same N entities, plus the removed means.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedViews {
    x: Matrix,
    y: Matrix,
    x_mean: Vector,
    y_mean: Vector,
}

/// Row means of `m`.
pub(crate) fn row_means(m: &Matrix) -> Vector {
    let n = m.ncols() as f64;
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum() / n))
}

pub(crate) fn subtract_mean(m: &Matrix, mean: &Vector) -> Matrix {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        col -= mean;
    }
    out
}

/// Removes the per-feature means of both views.
pub fn center(x_raw: &Matrix, y_raw: &Matrix) -> Result<PairedViews> {
    PairedViews::center(x_raw, y_raw)
}

impl PairedViews {
    pub fn center(x_raw: &Matrix, y_raw: &Matrix) -> Result<Self> {
        if x_raw.ncols() != y_raw.ncols() {
            return Err(Error::dims(format!(
                "views have {} and {} samples",
                x_raw.ncols(),
                y_raw.ncols()
            )));
        }
        if x_raw.ncols() == 0 {
            return Err(Error::dims("views contain no samples"));
        }
        check_finite(x_raw)?;
        check_finite(y_raw)?;
        let x_mean = row_means(x_raw);
        let y_mean = row_means(y_raw);
        Ok(PairedViews {
            x: subtract_mean(x_raw, &x_mean),
            y: subtract_mean(y_raw, &y_mean),
            x_mean,
            y_mean,
        })
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn dx(&self) -> usize {
        self.x.nrows()
    }

    pub fn dy(&self) -> usize {
        self.y.nrows()
    }

    /// Centered X view, Dx×N.
    pub fn x(&self) -> &Matrix {
        &self.x
    }

    /// Centered Y view, Dy×N.
    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn x_mean(&self) -> &Vector {
        &self.x_mean
    }

    pub fn y_mean(&self) -> &Vector {
        &self.y_mean
    }

    /// Centered views stacked as `[X; Y]`, (Dx+Dy)×N.
    pub fn stacked(&self) -> Matrix {
        let mut s = DMatrix::zeros(self.dx() + self.dy(), self.n());
        s.rows_mut(0, self.dx()).copy_from(&self.x);
        s.rows_mut(self.dx(), self.dy()).copy_from(&self.y);
        s
    }
}

/// Sample covariances `XXᵀ/N`, `YYᵀ/N` and cross-covariance `XYᵀ/N`.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub sxx: Matrix,
    pub syy: Matrix,
    pub sxy: Matrix,
}

impl CovarianceSet {
    pub fn from_views(views: &PairedViews) -> Self {
        let n = views.n() as f64;
        let sxx = matkit::symmetrize(&(views.x() * views.x().transpose() / n));
        let syy = matkit::symmetrize(&(views.y() * views.y().transpose() / n));
        let sxy = views.x() * views.y().transpose() / n;
        CovarianceSet { sxx, syy, sxy }
    }
}

/// Fitted canonical matrices of the primal problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GccaModel {
    /// Dx×d.
    pub u: Matrix,
    /// Dy×d.
    pub v: Matrix,
    pub gamma: f64,
    /// Leading singular values of `C`, descending (canonical correlations when γ = 0).
    pub singulars: Vector,
    pub jitter: f64,
    pub x_mean: Vector,
    pub y_mean: Vector,
}

impl GccaModel {
    pub fn d(&self) -> usize {
        self.u.ncols()
    }

    pub fn dx(&self) -> usize {
        self.u.nrows()
    }

    pub fn dy(&self) -> usize {
        self.v.nrows()
    }

    /// `Uᵀ (x_new − x̄)`, d×M.
    pub fn project_x(&self, x_new: &Matrix) -> Result<Matrix> {
        project(&self.u, &self.x_mean, x_new, "X")
    }

    /// `Vᵀ (y_new − ȳ)`, d×M.
    pub fn project_y(&self, y_new: &Matrix) -> Result<Matrix> {
        project(&self.v, &self.y_mean, y_new, "Y")
    }

    /// Flips column pairs so each column of `U` has a positive largest entry.
    fn normalize_signs(&mut self) {
        for j in 0..self.d() {
            matkit::fix_column_sign(&mut self.u, j, &mut [&mut self.v]);
        }
    }
}

fn project(w: &Matrix, mean: &Vector, data: &Matrix, view: &str) -> Result<Matrix> {
    if data.nrows() != w.nrows() {
        return Err(Error::dims(format!(
            "{view} data has {} features, model expects {}",
            data.nrows(),
            w.nrows()
        )));
    }
    Ok(w.transpose() * subtract_mean(data, mean))
}

fn check_nonneg(name: &str, value: f64) -> Result<()> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be nonnegative and finite, got {value}"
        )));
    }
    Ok(())
}

fn check_graph<G: GraphOperator + ?Sized>(graph: &G, n: usize) -> Result<()> {
    if graph.node_count() != n {
        return Err(Error::GraphSizeMismatch {
            graph: graph.node_count(),
            samples: n,
        });
    }
    Ok(())
}

/// `X L Yᵀ`, multiplying the narrower view against `L` first.
pub(crate) fn graph_cross(views: &PairedViews, lap: &Matrix) -> Matrix {
    if views.dx() <= views.dy() {
        (views.x() * lap) * views.y().transpose()
    } else {
        views.x() * (lap * views.y().transpose())
    }
}

/// Whitened pieces of the primal problem, reusable across values of γ.
///
/// `C(γ) = base − γ·graph` with `base = Rx Σxy Ry` and
/// `graph = Rx X L Yᵀ Ry`, `Rx = (Σx + jitter·I)^{-1/2}`.
#[derive(Debug, Clone)]
pub struct GccaProblem {
    rx: Matrix,
    ry: Matrix,
    base: Matrix,
    graph: Option<Matrix>,
    jitter: f64,
    x_mean: Vector,
    y_mean: Vector,
}

impl GccaProblem {
    pub fn new<G: GraphOperator + ?Sized>(views: &PairedViews, graph: Option<&G>, jitter: f64) -> Result<Self> {
        check_nonneg("jitter", jitter)?;
        if let Some(g) = graph {
            check_graph(g, views.n())?;
        }
        let cov = CovarianceSet::from_views(views);
        let rx = matkit::sym_inv_sqrt(&cov.sxx, jitter)?;
        let ry = matkit::sym_inv_sqrt(&cov.syy, jitter)?;
        let base = &rx * &cov.sxy * &ry;
        let graph = graph.map(|g| &rx * graph_cross(views, g.operator()) * &ry);
        Ok(GccaProblem {
            rx,
            ry,
            base,
            graph,
            jitter,
            x_mean: views.x_mean().clone(),
            y_mean: views.y_mean().clone(),
        })
    }

    /// The matrix `C` whose singular triplets give the solution.
    pub fn whitened_cross(&self, gamma: f64) -> Matrix {
        match &self.graph {
            Some(g) if gamma != 0.0 => &self.base - g * gamma,
            _ => self.base.clone(),
        }
    }

    pub fn fit(&self, gamma: f64, d: usize) -> Result<GccaModel> {
        check_nonneg("gamma", gamma)?;
        let c = self.whitened_cross(gamma);
        let svd = matkit::top_d_svd(&c, d)?;
        let mut model = GccaModel {
            u: &self.rx * svd.left,
            v: &self.ry * svd.right,
            gamma,
            singulars: svd.singulars,
            jitter: self.jitter,
            x_mean: self.x_mean.clone(),
            y_mean: self.y_mean.clone(),
        };
        model.normalize_signs();
        Ok(model)
    }
}

/// Graph-regularized CCA through the whitened SVD.
pub fn fit_gcca<G: GraphOperator + ?Sized>(
    views: &PairedViews,
    graph: &G,
    gamma: f64,
    d: usize,
    jitter: f64,
) -> Result<GccaModel> {
    GccaProblem::new(views, Some(graph), jitter)?.fit(gamma, d)
}

/// Standard CCA from the block generalized eigenproblem
///
/// ```text
/// [ 0    Σxy ] [u]     [ Σx  0  ] [u]
/// [ Σxyᵀ  0  ] [v] = ρ [ 0   Σy ] [v]
/// ```
///
/// whose top-d eigenpairs give the canonical pairs. When a requested
/// correlation is numerically zero the pencil cannot separate the pair, and
/// the fit falls back to the whitened SVD.
pub fn fit_cca(views: &PairedViews, d: usize, jitter: f64) -> Result<GccaModel> {
    check_nonneg("jitter", jitter)?;
    let (dx, dy) = (views.dx(), views.dy());
    let available = dx.min(dy);
    if d > available {
        return Err(Error::RankRequestTooLarge {
            requested: d,
            available,
        });
    }
    let cov = CovarianceSet::from_views(views);
    let mut sxx = cov.sxx;
    let mut syy = cov.syy;
    for i in 0..dx {
        sxx[(i, i)] += jitter;
    }
    for i in 0..dy {
        syy[(i, i)] += jitter;
    }
    let m = dx + dy;
    let mut a = DMatrix::zeros(m, m);
    a.view_mut((0, dx), (dx, dy)).copy_from(&cov.sxy);
    a.view_mut((dx, 0), (dy, dx)).copy_from(&cov.sxy.transpose());
    let mut b = DMatrix::zeros(m, m);
    b.view_mut((0, 0), (dx, dx)).copy_from(&sxx);
    b.view_mut((dx, dx), (dy, dy)).copy_from(&syy);

    let eig = matkit::generalized_eig_spd(&a, &b)?;
    if d > 0 && eig.eigenvalues[d - 1] <= EIGEN_ROUTE_FLOOR {
        log::debug!("fit_cca: null canonical correlation requested, using the SVD route");
        return GccaProblem::new::<SourceGraph>(views, None, jitter)?.fit(0.0, d);
    }

    let mut u = DMatrix::zeros(dx, d);
    let mut v = DMatrix::zeros(dy, d);
    for j in 0..d {
        let w = eig.eigenvectors.column(j);
        let wx = w.rows(0, dx).into_owned();
        let wy = w.rows(dx, dy).into_owned();
        let nx = wx.dot(&(&sxx * &wx)).sqrt();
        let ny = wy.dot(&(&syy * &wy)).sqrt();
        u.set_column(j, &(wx / nx));
        v.set_column(j, &(wy / ny));
    }
    let mut model = GccaModel {
        u,
        v,
        gamma: 0.0,
        singulars: DVector::from_iterator(d, eig.eigenvalues.iter().take(d).cloned()),
        jitter,
        x_mean: views.x_mean().clone(),
        y_mean: views.y_mean().clone(),
    };
    model.normalize_signs();
    Ok(model)
}

/// `Tr(Uᵀ X L Yᵀ V)`, the graph term traded off against correlation.
pub fn graph_term<G: GraphOperator + ?Sized>(u: &Matrix, v: &Matrix, views: &PairedViews, graph: &G) -> Result<f64> {
    check_graph(graph, views.n())?;
    check_shapes(u, v, views)?;
    let a = u.transpose() * views.x();
    let b = v.transpose() * views.y();
    Ok((a * graph.operator() * b.transpose()).trace())
}

fn check_shapes(u: &Matrix, v: &Matrix, views: &PairedViews) -> Result<()> {
    if u.nrows() != views.dx() || v.nrows() != views.dy() || u.ncols() != v.ncols() {
        return Err(Error::dims(format!(
            "U is {}x{}, V is {}x{}, views have Dx={} Dy={}",
            u.nrows(),
            u.ncols(),
            v.nrows(),
            v.ncols(),
            views.dx(),
            views.dy()
        )));
    }
    Ok(())
}

/// `Tr(Uᵀ Σxy V − γ Uᵀ X L Yᵀ V)` for arbitrary `U`, `V`.
pub fn primal_objective<G: GraphOperator + ?Sized>(
    u: &Matrix,
    v: &Matrix,
    gamma: f64,
    views: &PairedViews,
    graph: &G,
) -> Result<f64> {
    check_shapes(u, v, views)?;
    let a = u.transpose() * views.x();
    let b = v.transpose() * views.y();
    let corr = (&a * b.transpose()).trace() / views.n() as f64;
    if gamma == 0.0 {
        return Ok(corr);
    }
    Ok(corr - gamma * graph_term(u, v, views, graph)?)
}

/// Objective value of a fitted model on the views it was fitted to.
pub fn gcca_objective<G: GraphOperator + ?Sized>(model: &GccaModel, views: &PairedViews, graph: &G) -> Result<f64> {
    primal_objective(&model.u, &model.v, model.gamma, views, graph)
}

/// `Σ_i d_i (uᵀx_i − vᵀy_i)²`, the degree-weighted disagreement dropped by
/// the relaxation.
pub fn disagreement_penalty(views: &PairedViews, graph: &SourceGraph, u: &Vector, v: &Vector) -> f64 {
    let a = views.x().transpose() * u;
    let b = views.y().transpose() * v;
    (0..views.n()).map(|i| graph.degrees()[i] * (a[i] - b[i]).powi(2)).sum()
}

/// `2 d_max N (uᵀΣx u + vᵀΣy v)`, an upper bound on
/// [`disagreement_penalty`] whenever every degree is nonnegative.
pub fn disagreement_bound(views: &PairedViews, graph: &SourceGraph, u: &Vector, v: &Vector) -> f64 {
    let a = views.x().transpose() * u;
    let b = views.y().transpose() * v;
    // N·uᵀΣx u = Σ_i (uᵀx_i)²
    2.0 * graph.max_degree() * (a.norm_squared() + b.norm_squared())
}

//! Kernel matrices, centering, fixed-weight multi-kernel sums and the
//! graph-regularized kernel CCA solver.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dual::{check_epsilon, check_gamma};
use crate::error::{Error, Result};
use crate::graph::GraphOperator;
use crate::matkit;
use crate::spectral::GramPair;
use crate::{Matrix, Vector};

pub use crate::spectral::{constraint_residual, dual_objective};

/// Gaussian bandwidth: a fixed `σ` or the median pairwise distance of the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Median,
}

/// `κ(x, x′) = xᵀx′` or `exp(−‖x − x′‖² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Gaussian(Bandwidth),
}

impl KernelSpec {
    /// Replaces a median bandwidth by its value on `data`.
    pub fn resolve(self, data: &Matrix) -> Result<KernelSpec> {
        match self {
            KernelSpec::Gaussian(Bandwidth::Median) => {
                Ok(KernelSpec::Gaussian(Bandwidth::Fixed(median_bandwidth(data)?)))
            }
            KernelSpec::Gaussian(Bandwidth::Fixed(s)) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::BandwidthNonPositive(s))
            }
            other => Ok(other),
        }
    }

    pub fn is_resolved(&self) -> bool {
        !matches!(self, KernelSpec::Gaussian(Bandwidth::Median))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Gaussian(Bandwidth::Median) => write!(f, "gaussian:median"),
            KernelSpec::Gaussian(Bandwidth::Fixed(s)) => write!(f, "gaussian:{s:.16e}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// `linear`, `gaussian` (median bandwidth), `gaussian:median` or `gaussian:<σ>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        match (kind, arg) {
            ("linear", None) => Ok(KernelSpec::Linear),
            ("gaussian", None) | ("gaussian", Some("median")) => Ok(KernelSpec::Gaussian(Bandwidth::Median)),
            ("gaussian", Some(v)) => {
                let sigma: f64 = v
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad bandwidth '{v}'")))?;
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::BandwidthNonPositive(sigma));
                }
                Ok(KernelSpec::Gaussian(Bandwidth::Fixed(sigma)))
            }
            _ => Err(Error::InvalidParameter(format!("unknown kernel '{s}'"))),
        }
    }
}

/// Kernel matrix `K̄(i, j) = κ(x_i, x_j)` of the columns of `data`.
///
/// A median bandwidth is resolved against `data` itself.
pub fn gram(data: &Matrix, spec: KernelSpec) -> Result<Matrix> {
    matkit::check_finite(data)?;
    let spec = spec.resolve(data)?;
    Ok(match spec {
        KernelSpec::Linear => matkit::symmetrize(&(data.transpose() * data)),
        KernelSpec::Gaussian(Bandwidth::Fixed(sigma)) => {
            let mut k = cross_gaussian(data, data, sigma);
            for i in 0..k.nrows() {
                k[(i, i)] = 1.0;
            }
            matkit::symmetrize(&k)
        }
        KernelSpec::Gaussian(Bandwidth::Median) => unreachable!("resolved above"),
    })
}

/// `K̄(i, j) = κ(train_i, new_j)`, N×M. The bandwidth must be resolved.
pub fn cross_gram(train: &Matrix, new: &Matrix, spec: KernelSpec) -> Result<Matrix> {
    if train.nrows() != new.nrows() {
        return Err(Error::dims(format!(
            "training data has {} features, new data has {}",
            train.nrows(),
            new.nrows()
        )));
    }
    matkit::check_finite(new)?;
    match spec {
        KernelSpec::Linear => Ok(train.transpose() * new),
        KernelSpec::Gaussian(Bandwidth::Fixed(sigma)) => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::BandwidthNonPositive(sigma));
            }
            Ok(cross_gaussian(train, new, sigma))
        }
        KernelSpec::Gaussian(Bandwidth::Median) => Err(Error::InvalidParameter(
            "out-of-sample kernel needs a resolved bandwidth".into(),
        )),
    }
}

fn cross_gaussian(a: &Matrix, b: &Matrix, sigma: f64) -> Matrix {
    let denom = 2.0 * sigma * sigma;
    let cols: Vec<Vector> = b
        .column_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|bj| {
            DVector::from_iterator(
                a.ncols(),
                a.column_iter().map(|ai| {
                    let d2: f64 = ai.iter().zip(bj.iter()).map(|(p, q)| (p - q).powi(2)).sum();
                    (-d2 / denom).exp()
                }),
            )
        })
        .collect();
    if cols.is_empty() {
        return DMatrix::zeros(a.ncols(), 0);
    }
    DMatrix::from_columns(&cols)
}

/// Lower median of the N(N−1)/2 pairwise Euclidean distances between columns.
pub fn median_bandwidth(data: &Matrix) -> Result<f64> {
    let n = data.ncols();
    if n < 2 {
        return Err(Error::DegenerateData);
    }
    matkit::check_finite(data)?;
    let mut dist: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            ((i + 1)..n).map(move |j| {
                data.column(i)
                    .iter()
                    .zip(data.column(j).iter())
                    .map(|(p, q)| (p - q).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .collect();
    let mid = (dist.len() - 1) / 2;
    let (_, &mut median, _) = dist.select_nth_unstable_by(mid, f64::total_cmp);
    if median <= 0.0 {
        return Err(Error::DegenerateData);
    }
    Ok(median)
}

/// Column means and grand mean of an uncentered training Gram, kept for
/// centering out-of-sample kernel columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteringStats {
    pub col_means: Vector,
    pub grand_mean: f64,
}

impl CenteringStats {
    pub fn from_gram(kbar: &Matrix) -> Self {
        let n = kbar.ncols() as f64;
        let col_means = DVector::from_iterator(kbar.ncols(), kbar.column_iter().map(|c| c.sum() / n));
        let grand_mean = col_means.sum() / n;
        CenteringStats { col_means, grand_mean }
    }

    /// Centers an N×M cross-kernel against the training statistics:
    /// `k_ij − colmean_i − mean_i(k_·j) + grand`.
    pub fn center_cross(&self, kcross: &Matrix) -> Result<Matrix> {
        let n = self.col_means.len();
        if kcross.nrows() != n {
            return Err(Error::dims(format!(
                "cross-kernel has {} rows, training set has {n} samples",
                kcross.nrows()
            )));
        }
        let mut out = kcross.clone();
        for mut col in out.column_iter_mut() {
            let m = col.sum() / n as f64;
            for (i, v) in col.iter_mut().enumerate() {
                *v += self.grand_mean - self.col_means[i] - m;
            }
        }
        Ok(out)
    }
}

/// `K = K̄ − rowmean − colmean + grandmean`, i.e. `H K̄ H` with `H = I − 11ᵀ/N`.
pub fn center_kernel(kbar: &Matrix) -> Result<Matrix> {
    if kbar.nrows() != kbar.ncols() {
        return Err(Error::dims("kernel matrix must be square"));
    }
    matkit::check_symmetric(kbar)?;
    let stats = CenteringStats::from_gram(kbar);
    let mut k = kbar.clone();
    let n = k.nrows();
    for j in 0..n {
        for i in 0..n {
            k[(i, j)] += stats.grand_mean - stats.col_means[i] - stats.col_means[j];
        }
    }
    Ok(matkit::symmetrize(&k))
}

/// Fixed nonnegative combination `Σ θ_m K_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiKernelSpec {
    pub components: Vec<(KernelSpec, f64)>,
}

impl MultiKernelSpec {
    pub fn single(spec: KernelSpec) -> Self {
        MultiKernelSpec {
            components: vec![(spec, 1.0)],
        }
    }

    fn validate(&self) -> Result<()> {
        for (index, &(_, weight)) in self.components.iter().enumerate() {
            if weight < 0.0 || !weight.is_finite() {
                return Err(Error::NegativeWeight { index, weight });
            }
        }
        if !self.components.iter().any(|&(_, w)| w > 0.0) {
            return Err(Error::EmptyDictionary);
        }
        Ok(())
    }

    pub fn resolve(&self, data: &Matrix) -> Result<MultiKernelSpec> {
        self.validate()?;
        let components = self
            .components
            .iter()
            .map(|&(s, w)| Ok((s.resolve(data)?, w)))
            .collect::<Result<_>>()?;
        Ok(MultiKernelSpec { components })
    }

    pub fn is_resolved(&self) -> bool {
        self.components.iter().all(|(s, _)| s.is_resolved())
    }
}

impl fmt::Display for MultiKernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (spec, w)) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "{spec}@{w:.16e}")?;
        }
        Ok(())
    }
}

impl FromStr for MultiKernelSpec {
    type Err = Error;

    /// `spec[@weight]` terms joined by `+`; a missing weight is 1.
    fn from_str(s: &str) -> Result<Self> {
        let components = s
            .split('+')
            .map(|term| {
                let (spec, w) = match term.split_once('@') {
                    Some((spec, w)) => (
                        spec,
                        w.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidParameter(format!("bad kernel weight '{w}'")))?,
                    ),
                    None => (term, 1.0),
                };
                Ok((spec.parse::<KernelSpec>()?, w))
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = MultiKernelSpec { components };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<KernelSpec> for MultiKernelSpec {
    fn from(spec: KernelSpec) -> Self {
        MultiKernelSpec::single(spec)
    }
}

/// Uncentered weighted Gram `Σ θ_m K̄_m`; zero-weight components are skipped.
pub fn combine_kernels(specs: &MultiKernelSpec, data: &Matrix) -> Result<Matrix> {
    specs.validate()?;
    let n = data.ncols();
    let mut k = DMatrix::zeros(n, n);
    for &(spec, w) in &specs.components {
        if w > 0.0 {
            k += gram(data, spec)? * w;
        }
    }
    Ok(k)
}

fn combine_cross(specs: &MultiKernelSpec, train: &Matrix, new: &Matrix) -> Result<Matrix> {
    let mut k = DMatrix::zeros(train.ncols(), new.ncols());
    for &(spec, w) in &specs.components {
        if w > 0.0 {
            k += cross_gram(train, new, spec)? * w;
        }
    }
    Ok(k)
}

/// Everything needed to embed new samples of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBasis {
    /// Resolved kernel.
    pub spec: MultiKernelSpec,
    /// Raw training samples, D×N.
    pub train: Matrix,
    pub stats: CenteringStats,
}

impl KernelBasis {
    /// Resolves `spec` on `train` and returns the basis with the centered Gram.
    pub fn build(spec: &MultiKernelSpec, train: &Matrix) -> Result<(KernelBasis, Matrix)> {
        let spec = spec.resolve(train)?;
        let kbar = combine_kernels(&spec, train)?;
        let stats = CenteringStats::from_gram(&kbar);
        let k = center_kernel(&kbar)?;
        Ok((
            KernelBasis {
                spec,
                train: train.clone(),
                stats,
            },
            k,
        ))
    }

    /// Centered N×M cross-kernel of `new` against the training samples.
    pub fn centered_cross(&self, new: &Matrix) -> Result<Matrix> {
        let k = combine_cross(&self.spec, &self.train, new)?;
        self.stats.center_cross(&k)
    }
}

/// Fitted kernel dual coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    /// N×d.
    pub a: Matrix,
    /// N×d.
    pub b: Matrix,
    pub gamma: f64,
    pub epsilon: f64,
    /// Leading singular values of the whitened cross matrix, descending.
    pub singulars: Vector,
    /// Present when the model was fitted from raw views.
    pub x_basis: Option<KernelBasis>,
    pub y_basis: Option<KernelBasis>,
}

impl KernelModel {
    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `Aᵀ k(x_new)` with out-of-sample centering, d×M.
    pub fn project_kernel_x(&self, x_new: &Matrix) -> Result<Matrix> {
        project(self.x_basis.as_ref(), &self.a, x_new, "X")
    }

    /// `Bᵀ k(y_new)`, d×M.
    pub fn project_kernel_y(&self, y_new: &Matrix) -> Result<Matrix> {
        project(self.y_basis.as_ref(), &self.b, y_new, "Y")
    }
}

fn project(basis: Option<&KernelBasis>, coef: &Matrix, data: &Matrix, view: &str) -> Result<Matrix> {
    let basis = basis.ok_or_else(|| {
        Error::InvalidParameter(format!(
            "model was fitted from Gram matrices and has no {view} training data"
        ))
    })?;
    Ok(coef.transpose() * basis.centered_cross(data)?)
}

/// Per-dataset precomputation for kernel fits across many `(γ, ε)` cells.
#[derive(Debug, Clone)]
pub struct GkccaProblem {
    pair: GramPair,
    x_basis: Option<KernelBasis>,
    y_basis: Option<KernelBasis>,
}

impl GkccaProblem {
    /// From centered kernel matrices.
    pub fn new<G: GraphOperator + ?Sized>(kx: &Matrix, ky: &Matrix, graph: Option<&G>) -> Result<Self> {
        Ok(GkccaProblem {
            pair: GramPair::new(kx, ky, graph)?,
            x_basis: None,
            y_basis: None,
        })
    }

    /// From raw views, building and centering both Grams.
    pub fn from_views<G: GraphOperator + ?Sized>(
        x_raw: &Matrix,
        y_raw: &Matrix,
        kernel_x: &MultiKernelSpec,
        kernel_y: &MultiKernelSpec,
        graph: Option<&G>,
    ) -> Result<Self> {
        if x_raw.ncols() != y_raw.ncols() {
            return Err(Error::dims(format!(
                "views have {} and {} samples",
                x_raw.ncols(),
                y_raw.ncols()
            )));
        }
        let (xb, kx) = KernelBasis::build(kernel_x, x_raw)?;
        let (yb, ky) = KernelBasis::build(kernel_y, y_raw)?;
        Ok(GkccaProblem {
            pair: GramPair::new(&kx, &ky, graph)?,
            x_basis: Some(xb),
            y_basis: Some(yb),
        })
    }

    pub fn n(&self) -> usize {
        self.pair.n()
    }

    pub fn fit(&self, gamma: f64, epsilon: f64, d: usize) -> Result<KernelModel> {
        check_gamma(gamma)?;
        check_epsilon(epsilon)?;
        let sol = self.pair.solve(gamma, epsilon, d)?;
        Ok(KernelModel {
            a: sol.a,
            b: sol.b,
            gamma,
            epsilon,
            singulars: sol.singulars,
            x_basis: self.x_basis.clone(),
            y_basis: self.y_basis.clone(),
        })
    }
}

/// Graph-regularized kernel CCA on centered kernels `kx`, `ky`.
pub fn fit_gkcca<G: GraphOperator + ?Sized>(
    kx: &Matrix,
    ky: &Matrix,
    graph: &G,
    gamma: f64,
    epsilon: f64,
    d: usize,
) -> Result<KernelModel> {
    check_epsilon(epsilon)?;
    GkccaProblem::new(kx, ky, Some(graph))?.fit(gamma, epsilon, d)
}

/// Objective `Tr(Aᵀ Kx (I − γL) Ky B)` of a kernel model.
pub fn gkcca_objective<G: GraphOperator + ?Sized>(
    model: &KernelModel,
    kx: &Matrix,
    ky: &Matrix,
    graph: &G,
) -> Result<f64> {
    dual_objective(kx, ky, &model.a, &model.b, model.gamma, graph)
}

//! Closed-form solver shared by the dual and kernel variants.
//!
//! Maximizes `Tr(Aᵀ Kx (I − γL) Ky B)` subject to
//! `Aᵀ(Kx² + εKx)A = I` and `Bᵀ(Ky² + εKy)B = I`.
//!
//! With `Kx = Qx Λx Qxᵀ` restricted to its numerically nonzero eigenspace,
//! the substitution `Ā = (Kx² + εKx)^{1/2} A` turns the problem into a
//! top-d SVD of
//!
//! ```text
//! C = diag(√(λx/(λx+ε))) Qxᵀ (I − γL) Qy diag(√(λy/(λy+ε)))
//! ```
//!
//! and `A = Qx diag(1/√(λx(λx+ε))) P`. Directions in the null space of a
//! Gram matrix touch neither the objective nor the constraints and are
//! dropped.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::GraphOperator;
use crate::matkit;
use crate::{Matrix, Vector};

/// Eigenbasis of one Gram matrix, truncated to its numerical rank.
#[derive(Debug, Clone)]
struct Eigenbasis {
    q: Matrix,
    lambda: Vector,
}

impl Eigenbasis {
    fn new(k: &Matrix, which: &'static str) -> Result<Self> {
        let eig = matkit::sym_eig(k)?;
        let rank = eig.numerical_rank();
        if rank < k.nrows() {
            log::debug!(
                "{which} Gram has numerical rank {rank} of {}; solving on its range",
                k.nrows()
            );
        }
        Ok(Eigenbasis {
            q: eig.eigenvectors.columns(0, rank).into_owned(),
            lambda: eig.eigenvalues.rows(0, rank).into_owned(),
        })
    }

    fn rank(&self) -> usize {
        self.lambda.len()
    }
}

/// Solution of one `(γ, ε, d)` cell.
#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub a: Matrix,
    pub b: Matrix,
    pub singulars: Vector,
}

/// Per-dataset precomputation: eigenbases and the projected graph.
#[derive(Debug, Clone)]
pub(crate) struct GramPair {
    n: usize,
    x: Eigenbasis,
    y: Eigenbasis,
    /// `Qxᵀ Qy`.
    cross: Matrix,
    /// `Qxᵀ L Qy`.
    graph_cross: Option<Matrix>,
}

pub(crate) fn check_gram(k: &Matrix, which: &str) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::dims(format!(
            "{which} Gram matrix is {}x{}, expected square",
            k.nrows(),
            k.ncols()
        )));
    }
    matkit::check_finite(k)?;
    matkit::check_symmetric(k)
}

impl GramPair {
    pub fn new<G: GraphOperator + ?Sized>(kx: &Matrix, ky: &Matrix, graph: Option<&G>) -> Result<Self> {
        check_gram(kx, "X")?;
        check_gram(ky, "Y")?;
        let n = kx.nrows();
        if ky.nrows() != n {
            return Err(Error::dims(format!(
                "Gram matrices have {} and {} samples",
                n,
                ky.nrows()
            )));
        }
        if let Some(g) = graph {
            if g.node_count() != n {
                return Err(Error::GraphSizeMismatch {
                    graph: g.node_count(),
                    samples: n,
                });
            }
        }
        let x = Eigenbasis::new(kx, "X")?;
        let y = Eigenbasis::new(ky, "Y")?;
        let cross = x.q.transpose() * &y.q;
        let graph_cross = graph.map(|g| x.q.transpose() * g.operator() * &y.q);
        Ok(GramPair {
            n,
            x,
            y,
            cross,
            graph_cross,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Accepts `ε = 0`; public entry points reject it before calling.
    pub fn solve(&self, gamma: f64, epsilon: f64, d: usize) -> Result<DualSolution> {
        if d > self.n {
            return Err(Error::RankRequestTooLarge {
                requested: d,
                available: self.n,
            });
        }
        for (which, basis) in [("X", &self.x), ("Y", &self.y)] {
            if d > basis.rank() {
                return Err(Error::SingularKernel {
                    which,
                    rank: basis.rank(),
                    requested: d,
                });
            }
        }
        let mut c = match &self.graph_cross {
            Some(g) if gamma != 0.0 => &self.cross - g * gamma,
            _ => self.cross.clone(),
        };
        let fx = self.x.lambda.map(|l| (l / (l + epsilon)).sqrt());
        let fy = self.y.lambda.map(|l| (l / (l + epsilon)).sqrt());
        for ((i, j), v) in indexed(&mut c) {
            *v *= fx[i] * fy[j];
        }
        let svd = matkit::top_d_svd(&c, d)?;
        let mut a = unwhiten(&self.x, epsilon, &svd.left);
        let mut b = unwhiten(&self.y, epsilon, &svd.right);
        for j in 0..d {
            matkit::fix_column_sign(&mut a, j, &mut [&mut b]);
        }
        Ok(DualSolution {
            a,
            b,
            singulars: svd.singulars,
        })
    }
}

fn indexed(m: &mut Matrix) -> impl Iterator<Item = ((usize, usize), &mut f64)> {
    let rows = m.nrows();
    m.iter_mut().enumerate().map(move |(k, v)| ((k % rows, k / rows), v))
}

/// `Q diag(1/√(λ(λ+ε))) P`.
fn unwhiten(basis: &Eigenbasis, epsilon: f64, p: &Matrix) -> Matrix {
    let mut scaled = p.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        let l = basis.lambda[i];
        row.scale_mut(1.0 / (l * (l + epsilon)).sqrt());
    }
    &basis.q * scaled
}

/// `Tr(Aᵀ Kx (I − γL) Ky B)`.
pub fn dual_objective<G: GraphOperator + ?Sized>(
    kx: &Matrix,
    ky: &Matrix,
    a: &Matrix,
    b: &Matrix,
    gamma: f64,
    graph: &G,
) -> Result<f64> {
    let n = kx.nrows();
    if kx.shape() != (n, n) || ky.shape() != (n, n) || a.nrows() != n || b.nrows() != n || a.ncols() != b.ncols() {
        return Err(Error::dims(format!(
            "Kx {:?}, Ky {:?}, A {:?}, B {:?} are inconsistent",
            kx.shape(),
            ky.shape(),
            a.shape(),
            b.shape()
        )));
    }
    if graph.node_count() != n {
        return Err(Error::GraphSizeMismatch {
            graph: graph.node_count(),
            samples: n,
        });
    }
    let ea = kx * a;
    let eb = ky * b;
    let mut value = (ea.transpose() * &eb).trace();
    if gamma != 0.0 {
        value -= gamma * (ea.transpose() * graph.operator() * &eb).trace();
    }
    Ok(value)
}

/// `max |Aᵀ(K² + εK)A − I|`, the violation of the dual whitening constraint.
pub fn constraint_residual(k: &Matrix, a: &Matrix, epsilon: f64) -> f64 {
    let ka = k * a;
    let m = ka.transpose() * &ka + (a.transpose() * &ka) * epsilon;
    let eye = DMatrix::<f64>::identity(a.ncols(), a.ncols());
    (m - eye).amax()
}

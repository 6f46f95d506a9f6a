//! Common-source graphs: adjacency construction, degrees, Laplacian and
//! spectral filters of the Laplacian.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matkit::{self, RANK_TOL};
use crate::{ClassId, Matrix, Vector};

/// Anything that can stand in for `L_G` inside a solver.
pub trait GraphOperator {
    fn node_count(&self) -> usize;
    /// Symmetric N×N matrix used where the solvers write `L_G`.
    fn operator(&self) -> &Matrix;
}

/// Weighted undirected graph over the N common sources.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceGraph {
    weights: Matrix,
    degrees: Vector,
    laplacian: Matrix,
}

impl SourceGraph {
    /// Graph with no edges; its Laplacian is the zero matrix.
    pub fn empty(n: usize) -> Self {
        SourceGraph {
            weights: DMatrix::zeros(n, n),
            degrees: DVector::zeros(n),
            laplacian: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn degrees(&self) -> &Vector {
        &self.degrees
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Number of undirected edges with nonzero weight.
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.weights[(i, j)] != 0.0)
            .count()
    }
}

impl GraphOperator for SourceGraph {
    fn node_count(&self) -> usize {
        self.n()
    }

    fn operator(&self) -> &Matrix {
        &self.laplacian
    }
}

/// Builds `L_G = D − W` from a symmetric adjacency.
///
/// The diagonal of `W` is dropped; a self-loop leaves `D − W` unchanged.
pub fn laplacian(w: &Matrix) -> Result<SourceGraph> {
    matkit::check_symmetric(w)?;
    matkit::check_finite(w)?;
    let n = w.nrows();
    let mut weights = matkit::symmetrize(w);
    for i in 0..n {
        weights[(i, i)] = 0.0;
    }
    let degrees = DVector::from_iterator(n, (0..n).map(|i| weights.row(i).sum()));
    let mut lap = -weights.clone();
    for i in 0..n {
        lap[(i, i)] = degrees[i];
    }
    Ok(SourceGraph {
        weights,
        degrees,
        laplacian: lap,
    })
}

fn check_classes(labels: &[ClassId], n: usize, k: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::dims(format!("{} labels for {} samples", labels.len(), n)));
    }
    if k == 0 {
        return Err(Error::InvalidNeighborCount);
    }
    let mut sizes: BTreeMap<ClassId, usize> = BTreeMap::new();
    for &l in labels {
        *sizes.entry(l).or_default() += 1;
    }
    for (&class, &size) in &sizes {
        if size < k + 1 {
            return Err(Error::ClassTooSmall {
                class,
                size,
                required: k + 1,
            });
        }
    }
    Ok(())
}

/// For every node, its `k` nearest same-class nodes under `dist`
/// (smaller is nearer; ties go to the lower index).
fn class_neighborhoods(labels: &[ClassId], k: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<Vec<usize>> {
    let n = labels.len();
    (0..n)
        .map(|j| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&i| i != j && labels[i] == labels[j])
                .map(|i| (dist(i, j), i))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.into_iter().take(k).map(|(_, i)| i).collect()
        })
        .collect()
}

/// `w_ij = value(i, j)` whenever i is a neighbor of j or j of i.
fn or_rule_adjacency(n: usize, hoods: &[Vec<usize>], value: impl Fn(usize, usize) -> f64) -> Matrix {
    let mut linked = vec![false; n * n];
    for (j, hood) in hoods.iter().enumerate() {
        for &i in hood {
            linked[i * n + j] = true;
            linked[j * n + i] = true;
        }
    }
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if linked[i * n + j] {
                let v = value(i, j);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    w
}

/// Cosine-similarity graph restricted to same-class k-nearest neighbors.
///
/// `s` holds the stacked sources as columns. Neighborhoods use Euclidean
/// distance between columns; negative cosines are kept as they are.
pub fn cosine_class_graph(s: &Matrix, labels: &[ClassId], k: usize) -> Result<SourceGraph> {
    let n = s.ncols();
    check_classes(labels, n, k)?;
    matkit::check_finite(s)?;
    let norms: Vec<f64> = (0..n).map(|i| s.column(i).norm()).collect();
    if let Some(index) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroNormSample { index });
    }
    let hoods = class_neighborhoods(labels, k, |i, j| (s.column(i) - s.column(j)).norm_squared());
    let w = or_rule_adjacency(n, &hoods, |i, j| s.column(i).dot(&s.column(j)) / (norms[i] * norms[j]));
    laplacian(&w)
}

/// Kernel-similarity graph: neighbors ranked by descending kernel value,
/// edge weights copied from `ks`.
pub fn kernel_class_graph(ks: &Matrix, labels: &[ClassId], k1: usize) -> Result<SourceGraph> {
    matkit::check_symmetric(ks)?;
    let n = ks.nrows();
    check_classes(labels, n, k1)?;
    let ks = matkit::symmetrize(ks);
    let hoods = class_neighborhoods(labels, k1, |i, j| -ks[(i, j)]);
    let w = or_rule_adjacency(n, &hoods, |i, j| ks[(i, j)]);
    laplacian(&w)
}

/// Scalar map applied to the Laplacian spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFilter {
    Identity,
    /// `r(λ) = λ^p`, `p > 0`.
    Power(f64),
    /// `r(λ) = exp(t·λ)`, `t > 0`.
    Exponential(f64),
}

impl SpectralFilter {
    fn validate(&self) -> Result<()> {
        match *self {
            SpectralFilter::Identity => Ok(()),
            SpectralFilter::Power(p) if p > 0.0 && p.is_finite() => Ok(()),
            SpectralFilter::Exponential(t) if t > 0.0 && t.is_finite() => Ok(()),
            other => Err(Error::UnsupportedFilter(other.to_string())),
        }
    }
}

impl fmt::Display for SpectralFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralFilter::Identity => write!(f, "identity"),
            SpectralFilter::Power(p) => write!(f, "power:{p}"),
            SpectralFilter::Exponential(t) => write!(f, "exp:{t}"),
        }
    }
}

impl FromStr for SpectralFilter {
    type Err = Error;

    /// Accepts `identity`, `power:<p>` and `exp:<t>`.
    fn from_str(s: &str) -> Result<Self> {
        let (tag, arg) = match s.split_once(':') {
            Some((t, a)) => (t.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let parse = |a: Option<&str>| -> Result<f64> {
            a.and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::UnsupportedFilter(s.to_string()))
        };
        let filter = match tag {
            "identity" if arg.is_none() => SpectralFilter::Identity,
            "power" => SpectralFilter::Power(parse(arg)?),
            "exp" | "exponential" => SpectralFilter::Exponential(parse(arg)?),
            _ => return Err(Error::UnsupportedFilter(s.to_string())),
        };
        filter.validate()?;
        Ok(filter)
    }
}

/// `Σ r(λ_i) u_i u_iᵀ` over the Laplacian eigenpairs.
///
/// Power filters need a positive semidefinite Laplacian; eigenvalues within
/// the rank tolerance of zero are clamped, clearly negative ones are rejected.
pub fn spectral_filter(graph: &SourceGraph, filter: SpectralFilter) -> Result<Matrix> {
    filter.validate()?;
    let eig = matkit::sym_eig(graph.laplacian())?;
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if let SpectralFilter::Power(_) = filter {
        if let Some(&neg) = eig.eigenvalues.iter().find(|&&l| l < -RANK_TOL * scale.max(1.0)) {
            return Err(Error::UnsupportedFilter(format!(
                "{filter} on an indefinite Laplacian (eigenvalue {neg:.3e})"
            )));
        }
    }
    Ok(match filter {
        SpectralFilter::Identity => eig.reconstruct_with(|l| l),
        SpectralFilter::Power(p) => eig.reconstruct_with(|l| l.max(0.0).powf(p)),
        SpectralFilter::Exponential(t) => eig.reconstruct_with(|l| (t * l).exp()),
    })
}

/// A filtered Laplacian usable anywhere a [`SourceGraph`] is accepted.
#[derive(Debug, Clone)]
pub struct FilteredLaplacian {
    pub filter: SpectralFilter,
    matrix: Matrix,
}

impl FilteredLaplacian {
    pub fn new(graph: &SourceGraph, filter: SpectralFilter) -> Result<Self> {
        Ok(FilteredLaplacian {
            filter,
            matrix: spectral_filter(graph, filter)?,
        })
    }
}

impl GraphOperator for FilteredLaplacian {
    fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    fn operator(&self) -> &Matrix {
        &self.matrix
    }
}

/// Writes the nonzero edges as `i,j,w` lines (0-based, `i < j`, each edge once).
pub fn write_edges(graph: &SourceGraph, mut out: impl Write) -> Result<()> {
    let n = graph.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = graph.weights[(i, j)];
            if w != 0.0 {
                writeln!(out, "{i},{j},{w:.16e}")?;
            }
        }
    }
    Ok(())
}

/// Reads an edge list written by [`write_edges`] into an `n`-node graph.
/// Blank lines and `#` comments are skipped.
pub fn read_edges(input: impl BufRead, n: usize) -> Result<SourceGraph> {
    let mut w = DMatrix::zeros(n, n);
    let mut seen = vec![false; n * n];
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::RaggedRows {
                line: lineno,
                expected: 3,
                found: fields.len(),
            });
        }
        let index = |col: usize| -> Result<usize> {
            let v: usize = fields[col].parse().map_err(|_| Error::Parse {
                line: lineno,
                column: col + 1,
                message: format!("invalid node index {:?}", fields[col]),
            })?;
            if v >= n {
                return Err(Error::Format {
                    line: lineno,
                    message: format!("node index {v} out of range for {n} nodes"),
                });
            }
            Ok(v)
        };
        let (a, b) = (index(0)?, index(1)?);
        let weight: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            column: 3,
            message: format!("invalid weight {:?}", fields[2]),
        })?;
        if !weight.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                column: 3,
                message: "weight is not finite".into(),
            });
        }
        if a == b {
            return Err(Error::Format {
                line: lineno,
                message: format!("self-loop on node {a}"),
            });
        }
        let (i, j) = (a.min(b), a.max(b));
        if std::mem::replace(&mut seen[i * n + j], true) {
            return Err(Error::Format {
                line: lineno,
                message: format!("edge ({i}, {j}) listed twice"),
            });
        }
        w[(i, j)] = weight;
        w[(j, i)] = weight;
    }
    laplacian(&w)
}

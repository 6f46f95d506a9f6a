//! Independent oracles shared by the integration suites.
//!
//! Nothing here calls the solvers under test: whitening goes through
//! Cholesky factors, top singular pairs through power iteration, and the
//! dual eigenproblem through a dense nonsymmetric Schur decomposition.

#![allow(dead_code)]

use std::collections::HashMap;

use gcca_core::graph::{laplacian, SourceGraph};
use gcca_core::{ClassId, Matrix, Vector};
use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Two views sharing a `latent`-dimensional signal plus independent noise.
pub fn correlated_views(rng: &mut impl Rng, dx: usize, dy: usize, n: usize, latent: usize) -> (Matrix, Matrix) {
    let s = gaussian(rng, latent, n);
    let x = gaussian(rng, dx, latent) * &s + gaussian(rng, dx, n) * 0.7;
    let y = gaussian(rng, dy, latent) * &s + gaussian(rng, dy, n) * 0.7;
    (x, y)
}

/// Symmetric nonnegative weights with roughly `density` of pairs linked.
pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64) -> SourceGraph {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                let v = rng.random::<f64>();
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    laplacian(&w).unwrap()
}

pub fn covariance(a: &Matrix, b: &Matrix) -> Matrix {
    a * b.transpose() / a.ncols() as f64
}

pub fn center_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / row.len() as f64;
        row.add_scalar_mut(-mean);
    }
    out
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (a - b).amax()
}

/// `G (Gᵀ M G)^{-1/2}` realized as `G L⁻ᵀ` for the Cholesky factor of
/// `Gᵀ M G`, so the result `Z` satisfies `Zᵀ M Z = I`.
pub fn whiten_against(g: &Matrix, m: &Matrix) -> Matrix {
    let gram = g.transpose() * m * g;
    let gram = (&gram + gram.transpose()) * 0.5;
    let l = gram.cholesky().expect("random draw spans enough of M").unpack();
    let linv_t = l.try_inverse().unwrap().transpose();
    g * linv_t
}

/// Random point satisfying `Zᵀ M Z = I`.
pub fn random_feasible(rng: &mut impl Rng, m: &Matrix, d: usize) -> Matrix {
    whiten_against(&gaussian(rng, m.nrows(), d), m)
}

/// `M^{-1/2}` from a Cholesky factor: returns `L⁻¹` with `L⁻¹ M L⁻ᵀ = I`.
pub fn cholesky_whitener(m: &Matrix) -> Matrix {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky().expect("SPD").l().try_inverse().unwrap()
}

/// Top singular triplet by power iteration on `CᵀC`.
pub fn power_top_pair(c: &Matrix, seed: u64) -> (f64, Vector, Vector) {
    let mut g = rng(seed);
    let mut v = DVector::from_fn(c.ncols(), |_, _| g.sample::<f64, _>(StandardNormal));
    v /= v.norm();
    let ctc = c.transpose() * c;
    let mut prev = 0.0;
    for _ in 0..100_000 {
        let w = &ctc * &v;
        let lam = w.norm();
        v = w / lam;
        if (lam - prev).abs() <= 1e-15 * lam {
            break;
        }
        prev = lam;
    }
    let cv = c * &v;
    let s = cv.norm();
    (s, cv / s, v)
}

/// Standard CCA by the block pencil `[0 Σxy; Σyx 0] w = ρ blkdiag(Σx, Σy) w`,
/// reduced with the Cholesky factor of the right-hand side.
/// Returns `(ρ, U, V)` for the leading `d` pairs, each pair Σ-normalized.
pub fn block_cca_oracle(x: &Matrix, y: &Matrix, d: usize) -> (Vec<f64>, Matrix, Matrix) {
    let (dx, dy) = (x.nrows(), y.nrows());
    let xc = center_rows(x);
    let yc = center_rows(y);
    let sxx = covariance(&xc, &xc);
    let syy = covariance(&yc, &yc);
    let sxy = covariance(&xc, &yc);
    let m = dx + dy;
    let mut a = DMatrix::zeros(m, m);
    a.view_mut((0, dx), (dx, dy)).copy_from(&sxy);
    a.view_mut((dx, 0), (dy, dx)).copy_from(&sxy.transpose());
    let mut b = DMatrix::zeros(m, m);
    b.view_mut((0, 0), (dx, dx)).copy_from(&sxx);
    b.view_mut((dx, dx), (dy, dy)).copy_from(&syy);
    let linv = cholesky_whitener(&b);
    let red = &linv * a * linv.transpose();
    let red = (&red + red.transpose()) * 0.5;
    let eig = SymmetricEigen::new(red);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut u = DMatrix::zeros(dx, d);
    let mut v = DMatrix::zeros(dy, d);
    let mut rho = Vec::new();
    for (k, &idx) in order.iter().take(d).enumerate() {
        let w = linv.transpose() * eig.eigenvectors.column(idx);
        let wx = w.rows(0, dx).into_owned();
        let wy = w.rows(dx, dy).into_owned();
        u.set_column(k, &(&wx / wx.dot(&(&sxx * &wx)).sqrt()));
        v.set_column(k, &(&wy / wy.dot(&(&syy * &wy)).sqrt()));
        rho.push(eig.eigenvalues[idx]);
    }
    (rho, u, v)
}

/// Max over columns of `min(|a − b|, |a + b|)`: agreement up to column sign.
pub fn signless_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (0..a.ncols())
        .map(|j| {
            let p = (a.column(j) - b.column(j)).amax();
            let q = (a.column(j) + b.column(j)).amax();
            p.min(q)
        })
        .fold(0.0, f64::max)
}

/// Largest principal angle between the column spaces of `a` and `b`.
pub fn max_principal_angle(a: &Matrix, b: &Matrix) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let s = SVD::new(qa.transpose() * qb, false, false).singular_values;
    let min_cos = s.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    min_cos.acos()
}

/// Leading `d` solutions of the dual eigenproblem
/// `(Kx+εI)⁻¹ M Ky (Ky+εI)⁻¹ M Kx α = λ² α`, `M = I − γL`, from a dense
/// nonsymmetric Schur decomposition. Each α is scaled so that
/// `αᵀ(Kx² + εKx)α = 1`; returns `(λ², Kx·α)`.
pub fn dual_eigen_oracle(kx: &Matrix, ky: &Matrix, lap: &Matrix, gamma: f64, eps: f64, d: usize) -> (Vec<f64>, Matrix) {
    let n = kx.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let m = &eye - lap * gamma;
    let rx = (kx + &eye * eps).try_inverse().unwrap();
    let ry = (ky + &eye * eps).try_inverse().unwrap();
    let op = rx * &m * ky * ry * &m * kx;
    let mut eig: Vec<f64> = op.clone().schur().complex_eigenvalues().iter().map(|c| c.re).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let mut emb = DMatrix::zeros(n, d);
    let metric = kx * kx + kx * eps;
    for k in 0..d {
        let shifted = &op - &eye * eig[k];
        let svd = SVD::new(shifted, false, true);
        let vt = svd.v_t.unwrap();
        let idx = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let mut alpha = vt.row(idx).transpose();
        alpha /= alpha.dot(&(&metric * &alpha)).sqrt();
        emb.set_column(k, &(kx * alpha));
    }
    (eig.into_iter().take(d).collect(), emb)
}

/// Exhaustive-sort kNN: full sort by (distance, index), plain counting vote,
/// ties resolved toward the class met first in the sorted list.
pub fn knn_oracle(train: &Matrix, labels: &[ClassId], test: &Matrix, k: usize) -> Vec<ClassId> {
    (0..test.ncols())
        .map(|j| {
            let mut all: Vec<(f64, usize)> = (0..train.ncols())
                .map(|i| ((train.column(i) - test.column(j)).norm_squared(), i))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let top = &all[..k];
            let mut counts: HashMap<ClassId, usize> = HashMap::new();
            for &(_, i) in top {
                *counts.entry(labels[i]).or_default() += 1;
            }
            let best = *counts.values().max().unwrap();
            top.iter().map(|&(_, i)| labels[i]).find(|c| counts[c] == best).unwrap()
        })
        .collect()
}

/// Symmetric PSD square root via a direct eigendecomposition.
pub fn psd_sqrt(k: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new((k + k.transpose()) * 0.5);
    let mut q = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        q.column_mut(j).scale_mut(l.max(0.0).sqrt());
    }
    q * eig.eigenvectors.transpose()
}

pub fn min_eigenvalue(k: &Matrix) -> f64 {
    SymmetricEigen::new((k + k.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

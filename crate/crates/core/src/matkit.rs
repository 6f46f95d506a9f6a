//! Dense symmetric and rectangular matrix kernels shared by every solver.
//!
//! All routines are pure functions of their inputs. Matrices declared
//! symmetric are replaced by `(M + Mᵀ)/2` before decomposition, and every
//! returned eigen/singular vector follows one sign convention: its
//! largest-magnitude entry is positive, ties going to the lowest index.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues at or below `RANK_TOL * λ_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SymEigResult {
    pub eigenvalues: Vector,
    /// Orthonormal eigenvectors stored as columns, aligned with `eigenvalues`.
    pub eigenvectors: Matrix,
}

impl SymEigResult {
    /// Number of eigenvalues above the relative rank tolerance.
    pub fn numerical_rank(&self) -> usize {
        let max = self.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        if max <= 0.0 {
            return 0;
        }
        self.eigenvalues.iter().filter(|&&l| l > RANK_TOL * max).count()
    }

    /// Rebuilds `Σ f(λ_i) v_i v_iᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.eigenvectors.nrows();
        let mut scaled = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let s = f(l);
            scaled.column_mut(j).scale_mut(s);
        }
        let out = &scaled * self.eigenvectors.transpose();
        debug_assert_eq!(out.nrows(), n);
        symmetrize(&out)
    }
}

/// Top-`d` singular triplets, singular values descending.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// p×d, orthonormal columns.
    pub left: Matrix,
    pub singulars: Vector,
    /// q×d, orthonormal columns.
    pub right: Matrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut l = self.left.clone();
        for (j, &s) in self.singulars.iter().enumerate() {
            l.column_mut(j).scale_mut(s);
        }
        l * self.right.transpose()
    }
}

/// Largest absolute asymmetry `max |m_ij - m_ji|`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Rejects non-square or visibly asymmetric input.
pub fn check_symmetric(m: &Matrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * max_abs(m).max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Flips `col` in place so its largest-magnitude entry is positive.
/// Returns whether a flip happened.
pub fn fix_sign(col: &mut [f64]) -> bool {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = i;
        }
    }
    if !col.is_empty() && col[best] < 0.0 {
        col.iter_mut().for_each(|v| *v = -*v);
        true
    } else {
        false
    }
}

/// Applies [`fix_sign`] to column `j` of `primary` and mirrors the flip on
/// the same column of every matrix in `partners`.
pub fn fix_column_sign(primary: &mut Matrix, j: usize, partners: &mut [&mut Matrix]) {
    let flipped = fix_sign(primary.column_mut(j).as_mut_slice());
    if flipped {
        for p in partners.iter_mut() {
            p.column_mut(j).neg_mut();
        }
    }
}

/// Symmetric eigendecomposition with descending eigenvalues and fixed signs.
pub fn sym_eig(m: &Matrix) -> Result<SymEigResult> {
    check_symmetric(m)?;
    check_finite(m)?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the decomposition's own order among exact ties.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        fix_sign(eigenvectors.column_mut(dst).as_mut_slice());
    }
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

fn ensure_positive_definite(eig: &SymEigResult) -> Result<()> {
    let n = eig.eigenvalues.len();
    if n == 0 {
        return Ok(());
    }
    let max = eig.eigenvalues[0];
    let min = eig.eigenvalues[n - 1];
    if max <= 0.0 || min <= RANK_TOL * max {
        return Err(Error::SingularMatrix {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(())
}

/// Symmetric inverse square root `R = (M + jitter·I)^{-1/2}`, so `R·M·R = I`
/// when `jitter = 0`.
pub fn sym_inv_sqrt(m: &Matrix, jitter: f64) -> Result<Matrix> {
    if jitter < 0.0 || !jitter.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "jitter must be a nonnegative finite value, got {jitter}"
        )));
    }
    check_symmetric(m)?;
    let mut shifted = symmetrize(m);
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += jitter;
    }
    let eig = sym_eig(&shifted)?;
    ensure_positive_definite(&eig)?;
    Ok(eig.reconstruct_with(|l| 1.0 / l.sqrt()))
}

/// Leading `d` singular triplets of `c`.
///
/// The sign convention is applied to each left vector and mirrored on the
/// matching right vector, so `left·diag(s)·rightᵀ` is unaffected.
pub fn top_d_svd(c: &Matrix, d: usize) -> Result<TruncatedSvd> {
    let (p, q) = c.shape();
    let available = p.min(q);
    if d > available {
        return Err(Error::RankRequestTooLarge {
            requested: d,
            available,
        });
    }
    check_finite(c)?;
    if d == 0 {
        return Ok(TruncatedSvd {
            left: DMatrix::zeros(p, 0),
            singulars: DVector::zeros(0),
            right: DMatrix::zeros(q, 0),
        });
    }
    let svd = SVD::new(c.clone(), true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let mut left = DMatrix::zeros(p, d);
    let mut right = DMatrix::zeros(q, d);
    let mut singulars = DVector::zeros(d);
    for (dst, &src) in order.iter().take(d).enumerate() {
        left.set_column(dst, &u.column(src));
        right.set_column(dst, &v_t.row(src).transpose());
        singulars[dst] = s[src].max(0.0);
        fix_column_sign(&mut left, dst, &mut [&mut right]);
    }
    Ok(TruncatedSvd { left, singulars, right })
}

/// Symmetric-definite generalized eigenproblem `A·w = λ·B·w`.
///
/// Solved through the congruence `B^{-1/2} A B^{-1/2}`; eigenvectors are
/// returned B-orthonormal (`WᵀBW = I`), eigenvalues descending.
pub fn generalized_eig_spd(a: &Matrix, b: &Matrix) -> Result<SymEigResult> {
    if a.shape() != b.shape() {
        return Err(Error::dims(format!(
            "pencil matrices differ in shape: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    check_symmetric(a)?;
    let r = sym_inv_sqrt(b, 0.0)?;
    let reduced = symmetrize(&(&r * symmetrize(a) * &r));
    let eig = sym_eig(&reduced)?;
    let mut w = &r * &eig.eigenvectors;
    for j in 0..w.ncols() {
        fix_sign(w.column_mut(j).as_mut_slice());
    }
    Ok(SymEigResult {
        eigenvalues: eig.eigenvalues,
        eigenvectors: w,
    })
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inv_sqrt_identity_and_diagonal() {
        let r = sym_inv_sqrt(&DMatrix::identity(3, 3), 0.0).unwrap();
        assert!(max_abs_diff(&r, &DMatrix::identity(3, 3)) < 1e-15);

        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let r = sym_inv_sqrt(&m, 0.0).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0 / 3.0]));
        assert!(max_abs_diff(&r, &expected) < 1e-15);
    }

    #[test]
    fn inv_sqrt_random_spd_whitens() {
        let mut g = rng(11);
        let m = spd(&mut g, 8);
        let r = sym_inv_sqrt(&m, 0.0).unwrap();
        let whitened = &r * &m * &r;
        assert!(max_abs_diff(&whitened, &DMatrix::identity(8, 8)) < 1e-10);
        assert_eq!(asymmetry(&r), 0.0);
    }

    #[test]
    fn inv_sqrt_many_sizes_relative() {
        let mut g = rng(12);
        for trial in 0..100 {
            let n = 1 + (trial * 7) % 50;
            let m = spd(&mut g, n);
            let r = sym_inv_sqrt(&m, 0.0).unwrap();
            let err = max_abs_diff(&(&r * &m * &r), &DMatrix::identity(n, n));
            assert!(err < 1e-9, "n={n} err={err}");
        }
    }

    #[test]
    fn inv_sqrt_errors() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 1.0;
        assert!(matches!(sym_inv_sqrt(&m, 0.0), Err(Error::NotSymmetric { .. })));

        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            sym_inv_sqrt(&singular, 0.0),
            Err(Error::SingularMatrix { .. })
        ));
        // jitter rescues it
        let r = sym_inv_sqrt(&singular, 0.5).unwrap();
        let shifted = &singular + DMatrix::identity(2, 2) * 0.5;
        assert!(max_abs_diff(&(&r * shifted * &r), &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn svd_diagonal_and_rank_one() {
        let c = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let svd = top_d_svd(&c, 1).unwrap();
        assert!((svd.singulars[0] - 3.0).abs() < 1e-14);
        assert!((svd.left[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((svd.right[(0, 0)] - 1.0).abs() < 1e-14);

        let a = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let b = DVector::from_vec(vec![0.0, -1.0]);
        let c = &a * b.transpose();
        let svd = top_d_svd(&c, 1).unwrap();
        assert!((svd.singulars[0] - 1.0).abs() < 1e-14);
        let la = svd.left.column(0).dot(&a).abs();
        let rb = svd.right.column(0).dot(&b).abs();
        assert!((la - 1.0).abs() < 1e-14 && (rb - 1.0).abs() < 1e-14);
        // sign convention: largest entry of the left vector positive, pair consistent
        assert!(svd.left[(1, 0)] > 0.0);
        assert!(max_abs_diff(&svd.reconstruct(), &c) < 1e-14);
    }

    #[test]
    fn svd_matches_gram_eigen_oracle() {
        let mut g = rng(3);
        let c = gaussian(&mut g, 6, 4);
        let svd = top_d_svd(&c, 4).unwrap();
        let gram = c.transpose() * &c;
        let eig = sym_eig(&gram).unwrap();
        for i in 0..4 {
            let oracle = eig.eigenvalues[i].sqrt();
            assert!((svd.singulars[i] - oracle).abs() < 1e-9 * oracle);
            // right vectors are the Gram eigenvectors up to sign
            let dot = svd.right.column(i).dot(&eig.eigenvectors.column(i)).abs();
            assert!((dot - 1.0).abs() < 1e-9);
        }
        let lt = svd.left.transpose() * &svd.left;
        assert!(max_abs_diff(&lt, &DMatrix::identity(4, 4)) < 1e-12);
        assert!(max_abs_diff(&svd.reconstruct(), &c) < 1e-12);
    }

    #[test]
    fn svd_rank_request_too_large() {
        let c = DMatrix::<f64>::zeros(3, 2);
        assert!(matches!(
            top_d_svd(&c, 3),
            Err(Error::RankRequestTooLarge {
                requested: 3,
                available: 2
            })
        ));
    }

    #[test]
    fn svd_zero_singular_completion_is_orthonormal() {
        // rank one, ask for all three directions
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        let svd = top_d_svd(&c, 3).unwrap();
        assert!(svd.singulars[1].abs() < 1e-12 && svd.singulars[2].abs() < 1e-12);
        let lt = svd.left.transpose() * &svd.left;
        let rt = svd.right.transpose() * &svd.right;
        assert!(max_abs_diff(&lt, &DMatrix::identity(3, 3)) < 1e-12);
        assert!(max_abs_diff(&rt, &DMatrix::identity(3, 3)) < 1e-12);
    }

    #[test]
    fn geneig_trivial_cases() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let eig = generalized_eig_spd(&a, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[2.0, 1.0]);
        assert!((eig.eigenvectors[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((eig.eigenvectors[(0, 1)] - 1.0).abs() < 1e-15);

        let mut g = rng(5);
        let b = spd(&mut g, 5);
        let eig = generalized_eig_spd(&b, &b).unwrap();
        for l in eig.eigenvalues.iter() {
            assert!((l - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn geneig_residuals_and_b_orthonormality() {
        let mut g = rng(6);
        let s = gaussian(&mut g, 6, 6);
        let a = &s + s.transpose();
        let b = spd(&mut g, 6);
        let eig = generalized_eig_spd(&a, &b).unwrap();
        for i in 0..6 {
            let w = eig.eigenvectors.column(i);
            let res = &a * w - (&b * w) * eig.eigenvalues[i];
            assert!(res.amax() < 1e-9);
        }
        let wbw = eig.eigenvectors.transpose() * &b * &eig.eigenvectors;
        assert!(max_abs_diff(&wbw, &DMatrix::identity(6, 6)) < 1e-10);
        assert!(eig.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn geneig_rejects_indefinite_b() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(generalized_eig_spd(&a, &b), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn decompositions_are_deterministic() {
        let mut g = rng(8);
        let c = gaussian(&mut g, 7, 5);
        let s1 = top_d_svd(&c, 3).unwrap();
        let s2 = top_d_svd(&c, 3).unwrap();
        assert_eq!(s1.left, s2.left);
        assert_eq!(s1.singulars, s2.singulars);
        let m = spd(&mut g, 6);
        assert_eq!(sym_inv_sqrt(&m, 0.0).unwrap(), sym_inv_sqrt(&m, 0.0).unwrap());
    }

    #[test]
    fn sign_convention_ties_break_low_index() {
        let mut v = vec![-1.0, 1.0, 0.5];
        assert!(fix_sign(&mut v));
        assert_eq!(v, vec![1.0, -1.0, -0.5]);
        let mut v = vec![0.2, -0.3];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.2, 0.3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn geneig_congruence_invariance(seed in 0u64..1000, n in 2usize..7) {
            let mut g = rng(seed);
            let s = gaussian(&mut g, n, n);
            let a = &s + s.transpose();
            let b = spd(&mut g, n);
            let mut t = gaussian(&mut g, n, n);
            for i in 0..n { t[(i, i)] += 3.0; }
            let e1 = generalized_eig_spd(&a, &b).unwrap();
            let e2 = generalized_eig_spd(&(t.transpose() * &a * &t), &(t.transpose() * &b * &t)).unwrap();
            let scale = e1.eigenvalues.amax().max(1.0);
            for i in 0..n {
                prop_assert!((e1.eigenvalues[i] - e2.eigenvalues[i]).abs() < 1e-8 * scale);
            }
        }

        #[test]
        fn svd_trace_objective_equals_singular_sum(seed in 0u64..1000, p in 2usize..8, q in 2usize..8) {
            let mut g = rng(seed);
            let c = gaussian(&mut g, p, q);
            let d = p.min(q);
            let svd = top_d_svd(&c, d).unwrap();
            let trace = (svd.left.transpose() * &c * &svd.right).trace();
            prop_assert!((trace - svd.singulars.sum()).abs() < 1e-10 * svd.singulars.sum().max(1.0));
            prop_assert!(svd.singulars.iter().all(|&s| s >= 0.0));
            prop_assert!(svd.singulars.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }
}

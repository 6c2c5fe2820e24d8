//! Spectral decomposition of the running covariance and the null-space projector.
//!
//! The covariance is symmetric positive semidefinite, so its singular vectors are
//! its eigenvectors. A cyclic Jacobi solver is used: it is deterministic, keeps
//! eigenvectors orthonormal to machine precision, and resolves eigenvalues near
//! zero to within `eps · ‖C‖`, which is what the rank threshold needs.

use alloc::format;
use alloc::vec::Vec;

use crate::covariance::CovarianceAccumulator;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_SWEEPS: usize = 100;
const CONVERGENCE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub mat: Matrix,
    /// Number of retained eigenvectors, i.e. the dimension of the editable subspace.
    pub nullity: usize,
}

impl ProjectionMatrix {
    pub fn identity(d0: usize) -> Self {
        Self {
            mat: Matrix::identity(d0),
            nullity: d0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    /// Builds the projector straight from an accumulator.
    pub fn from_covariance(acc: &CovarianceAccumulator, rel_tol: f64) -> Result<Self> {
        null_space_projection(&spectral_decompose(acc)?, rel_tol)
    }

    /// Rebuilds a projector from its matrix alone, e.g. after deserialization.
    /// `nullity` is recovered as the rounded trace.
    pub fn from_matrix(mat: Matrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::dims("projection", "square matrix", format!("{}x{}", mat.rows(), mat.cols())));
        }
        let t = libm::round(mat.trace());
        let nullity = if t > 0.0 { t as usize } else { 0 };
        Ok(Self { mat, nullity })
    }
}

/// Eigendecomposition of the accumulator's covariance.
pub fn spectral_decompose(acc: &CovarianceAccumulator) -> Result<SpectralDecomposition> {
    symmetric_eigen(&acc.cov)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues come back sorted descending; each eigenvector is sign-normalized so
/// that its first non-negligible component is positive.
pub fn symmetric_eigen(c: &Matrix) -> Result<SpectralDecomposition> {
    if !c.is_square() {
        return Err(Error::dims("spectral_decompose", "square matrix", format!("{}x{}", c.rows(), c.cols())));
    }
    c.check_finite("covariance")?;
    let n = c.rows();
    let scale = c.max_abs();
    let asym = c.max_abs_diff(&c.transpose());
    if asym > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "covariance is not symmetric (max |C - Cᵀ| = {asym:e})"
        )));
    }

    let mut a = c.clone();
    a.symmetrize();
    let mut v = Matrix::identity(n);
    let frob = a.frobenius_norm();

    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= CONVERGENCE * frob {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                // Entries negligible against both diagonal entries are dropped once the
                // first few sweeps have run, so roundoff cannot stall convergence.
                let g = 100.0 * a[(p, q)].abs();
                if sweep > 3 && a[(p, p)].abs() + g == a[(p, p)].abs() && a[(q, q)].abs() + g == a[(q, q)].abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    let off = off_diagonal_norm(&a);
    if !converged && off > 1e-12 * frob {
        return Err(Error::NoConvergence {
            sweeps: MAX_SWEEPS,
            off_diagonal: off,
            frobenius: frob,
            max_abs: scale,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable: ties keep their original column order.
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(core::cmp::Ordering::Equal));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        canonicalize_sign(&mut col);
        eigenvectors.set_column(dst, &col)?;
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    libm::sqrt(s)
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_infinite() {
        0.0
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + libm::sqrt(theta * theta + 1.0))
    };
    if t == 0.0 {
        return;
    }
    let c = 1.0 / libm::sqrt(t * t + 1.0);
    let s = t * c;
    let n = a.rows();

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn canonicalize_sign(col: &mut [f64]) {
    let m = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return;
    }
    if let Some(first) = col.iter().find(|x| x.abs() > 1e-12 * m) {
        if *first < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Projector onto eigenvectors with `λ ≤ rel_tol · λ_max` (all of them when `λ_max ≤ 0`).
pub fn null_space_projection(decomp: &SpectralDecomposition, rel_tol: f64) -> Result<ProjectionMatrix> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::Config(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    let n = decomp.eigenvectors.rows();
    let lambda_max = decomp.eigenvalues.first().copied().unwrap_or(0.0);
    let retained: Vec<usize> = if lambda_max <= 0.0 {
        (0..n).collect()
    } else {
        let threshold = rel_tol * lambda_max;
        (0..n).filter(|&i| decomp.eigenvalues[i] <= threshold).collect()
    };

    let u = &decomp.eigenvectors;
    let mut mat = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = retained.iter().map(|&c| u[(i, c)] * u[(j, c)]).sum();
            mat[(i, j)] = s;
            mat[(j, i)] = s;
        }
    }
    Ok(ProjectionMatrix {
        mat,
        nullity: retained.len(),
    })
}

/// Number of eigenvalues strictly above `rel_tol · λ_max`.
pub fn numerical_rank(decomp: &SpectralDecomposition, rel_tol: f64) -> usize {
    let lambda_max = decomp.eigenvalues.first().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return 0;
    }
    decomp.eigenvalues.iter().filter(|&&l| l > rel_tol * lambda_max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(cov: Matrix) -> CovarianceAccumulator {
        CovarianceAccumulator { cov, count: 1 }
    }

    #[test]
    fn diagonal_input() {
        let d = spectral_decompose(&acc(Matrix::diag(&[2.0, 1.0, 0.0]))).unwrap();
        assert_eq!(d.eigenvalues, [2.0, 1.0, 0.0]);
        assert_eq!(d.eigenvectors, Matrix::identity(3));
    }

    #[test]
    fn unsorted_diagonal_is_sorted() {
        let d = spectral_decompose(&acc(Matrix::diag(&[0.0, 3.0, 1.0]))).unwrap();
        assert_eq!(d.eigenvalues, [3.0, 1.0, 0.0]);
        assert_eq!(d.eigenvectors.column(0), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_matrix_gives_identity_basis() {
        let d = spectral_decompose(&CovarianceAccumulator::empty(4)).unwrap();
        assert_eq!(d.eigenvalues, [0.0; 4]);
        assert_eq!(d.eigenvectors, Matrix::identity(4));
    }

    #[test]
    fn projection_keeps_zero_eigendirections() {
        let d = spectral_decompose(&acc(Matrix::diag(&[1.0, 0.0, 0.0]))).unwrap();
        let p = null_space_projection(&d, 1e-8).unwrap();
        assert_eq!(p.mat, Matrix::diag(&[0.0, 1.0, 1.0]));
        assert_eq!(p.nullity, 2);
    }

    #[test]
    fn full_rank_has_empty_null_space() {
        let p = ProjectionMatrix::from_covariance(&acc(Matrix::identity(3)), 1e-8).unwrap();
        assert_eq!(p.mat, Matrix::zeros(3, 3));
        assert_eq!(p.nullity, 0);
    }

    #[test]
    fn rejects_bad_rel_tol() {
        let d = spectral_decompose(&acc(Matrix::identity(2))).unwrap();
        for tol in [0.0, 1.0, 1.5, -1e-3, f64::NAN] {
            assert!(matches!(null_space_projection(&d, tol), Err(Error::Config(_))));
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let c = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(symmetric_eigen(&c), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn nullity_from_trace() {
        let p = ProjectionMatrix::from_matrix(Matrix::diag(&[1.0, 0.0, 1.0])).unwrap();
        assert_eq!(p.nullity, 2);
    }
}

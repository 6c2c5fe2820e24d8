//! LU factorization with partial pivoting and a few helpers built on it.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};

/// Packed `PA = LU` factorization of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    singular: bool,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dims("lu", "square matrix", format!("{}x{}", a.rows(), a.cols())));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let mut singular = false;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= f64::EPSILON * scale * n as f64 || pivot == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = t;
                }
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm, singular })
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `A x = b` in place.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.dim() {
            return Err(Error::dims("lu solve", format!("{} rows", self.dim()), format!("{} rows", b.rows())));
        }
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.column(j));
            out.set_column(j, &x)?;
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.dim()))
    }
}

/// 1-norm condition number `‖A‖₁·‖A⁻¹‖₁`, infinite for singular input.
///
/// Computed from an explicit inverse; matrices here are at most a few hundred wide.
pub fn condition_one(a: &Matrix, lu: &Lu) -> Result<f64> {
    if lu.is_singular() {
        return Ok(f64::INFINITY);
    }
    let inv = lu.inverse()?;
    let k = a.norm_one() * inv.norm_one();
    Ok(if k.is_finite() { k } else { f64::INFINITY })
}

/// Solves `X A = B` for `X` (i.e. `X = B A⁻¹`) without forming the inverse.
pub fn solve_right(a: &Matrix, b: &Matrix) -> Result<(Matrix, f64)> {
    if b.cols() != a.rows() {
        return Err(Error::dims(
            "solve_right",
            format!("rhs with {} columns", a.rows()),
            format!("{} columns", b.cols()),
        ));
    }
    let at = a.transpose();
    let lu = Lu::factor(&at)?;
    let cond = condition_one(&at, &lu)?;
    if lu.is_singular() {
        return Ok((Matrix::zeros(b.rows(), b.cols()), f64::INFINITY));
    }
    let xt = lu.solve(&b.transpose())?;
    Ok((xt.transpose(), cond))
}

/// Orthonormalizes columns by modified Gram-Schmidt with one reorthogonalization pass.
///
/// Fails if a column is numerically dependent on the previous ones.
pub fn orthonormalize_columns(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let mut v = a.column(j);
        let original = norm(&v);
        for _ in 0..2 {
            for q in &cols {
                let p = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
        }
        let nv = norm(&v);
        if nv <= 1e-10 * original.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidInput(format!("column {j} is linearly dependent")));
        }
        v.iter_mut().for_each(|x| *x /= nv);
        cols.push(v);
    }
    Matrix::from_columns(n, &cols)
}

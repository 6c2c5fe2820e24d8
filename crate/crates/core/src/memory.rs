//! The editable key→value matrix and the preserved-knowledge population it is fit to.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{condition_one, Lu};
use crate::matrix::Matrix;

/// Condition estimate above which an unregularized normal matrix counts as singular.
const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct AssociativeMemory {
    /// `d1 × d0`.
    pub weights: Matrix,
}

impl AssociativeMemory {
    pub fn new(weights: Matrix) -> Result<Self> {
        weights.check_finite("memory weights")?;
        Ok(Self { weights })
    }

    pub fn zeros(d1: usize, d0: usize) -> Self {
        Self {
            weights: Matrix::zeros(d1, d0),
        }
    }

    pub fn d0(&self) -> usize {
        self.weights.cols()
    }

    pub fn d1(&self) -> usize {
        self.weights.rows()
    }

    /// `W·k`.
    pub fn recall(&self, key: &[f64]) -> Result<Vec<f64>> {
        if key.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("recall key has non-finite entries".into()));
        }
        self.weights.matvec(key)
    }

    /// `W·K` for keys stored as columns.
    pub fn recall_batch(&self, keys: &Matrix) -> Result<Matrix> {
        self.weights.matmul(keys)
    }
}

/// Free-function form of [`AssociativeMemory::recall`].
pub fn recall(mem: &AssociativeMemory, key: &[f64]) -> Result<Vec<f64>> {
    mem.recall(key)
}

/// Keys whose outputs must survive every edit, with the outputs they were fit to.
#[derive(Debug, Clone, PartialEq)]
pub struct PreservationSet {
    /// `d0 × n0`.
    pub keys0: Matrix,
    /// `d1 × n0`.
    pub values0: Matrix,
}

impl PreservationSet {
    pub fn new(keys0: Matrix, values0: Matrix) -> Result<Self> {
        if keys0.cols() != values0.cols() {
            return Err(Error::dims(
                "preservation set",
                format!("{} value columns", keys0.cols()),
                format!("{}", values0.cols()),
            ));
        }
        if keys0.cols() == 0 {
            return Err(Error::InvalidInput("preservation set needs at least one key".into()));
        }
        keys0.check_finite("preservation keys")?;
        values0.check_finite("preservation values")?;
        Ok(Self { keys0, values0 })
    }

    pub fn n0(&self) -> usize {
        self.keys0.cols()
    }

    pub fn d0(&self) -> usize {
        self.keys0.rows()
    }

    pub fn d1(&self) -> usize {
        self.values0.rows()
    }

    /// `1e-4 · trace(K₀K₀ᵀ) / d0`.
    pub fn default_ridge(&self) -> f64 {
        let trace: f64 = self.keys0.as_slice().iter().map(|v| v * v).sum();
        1e-4 * trace / self.d0() as f64
    }
}

/// Ridge least-squares memorizer `W₀ = V₀K₀ᵀ(K₀K₀ᵀ + ridge·I)⁻¹`.
pub fn fit_initial_memory(ps: &PreservationSet, ridge: f64) -> Result<AssociativeMemory> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("ridge must be a finite nonnegative number, got {ridge}")));
    }
    let mut normal = ps.keys0.gram_rows();
    normal.add_diagonal(ridge);
    let rhs = ps.values0.matmul(&ps.keys0.transpose())?;

    // normal is symmetric, so W = rhs · normal⁻¹ solves normal · Wᵀ = rhsᵀ.
    let lu = Lu::factor(&normal)?;
    let cond = condition_one(&normal, &lu)?;
    if lu.is_singular() || cond > SINGULAR_CONDITION {
        return Err(Error::Singular {
            op: "fit_initial_memory",
            hint: "K0·K0ᵀ is not invertible; use ridge > 0",
        });
    }
    let weights = lu.solve(&rhs.transpose())?.transpose();
    AssociativeMemory::new(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_invertible_keys_are_exact() {
        let ps = PreservationSet::new(
            Matrix::identity(2),
            Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]),
        )
        .unwrap();
        let w = fit_initial_memory(&ps, 0.0).unwrap();
        assert!(w.weights.max_abs_diff(&ps.values0) < 1e-15);
        assert_eq!(w.recall(&[1.0, 0.0]).unwrap(), [1.0, 3.0]);
    }

    #[test]
    fn heavy_ridge_shrinks_to_zero() {
        let keys = Matrix::from_rows(&[&[1.0, 0.5, -0.3], &[0.2, -1.0, 0.7]]);
        let values = Matrix::from_rows(&[&[2.0, -1.0, 0.5]]);
        let ps = PreservationSet::new(keys.clone(), values.clone()).unwrap();
        let w = fit_initial_memory(&ps, 1e9).unwrap();
        let scale = values.matmul(&keys.transpose()).unwrap().max_abs();
        assert!(w.weights.max_abs() <= 1e-6 * scale);
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let keys = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 0.0]]);
        let ps = PreservationSet::new(keys, Matrix::from_rows(&[&[1.0, 1.0]])).unwrap();
        let err = fit_initial_memory(&ps, 0.0).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
        assert!(err.is_numerical());
        assert!(fit_initial_memory(&ps, 1e-3).is_ok());
    }

    #[test]
    fn recall_basics() {
        let id = AssociativeMemory::new(Matrix::identity(2)).unwrap();
        assert_eq!(id.recall(&[1.0, 0.0]).unwrap(), [1.0, 0.0]);
        let zero = AssociativeMemory::zeros(3, 2);
        assert_eq!(zero.recall(&[0.3, -7.0]).unwrap(), [0.0; 3]);
        assert!(matches!(id.recall(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn preservation_set_validation() {
        assert!(PreservationSet::new(Matrix::zeros(2, 3), Matrix::zeros(1, 2)).is_err());
        assert!(PreservationSet::new(Matrix::zeros(2, 0), Matrix::zeros(1, 0)).is_err());
    }
}

//! Uncentered key covariance, per batch and running over the edit stream.
//!
//! Keys are stored as columns of a `d0 × n` matrix, so the covariance of a batch
//! is the `d0 × d0` matrix `K·Kᵀ / n`. Its null space is exactly the set of
//! directions orthogonal to every key in the batch.

use alloc::format;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAccumulator {
    pub cov: Matrix,
    /// Number of key vectors absorbed so far.
    pub count: u64,
}

impl CovarianceAccumulator {
    pub fn empty(d0: usize) -> Self {
        Self {
            cov: Matrix::zeros(d0, d0),
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.cov.rows()
    }

    /// Covariance of a single batch of keys (columns of `keys`).
    pub fn from_keys(keys: &Matrix) -> Result<Self> {
        keys.check_finite("keys")?;
        let n = keys.cols();
        if n == 0 {
            return Ok(Self::empty(keys.rows()));
        }
        let mut cov = keys.gram_rows().scale(1.0 / n as f64);
        cov.symmetrize();
        Ok(Self { cov, count: n as u64 })
    }

    /// Folds `batch` into `self` with count-weighted averaging.
    pub fn update_running(&self, batch: &CovarianceAccumulator) -> Result<Self> {
        if self.dim() != batch.dim() {
            return Err(Error::dims(
                "update_running",
                format!("d0 = {}", self.dim()),
                format!("d0 = {}", batch.dim()),
            ));
        }
        if batch.count == 0 {
            return Ok(self.clone());
        }
        let total = self.count + batch.count;
        let w_prev = self.count as f64 / total as f64;
        let w_batch = batch.count as f64 / total as f64;
        let mut cov = self.cov.scale(w_prev).add(&batch.cov.scale(w_batch))?;
        cov.symmetrize();
        Ok(Self { cov, count: total })
    }

    /// Convenience: `update_running(from_keys(keys))`.
    pub fn absorb_keys(&self, keys: &Matrix) -> Result<Self> {
        if keys.rows() != self.dim() {
            return Err(Error::dims(
                "absorb_keys",
                format!("keys with {} rows", self.dim()),
                format!("{} rows", keys.rows()),
            ));
        }
        self.update_running(&Self::from_keys(keys)?)
    }
}

/// Free-function form of [`CovarianceAccumulator::from_keys`].
pub fn covariance_from_keys(keys: &Matrix) -> Result<CovarianceAccumulator> {
    CovarianceAccumulator::from_keys(keys)
}

/// Free-function form of [`CovarianceAccumulator::update_running`].
pub fn update_running(prev: &CovarianceAccumulator, batch: &CovarianceAccumulator) -> Result<CovarianceAccumulator> {
    prev.update_running(batch)
}

#![allow(dead_code)]

use nalgebra::DMatrix;
use nsedit_core::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Random orthonormal `n × k` basis via nalgebra's QR.
pub fn orthonormal(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Matrix {
    let g = to_na(&gaussian(rng, n, k));
    from_na(&g.qr().q())
}

/// `B·diag(λ)·Bᵀ` for an orthonormal `B`.
pub fn psd_from_spectrum(basis: &Matrix, spectrum: &[f64]) -> Matrix {
    let b = to_na(basis);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(spectrum));
    let mut c = &b * d * b.transpose();
    c = (&c + c.transpose()) * 0.5;
    from_na(&c)
}

//! Binary checkpoints of an [`EditorState`].
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `LGED` |
//! | 2 | `u16` version, currently 1 |
//! | 8 × 4 | `u64` d1, d0, step, count |
//! | 8 · d1 · d0 | `W`, row-major `f64` |
//! | 8 · d0 · d0 | running covariance, row-major `f64` |
//! | 8 · d0 · d0 | projection, row-major `f64` |
//!
//! The projection's nullity is not stored; it is recovered as the rounded trace.

use std::fs;
use std::path::Path;

use nsedit_core::{AssociativeMemory, CovarianceAccumulator, EditorState, Matrix, ProjectionMatrix};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"LGED";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 * 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}, expected {MAGIC:?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported checkpoint version {found}, expected {VERSION}")]
    UnsupportedVersion { found: u16 },
    #[error("truncated checkpoint: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("checkpoint has {extra} unexpected trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("checkpoint dimensions overflow: d1 = {d1}, d0 = {d0}")]
    Overflow { d1: u64, d0: u64 },
    #[error("inconsistent checkpoint state: {0}")]
    Inconsistent(String),
    #[error("invalid checkpoint contents: {0}")]
    Core(#[from] nsedit_core::Error),
}

/// Decoded header fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub d1: u64,
    pub d0: u64,
    pub step: u64,
    pub count: u64,
}

impl Header {
    /// Total file length implied by the header, if it fits in memory.
    pub fn expected_len(&self) -> Option<usize> {
        let d1 = usize::try_from(self.d1).ok()?;
        let d0 = usize::try_from(self.d0).ok()?;
        let w = d1.checked_mul(d0)?;
        let sq = d0.checked_mul(d0)?;
        let floats = w.checked_add(sq.checked_mul(2)?)?;
        floats.checked_mul(8)?.checked_add(HEADER_LEN)
    }
}

pub fn encode(state: &EditorState) -> Result<Vec<u8>, CheckpointError> {
    let (d1, d0) = state.memory.weights.shape();
    if state.accumulator.cov.shape() != (d0, d0) || state.projection.mat.shape() != (d0, d0) {
        return Err(CheckpointError::Inconsistent(format!(
            "memory is {d1}x{d0} but covariance is {:?} and projection is {:?}",
            state.accumulator.cov.shape(),
            state.projection.mat.shape()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (d1 * d0 + 2 * d0 * d0));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [d1 as u64, d0 as u64, state.step as u64, state.accumulator.count] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for m in [&state.memory.weights, &state.accumulator.cov, &state.projection.mat] {
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_header(bytes: &[u8]) -> Result<Header, CheckpointError> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic {
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }
    let word = |i: usize| {
        let start = 6 + 8 * i;
        u64::from_le_bytes(bytes[start..start + 8].try_into().expect("8-byte slice"))
    };
    Ok(Header {
        d1: word(0),
        d0: word(1),
        step: word(2),
        count: word(3),
    })
}

pub fn decode(bytes: &[u8]) -> Result<EditorState, CheckpointError> {
    let h = decode_header(bytes)?;
    let expected = h.expected_len().ok_or(CheckpointError::Overflow { d1: h.d1, d0: h.d0 })?;
    if bytes.len() < expected {
        return Err(CheckpointError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CheckpointError::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }
    let (d1, d0) = (h.d1 as usize, h.d0 as usize);
    let mut floats = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |rows: usize, cols: usize| Matrix::from_row_major(rows, cols, floats.by_ref().take(rows * cols).collect());

    let weights = take(d1, d0)?;
    let cov = take(d0, d0)?;
    let proj = take(d0, d0)?;
    Ok(EditorState {
        memory: AssociativeMemory::new(weights)?,
        accumulator: CovarianceAccumulator { cov, count: h.count },
        projection: ProjectionMatrix::from_matrix(proj)?,
        step: usize::try_from(h.step).map_err(|_| CheckpointError::Inconsistent(format!("step {} overflows", h.step)))?,
    })
}

pub fn save_checkpoint(state: &EditorState, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode(state)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<EditorState, CheckpointError> {
    decode(&fs::read(path)?)
}

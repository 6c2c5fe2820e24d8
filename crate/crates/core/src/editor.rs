//! Closed-form null-space constrained updates and the sequential editing loop.
//!
//! For a batch of keys `K` (columns) and target values `V`, with residual
//! `R = V − W·K` and a projector `P` onto the unused key directions, the update
//! minimizing `‖Δ̃·P‖² + ‖(Δ̃·P + W)·K − V‖²` is
//!
//! ```text
//! ΔW = R·Kᵀ·P·(K·Kᵀ·P + I)⁻¹
//! ```
//!
//! `ΔW` lies in the row space of `P`, so `ΔW·k = 0` for every key already folded
//! into the covariance that `P` was built from.
//!
//! Three strategies share the loop:
//! - `dynamic` rebuilds `P` after absorbing each batch into the running covariance;
//! - `static` keeps the projector built from the preserved keys alone;
//! - `identity` uses `P = I` (unconstrained ridge write).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::benchgen::EditBatch;
use crate::covariance::CovarianceAccumulator;
use crate::error::{Error, Result};
use crate::linalg::solve_right;
use crate::matrix::Matrix;
use crate::memory::{AssociativeMemory, PreservationSet};
use crate::projection::ProjectionMatrix;

/// Condition estimate of `K·Kᵀ·P + I` above which a solve is refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMatrix {
    /// `d1 × d0`.
    pub delta: Matrix,
    /// Set when the batch was empty and the zero update was returned.
    pub empty_batch: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum StrategyKind {
    Dynamic,
    Static,
    Identity,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Dynamic, StrategyKind::Static, StrategyKind::Identity];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Dynamic => "dynamic",
            StrategyKind::Static => "static",
            StrategyKind::Identity => "identity",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(StrategyKind::Dynamic),
            "static" => Ok(StrategyKind::Static),
            "identity" => Ok(StrategyKind::Identity),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?} (expected dynamic, static or identity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditorStrategy {
    pub kind: StrategyKind,
    /// Null-space threshold; ignored by `identity`.
    pub rel_tol: f64,
}

impl EditorStrategy {
    pub fn new(kind: StrategyKind, rel_tol: f64) -> Result<Self> {
        if kind != StrategyKind::Identity && !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::Config(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
        }
        Ok(Self { kind, rel_tol })
    }

    pub fn dynamic(rel_tol: f64) -> Self {
        Self {
            kind: StrategyKind::Dynamic,
            rel_tol,
        }
    }

    pub fn fixed(rel_tol: f64) -> Self {
        Self {
            kind: StrategyKind::Static,
            rel_tol,
        }
    }

    pub fn identity() -> Self {
        Self {
            kind: StrategyKind::Identity,
            rel_tol: crate::DEFAULT_REL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditorState {
    pub memory: AssociativeMemory,
    /// Covariance of the preserved keys and every batch edited so far.
    pub accumulator: CovarianceAccumulator,
    /// Projector that the next step will use.
    pub projection: ProjectionMatrix,
    pub step: usize,
}

impl EditorState {
    /// State before the first edit: covariance seeded from `K₀`.
    pub fn initial(w0: &AssociativeMemory, ps: &PreservationSet, strategy: &EditorStrategy) -> Result<Self> {
        if ps.d0() != w0.d0() || ps.d1() != w0.d1() {
            return Err(Error::dims(
                "initial state",
                format!("preservation set {}x{}", w0.d1(), w0.d0()),
                format!("{}x{}", ps.d1(), ps.d0()),
            ));
        }
        let accumulator = CovarianceAccumulator::from_keys(&ps.keys0)?;
        let projection = match strategy.kind {
            StrategyKind::Dynamic | StrategyKind::Static => {
                ProjectionMatrix::from_covariance(&accumulator, strategy.rel_tol)?
            }
            StrategyKind::Identity => ProjectionMatrix::identity(w0.d0()),
        };
        Ok(Self {
            memory: w0.clone(),
            accumulator,
            projection,
            step: 0,
        })
    }
}

/// Closed-form update for one batch.
pub fn solve_update(
    mem: &AssociativeMemory,
    keys: &Matrix,
    values: &Matrix,
    proj: &ProjectionMatrix,
) -> Result<UpdateMatrix> {
    check_batch_shapes(mem, keys, values)?;
    if proj.dim() != mem.d0() {
        return Err(Error::dims(
            "solve_update",
            format!("projection {0}x{0}", mem.d0()),
            format!("{0}x{0}", proj.dim()),
        ));
    }
    if keys.cols() == 0 {
        return Ok(UpdateMatrix {
            delta: Matrix::zeros(mem.d1(), mem.d0()),
            empty_batch: true,
        });
    }
    keys.check_finite("edit keys")?;
    values.check_finite("edit values")?;

    let p = &proj.mat;
    let residual = values.sub(&mem.weights.matmul(keys)?)?;
    let kt_p = keys.transpose().matmul(p)?;
    let mut system = keys.matmul(&kt_p)?;
    system.add_diagonal(1.0);
    let rhs = residual.matmul(&kt_p)?;

    let (delta, cond) = solve_right(&system, &rhs)?;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            op: "solve_update",
            estimate: cond,
            limit: MAX_CONDITION,
        });
    }
    let delta = delta.matmul(p)?;
    delta.check_finite("update")?;
    Ok(UpdateMatrix {
        delta,
        empty_batch: false,
    })
}

/// Regularized objective `‖X·P‖² + ‖(X·P + W)·K − V‖²` minimized by [`solve_update`].
pub fn edit_objective(
    mem: &AssociativeMemory,
    keys: &Matrix,
    values: &Matrix,
    proj: &ProjectionMatrix,
    candidate: &Matrix,
) -> Result<f64> {
    let xp = candidate.matmul(&proj.mat)?;
    let fit = xp.add(&mem.weights)?.matmul(keys)?.sub(values)?;
    let a = xp.frobenius_norm();
    let b = fit.frobenius_norm();
    Ok(a * a + b * b)
}

fn check_batch_shapes(mem: &AssociativeMemory, keys: &Matrix, values: &Matrix) -> Result<()> {
    if keys.rows() != mem.d0() || values.rows() != mem.d1() || keys.cols() != values.cols() {
        return Err(Error::dims(
            "edit batch",
            format!("keys {}xn, values {}xn", mem.d0(), mem.d1()),
            format!(
                "keys {}x{}, values {}x{}",
                keys.rows(),
                keys.cols(),
                values.rows(),
                values.cols()
            ),
        ));
    }
    Ok(())
}

/// Applies one batch and prepares the projector for the next step.
///
/// The batch's keys join the running covariance only after its own update has been
/// applied, so the projector used at step `t` covers `K₀` and batches `1..t-1`.
pub fn edit_step(state: &EditorState, batch: &EditBatch, strategy: &EditorStrategy) -> Result<EditorState> {
    check_batch_shapes(&state.memory, &batch.keys, &batch.values)?;
    if batch.keys.cols() == 0 {
        let mut next = state.clone();
        next.step += 1;
        return Ok(next);
    }
    let update = solve_update(&state.memory, &batch.keys, &batch.values, &state.projection)?;
    let memory = AssociativeMemory::new(state.memory.weights.add(&update.delta)?)?;
    let accumulator = state.accumulator.absorb_keys(&batch.keys)?;
    let projection = match strategy.kind {
        StrategyKind::Dynamic => ProjectionMatrix::from_covariance(&accumulator, strategy.rel_tol)?,
        StrategyKind::Static | StrategyKind::Identity => state.projection.clone(),
    };
    Ok(EditorState {
        memory,
        accumulator,
        projection,
        step: state.step + 1,
    })
}

/// Runs the whole stream.
///
/// With `keep_trajectory` the result is `[initial, after batch 1, …, after batch T]`;
/// otherwise it holds the final state only.
pub fn sequential_edit(
    w0: &AssociativeMemory,
    ps: &PreservationSet,
    stream: &[EditBatch],
    strategy: &EditorStrategy,
    keep_trajectory: bool,
) -> Result<Vec<EditorState>> {
    let mut state = EditorState::initial(w0, ps, strategy)?;
    let mut states = Vec::with_capacity(if keep_trajectory { stream.len() + 1 } else { 1 });
    for (i, batch) in stream.iter().enumerate() {
        let next = edit_step(&state, batch, strategy).map_err(|e| Error::Step {
            step: i + 1,
            source: alloc::boxed::Box::new(e),
        })?;
        if keep_trajectory {
            states.push(core::mem::replace(&mut state, next));
        } else {
            state = next;
        }
    }
    states.push(state);
    Ok(states)
}

/// Largest column drift `max_i |(W_after − W_before)·k_i|`, relative to
/// `max(1, max_i |W_before·k_i|)`.
pub fn recall_drift(before: &AssociativeMemory, after: &AssociativeMemory, keys: &Matrix) -> Result<f64> {
    if keys.cols() == 0 {
        return Ok(0.0);
    }
    let diff = after.weights.sub(&before.weights)?.matmul(keys)?;
    let base = before.weights.matmul(keys)?;
    Ok(diff.max_column_norm() / base.max_column_norm().max(1.0))
}

/// Human-readable label, e.g. for log lines.
pub fn describe(strategy: &EditorStrategy) -> String {
    match strategy.kind {
        StrategyKind::Identity => String::from("identity"),
        k => format!("{k} (rel_tol {:e})", strategy.rel_tol),
    }
}

/// Concatenates the key matrices of several batches column-wise.
pub fn concat_keys<'a>(d0: usize, batches: impl IntoIterator<Item = &'a Matrix>) -> Result<Matrix> {
    let mut out = Matrix::zeros(d0, 0);
    for k in batches {
        out = out.hconcat(k)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn batch(keys: Matrix, values: Matrix) -> EditBatch {
        EditBatch {
            language_id: 0,
            step_index: 0,
            keys,
            values,
            triples: vec![],
        }
    }

    #[test]
    fn known_facts_need_no_update() {
        let mem = AssociativeMemory::new(Matrix::from_rows(&[&[1.0, 2.0, 0.0], &[0.0, -1.0, 3.0]])).unwrap();
        let keys = Matrix::from_rows(&[&[1.0, 0.2], &[0.5, -1.0], &[0.0, 0.3]]);
        let values = mem.weights.matmul(&keys).unwrap();
        let u = solve_update(&mem, &keys, &values, &ProjectionMatrix::identity(3)).unwrap();
        assert!(u.delta.max_abs() < 1e-15);
    }

    #[test]
    fn fully_protected_keys_admit_no_update() {
        let mem = AssociativeMemory::zeros(2, 3);
        let keys = Matrix::from_rows(&[&[1.0], &[2.0], &[0.0]]);
        let values = Matrix::from_rows(&[&[5.0], &[-1.0]]);
        let proj = ProjectionMatrix {
            mat: Matrix::diag(&[0.0, 0.0, 1.0]),
            nullity: 1,
        };
        let u = solve_update(&mem, &keys, &values, &proj).unwrap();
        assert_eq!(u.delta, Matrix::zeros(2, 3));
    }

    #[test]
    fn single_key_ridge_halved_write() {
        let mem = AssociativeMemory::zeros(1, 2);
        let keys = Matrix::from_rows(&[&[1.0], &[0.0]]);
        let values = Matrix::from_rows(&[&[2.0]]);
        let u = solve_update(&mem, &keys, &values, &ProjectionMatrix::identity(2)).unwrap();
        assert!(u.delta.max_abs_diff(&Matrix::from_rows(&[&[1.0, 0.0]])) < 1e-15);
    }

    #[test]
    fn empty_batch_flags_zero_update() {
        let mem = AssociativeMemory::zeros(2, 3);
        let u = solve_update(&mem, &Matrix::zeros(3, 0), &Matrix::zeros(2, 0), &ProjectionMatrix::identity(3))
            .unwrap();
        assert!(u.empty_batch);
        assert_eq!(u.delta, Matrix::zeros(2, 3));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mem = AssociativeMemory::zeros(2, 3);
        let r = solve_update(&mem, &Matrix::zeros(2, 1), &Matrix::zeros(2, 1), &ProjectionMatrix::identity(3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_batch_only_advances_step() {
        let ps = PreservationSet::new(Matrix::from_rows(&[&[1.0], &[0.0]]), Matrix::from_rows(&[&[1.0]])).unwrap();
        let w0 = AssociativeMemory::new(Matrix::from_rows(&[&[1.0, 0.0]])).unwrap();
        let s = EditorStrategy::dynamic(1e-8);
        let state = EditorState::initial(&w0, &ps, &s).unwrap();
        let next = edit_step(&state, &batch(Matrix::zeros(2, 0), Matrix::zeros(1, 0)), &s).unwrap();
        assert_eq!(next.step, 1);
        assert_eq!(next.memory, state.memory);
        assert_eq!(next.accumulator, state.accumulator);
        assert_eq!(next.projection, state.projection);
    }

    #[test]
    fn empty_stream_returns_initial_state() {
        let ps = PreservationSet::new(Matrix::from_rows(&[&[1.0], &[0.0]]), Matrix::from_rows(&[&[1.0]])).unwrap();
        let w0 = AssociativeMemory::new(Matrix::from_rows(&[&[1.0, 0.0]])).unwrap();
        let s = EditorStrategy::fixed(1e-8);
        let out = sequential_edit(&w0, &ps, &[], &s, true).unwrap();
        assert_eq!(out, vec![EditorState::initial(&w0, &ps, &s).unwrap()]);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("static".parse::<StrategyKind>().unwrap(), StrategyKind::Static);
        assert!("alpha".parse::<StrategyKind>().is_err());
        assert!(EditorStrategy::new(StrategyKind::Dynamic, 1.5).is_err());
        assert!(EditorStrategy::new(StrategyKind::Identity, 1.5).is_ok());
    }
}

//! Null-space constrained sequential editing of linear associative memories.
//!
//! A memory is a matrix `W` mapping key vectors to value vectors. Edits arrive
//! as a stream of key/value batches; each batch is written with a closed-form
//! ridge update whose key side is projected onto the approximate null space of
//! the running uncentered key covariance, so outputs on previously absorbed keys
//! stay fixed.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration and file
//! formats live in the companion `nsedit` crate.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod benchgen;
pub mod covariance;
pub mod editor;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod memory;
pub mod metrics;
pub mod projection;

pub use benchgen::{generate_stream, rephrase, EditBatch, GeneratedStream, StreamSpec, SyntheticTriple};
pub use covariance::CovarianceAccumulator;
pub use editor::{
    edit_objective, edit_step, sequential_edit, solve_update, EditorState, EditorStrategy,
    StrategyKind, UpdateMatrix,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use memory::{fit_initial_memory, AssociativeMemory, PreservationSet};
pub use metrics::{DistanceMetric, MetricsReport};
pub use projection::{null_space_projection, spectral_decompose, ProjectionMatrix, SpectralDecomposition};

/// Default relative eigenvalue threshold below which a direction counts as unused.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Default number of edits per time step.
pub const DEFAULT_BATCH_SIZE: usize = 100;

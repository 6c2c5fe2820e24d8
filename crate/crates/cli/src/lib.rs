//! Experiment configuration, result files, checkpoints and the `nsedit` command line.

pub mod checkpoint;
pub mod config;
pub mod dump;
pub mod report;
pub mod run;
pub mod verify;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use config::{ConfigError, ExperimentConfig};
pub use run::{simulate, Overrides, RunError};
pub use verify::{verify, VerifyReport};

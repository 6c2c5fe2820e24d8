//! The `simulate` experiment driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nsedit_core::benchgen::generate_stream_with_ridge;
use nsedit_core::metrics::evaluate;
use nsedit_core::{sequential_edit, DistanceMetric, EditorState, GeneratedStream, MetricsReport, StrategyKind};
use thiserror::Error;

use crate::checkpoint::{save_checkpoint, CheckpointError};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{
    checkpoint_file_name, metrics_csv, metrics_file_name, plot_csv, plot_file_name, summary_json, SummaryRecord,
};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure (strategy {strategy}, seed {seed}, step {step}): {source}")]
    Numerical {
        strategy: &'static str,
        seed: u64,
        step: usize,
        #[source]
        source: nsedit_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write checkpoint {path}: {source}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: CheckpointError,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { .. } => 3,
            RunError::Write { .. } | RunError::Checkpoint { .. } => 1,
        }
    }
}

/// Command-line adjustments applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub strategy: Option<StrategyKind>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(kind) = self.strategy {
            cfg.strategies = vec![kind];
        }
    }
}

/// Everything one (seed, strategy) run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub strategy: StrategyKind,
    /// `[initial, after batch 1, …]`.
    pub trajectory: Vec<EditorState>,
    pub report: MetricsReport,
}

fn numerical(strategy: &'static str, seed: u64, err: nsedit_core::Error) -> RunError {
    let (step, source) = match err {
        nsedit_core::Error::Step { step, source } => (step, *source),
        other => (0, other),
    };
    RunError::Numerical {
        strategy,
        seed,
        step,
        source,
    }
}

/// Generates the stream a config describes for one seed.
pub fn generate(cfg: &ExperimentConfig, seed: u64) -> Result<GeneratedStream, RunError> {
    generate_stream_with_ridge(&cfg.stream.clone().with_seed(seed), cfg.ridge).map_err(|e| match e {
        nsedit_core::Error::Config(message) => RunError::Config(ConfigError::Invalid {
            field: "stream",
            message,
        }),
        other => numerical("none, stream generation", seed, other),
    })
}

/// Runs one strategy over an already generated stream.
pub fn run_one(cfg: &ExperimentConfig, stream: &GeneratedStream, seed: u64, kind: StrategyKind) -> Result<RunOutput, RunError> {
    let strategy = cfg.strategy(kind);
    let w0 = stream.initial_memory().map_err(|e| numerical(kind.name(), seed, e))?;
    let trajectory = sequential_edit(&w0, &stream.preservation, &stream.batches, &strategy, true)
        .map_err(|e| numerical(kind.name(), seed, e))?;
    let report = evaluate(&trajectory, &stream.batches, &stream.pool, &stream.preservation, DistanceMetric::Euclidean)
        .map_err(|e| numerical(kind.name(), seed, e))?;
    Ok(RunOutput {
        seed,
        strategy: kind,
        trajectory,
        report,
    })
}

/// Tracks files written so a failed run can remove them.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self, RunError> {
        let existed = dir.is_dir();
        // create_dir_all tolerates concurrent creation of the same path.
        fs::create_dir_all(dir).map_err(|source| RunError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir: !existed,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, contents).map_err(|source| RunError::Write { path, source })
    }

    fn checkpoint(&mut self, name: &str, state: &EditorState) -> Result<(), RunError> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        save_checkpoint(state, &path).map_err(|source| RunError::Checkpoint { path, source })
    }

    fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            // Only succeeds when nothing else was put there.
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Runs every (seed, strategy) pair and writes the result files.
///
/// On failure every file this call wrote is removed again.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<SummaryRecord>, RunError> {
    cfg.validate()?;
    let mut out = Outputs::open(&cfg.output_dir)?;
    match simulate_into(cfg, &mut out) {
        Ok(records) => Ok(records),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn simulate_into(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<SummaryRecord>, RunError> {
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let stream = generate(cfg, seed)?;
        for &kind in &cfg.strategies {
            let start = Instant::now();
            let run = run_one(cfg, &stream, seed, kind)?;
            let plot = if cfg.emit_plot_data {
                Some(plot_csv(&run.trajectory, &stream.batches, &stream.pool).map_err(|e| numerical(kind.name(), seed, e))?)
            } else {
                None
            };
            let runtime_seconds = start.elapsed().as_secs_f64();

            out.write(&metrics_file_name(kind, seed), &metrics_csv(&run.report))?;
            if let Some(plot) = plot {
                out.write(&plot_file_name(kind, seed), &plot)?;
            }
            if cfg.checkpoint_stride > 0 {
                for state in run.trajectory.iter().filter(|s| s.step > 0 && s.step % cfg.checkpoint_stride == 0) {
                    out.checkpoint(&checkpoint_file_name(kind, seed, state.step), state)?;
                }
            }
            records.push(SummaryRecord {
                strategy: kind,
                seed,
                aggregate: run.report.aggregate,
                per_language_final: run.report.per_language_final,
                runtime_seconds,
                warnings: run.report.warnings,
            });
        }
    }
    out.write(SUMMARY_FILE, &summary_json(&records))?;
    Ok(records)
}

//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use nsedit_core::{EditorStrategy, StrategyKind, StreamSpec, DEFAULT_REL_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

impl ConfigError {
    fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Self::Invalid {
            field,
            message: message.into(),
        }
    }
}

/// One experiment: every strategy is run on the stream generated for every seed.
///
/// `stream.seed` is ignored; the `seeds` list decides which streams are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub strategies: Vec<StrategyKind>,
    /// Ridge for the initial memory fit; `None` picks `1e-4 · trace(K₀K₀ᵀ) / d0`.
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    pub seeds: Vec<u64>,
    /// Write a checkpoint every this many steps; 0 disables checkpoints.
    #[serde(default)]
    pub checkpoint_stride: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_plot_data: bool,
}

fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// The acceptance-scale experiment over all three strategies.
    pub fn acceptance(seeds: Vec<u64>) -> Self {
        Self {
            stream: StreamSpec::acceptance(),
            strategies: vec![StrategyKind::Dynamic, StrategyKind::Static, StrategyKind::Identity],
            ridge: None,
            rel_tol: DEFAULT_REL_TOL,
            seeds,
            checkpoint_stride: 0,
            output_dir: default_output_dir(),
            emit_plot_data: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::invalid("seeds", "must list at least one seed"));
        }
        if self.strategies.is_empty() {
            return Err(ConfigError::invalid("strategies", "must list at least one strategy"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(ConfigError::invalid("rel_tol", format!("must lie in (0, 1), got {}", self.rel_tol)));
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(ConfigError::invalid("ridge", format!("must be finite and nonnegative, got {r}")));
            }
        }
        let mut seen = self.strategies.clone();
        seen.sort_by_key(|k| k.name());
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return Err(ConfigError::invalid("strategies", "lists a strategy twice"));
        }
        self.stream
            .validate()
            .map_err(|e| ConfigError::invalid("stream", e.to_string()))
    }

    pub fn strategy(&self, kind: StrategyKind) -> EditorStrategy {
        // rel_tol was validated, so this cannot fail.
        EditorStrategy::new(kind, self.rel_tol).expect("validated rel_tol")
    }
}

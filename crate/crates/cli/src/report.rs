//! CSV and JSON result files.

use std::fmt::Write as _;

use nsedit_core::metrics::{efficacy, Aggregate, LanguageGap, Warning};
use nsedit_core::{EditBatch, EditorState, Matrix, MetricsReport, StrategyKind, SyntheticTriple};
use serde::{Deserialize, Serialize};

pub const METRICS_HEADER: &str = "step,language_id,efficacy,generality,specificity,preservation_drift,nullity";
pub const PLOT_HEADER: &str = "step,language_id,efficacy";

/// One entry of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub aggregate: Aggregate,
    pub per_language_final: Vec<LanguageGap>,
    pub runtime_seconds: f64,
    pub warnings: Vec<Warning>,
}

pub fn metrics_file_name(strategy: StrategyKind, seed: u64) -> String {
    format!("metrics_{}_{seed}.csv", strategy.name())
}

pub fn plot_file_name(strategy: StrategyKind, seed: u64) -> String {
    format!("plot_efficacy_{}_{seed}.csv", strategy.name())
}

pub fn checkpoint_file_name(strategy: StrategyKind, seed: u64, step: usize) -> String {
    format!("checkpoint_{}_{seed}_step{step}.lged", strategy.name())
}

pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in &report.per_step {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step, r.language_id, r.efficacy, r.generality, r.specificity, r.preservation_drift, r.nullity
        )
        .expect("writing to a String");
    }
    out
}

/// Efficacy of every language's edits at every state, for forgetting curves.
pub fn plot_csv(trajectory: &[EditorState], batches: &[EditBatch], pool: &Matrix) -> nsedit_core::Result<String> {
    let mut languages: Vec<usize> = batches.iter().map(|b| b.language_id).collect();
    languages.sort_unstable();
    languages.dedup();
    let per_language: Vec<(usize, Vec<SyntheticTriple>)> = languages
        .into_iter()
        .map(|l| {
            let triples = batches
                .iter()
                .filter(|b| b.language_id == l)
                .flat_map(|b| b.triples.iter().cloned())
                .collect();
            (l, triples)
        })
        .filter(|(_, t): &(usize, Vec<SyntheticTriple>)| !t.is_empty())
        .collect();

    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    for state in trajectory {
        for (lang, triples) in &per_language {
            let e = efficacy(&state.memory, triples, pool)?;
            writeln!(out, "{},{lang},{e}", state.step).expect("writing to a String");
        }
    }
    Ok(out)
}

pub fn summary_json(records: &[SummaryRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("summary records serialize");
    s.push('\n');
    s
}

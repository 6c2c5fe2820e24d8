//! Edit-quality metrics over a finite candidate value pool.
//!
//! A probe counts as correct when the memory's recall is nearest (Euclidean by
//! default, lowest column index on ties) to the pool column holding the expected
//! value. Efficacy probes with the edited key, generality with its rephrasing,
//! specificity with an unrelated key whose expected value is the pre-edit recall.

use alloc::format;
use alloc::vec::Vec;

use crate::benchgen::{EditBatch, SyntheticTriple};
use crate::editor::EditorState;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::memory::{AssociativeMemory, PreservationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub step: usize,
    pub language_id: usize,
    pub efficacy: f64,
    pub generality: f64,
    pub specificity: f64,
    pub preservation_drift: f64,
    /// Nullity of the projector used for this step's update.
    pub nullity: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LanguageGap {
    pub language_id: usize,
    pub efficacy_immediate: f64,
    pub efficacy_final: f64,
    pub interference_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aggregate {
    pub efficacy: f64,
    pub generality: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Warning {
    /// The projector for this step had nullity 0, so no update could be written.
    CapacityExhausted { step: usize },
    EmptyBatch { step: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub per_step: Vec<StepRecord>,
    pub per_language_final: Vec<LanguageGap>,
    pub aggregate: Aggregate,
    pub warnings: Vec<Warning>,
}

/// Index of the pool column closest to `v`.
pub fn nearest_index(pool: &Matrix, v: &[f64], metric: DistanceMetric) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    let vn = norm(v);
    for c in 0..pool.cols() {
        let col = pool.column(c);
        let score = match metric {
            DistanceMetric::Euclidean => col.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum(),
            DistanceMetric::Cosine => {
                let denom = norm(&col) * vn;
                if denom > 0.0 {
                    -dot(&col, v) / denom
                } else {
                    0.0
                }
            }
        };
        if score < best_score {
            best_score = score;
            best = c;
        }
    }
    best
}

fn locate(pool: &Matrix, value: &[f64]) -> Result<usize> {
    (0..pool.cols())
        .find(|&c| (0..pool.rows()).all(|i| pool[(i, c)] == value[i]))
        .ok_or_else(|| Error::InvalidInput("expected value is not a pool column".into()))
}

fn hit_rate(
    mem: &AssociativeMemory,
    triples: &[SyntheticTriple],
    pool: &Matrix,
    metric: DistanceMetric,
    probe: impl Fn(&SyntheticTriple) -> &[f64],
    expected: impl Fn(&SyntheticTriple) -> &[f64],
) -> Result<f64> {
    if triples.is_empty() {
        return Err(Error::InvalidInput("metric over an empty triple list is undefined".into()));
    }
    if pool.rows() != mem.d1() {
        return Err(Error::dims("metric pool", format!("{} rows", mem.d1()), format!("{}", pool.rows())));
    }
    let mut hits = 0usize;
    for t in triples {
        let want = locate(pool, expected(t))?;
        let got = nearest_index(pool, &mem.recall(probe(t))?, metric);
        if got == want {
            hits += 1;
        }
    }
    Ok(hits as f64 / triples.len() as f64)
}

pub fn efficacy(mem: &AssociativeMemory, triples: &[SyntheticTriple], pool: &Matrix) -> Result<f64> {
    efficacy_with(mem, triples, pool, DistanceMetric::Euclidean)
}

pub fn efficacy_with(mem: &AssociativeMemory, triples: &[SyntheticTriple], pool: &Matrix, metric: DistanceMetric) -> Result<f64> {
    hit_rate(mem, triples, pool, metric, |t| &t.key, |t| &t.target_value)
}

pub fn generality(mem: &AssociativeMemory, triples: &[SyntheticTriple], pool: &Matrix) -> Result<f64> {
    generality_with(mem, triples, pool, DistanceMetric::Euclidean)
}

pub fn generality_with(mem: &AssociativeMemory, triples: &[SyntheticTriple], pool: &Matrix, metric: DistanceMetric) -> Result<f64> {
    hit_rate(mem, triples, pool, metric, |t| &t.rephrased_key, |t| &t.target_value)
}

pub fn specificity(mem: &AssociativeMemory, triples: &[SyntheticTriple], pool: &Matrix) -> Result<f64> {
    specificity_with(mem, triples, pool, DistanceMetric::Euclidean)
}

pub fn specificity_with(mem: &AssociativeMemory, triples: &[SyntheticTriple], pool: &Matrix, metric: DistanceMetric) -> Result<f64> {
    hit_rate(mem, triples, pool, metric, |t| &t.unrelated_key, |t| &t.original_value)
}

/// `‖(W_t − W₀)·K₀‖_F / max(1, ‖W₀·K₀‖_F)`.
pub fn preservation_drift(mem_t: &AssociativeMemory, ps: &PreservationSet, mem_0: &AssociativeMemory) -> Result<f64> {
    let diff = mem_t.weights.sub(&mem_0.weights)?.matmul(&ps.keys0)?;
    let base = mem_0.weights.matmul(&ps.keys0)?;
    Ok(diff.frobenius_norm() / base.frobenius_norm().max(1.0))
}

fn check_trajectory(trajectory: &[EditorState], batches: &[EditBatch]) -> Result<()> {
    if trajectory.len() != batches.len() + 1 {
        return Err(Error::dims(
            "trajectory",
            format!("{} states (initial + one per batch)", batches.len() + 1),
            format!("{}", trajectory.len()),
        ));
    }
    Ok(())
}

/// Per-language efficacy right after the language's last batch versus at the end.
pub fn interference_gap(trajectory: &[EditorState], batches: &[EditBatch], pool: &Matrix) -> Result<Vec<LanguageGap>> {
    check_trajectory(trajectory, batches)?;
    let final_mem = &trajectory[trajectory.len() - 1].memory;
    let mut languages: Vec<usize> = batches.iter().map(|b| b.language_id).collect();
    languages.sort_unstable();
    languages.dedup();

    let mut out = Vec::with_capacity(languages.len());
    for lang in languages {
        let last = batches.iter().rposition(|b| b.language_id == lang).unwrap_or(0);
        let triples: Vec<SyntheticTriple> = batches
            .iter()
            .filter(|b| b.language_id == lang)
            .flat_map(|b| b.triples.iter().cloned())
            .collect();
        if triples.is_empty() {
            continue;
        }
        let immediate = efficacy(&trajectory[last + 1].memory, &triples, pool)?;
        let fin = efficacy(final_mem, &triples, pool)?;
        out.push(LanguageGap {
            language_id: lang,
            efficacy_immediate: immediate,
            efficacy_final: fin,
            interference_gap: immediate - fin,
        });
    }
    Ok(out)
}

/// Full report for a trajectory `[initial, after batch 1, …]`.
pub fn evaluate(
    trajectory: &[EditorState],
    batches: &[EditBatch],
    pool: &Matrix,
    ps: &PreservationSet,
    metric: DistanceMetric,
) -> Result<MetricsReport> {
    check_trajectory(trajectory, batches)?;
    let w0 = &trajectory[0].memory;
    let mut per_step = Vec::with_capacity(batches.len());
    let mut warnings = Vec::new();
    for (i, batch) in batches.iter().enumerate() {
        let step = i + 1;
        let state = &trajectory[step];
        let nullity = trajectory[i].projection.nullity;
        if batch.triples.is_empty() {
            warnings.push(Warning::EmptyBatch { step });
        } else if nullity == 0 {
            warnings.push(Warning::CapacityExhausted { step });
        }
        let (eff, gen, spe) = if batch.triples.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            (
                efficacy_with(&state.memory, &batch.triples, pool, metric)?,
                generality_with(&state.memory, &batch.triples, pool, metric)?,
                specificity_with(&state.memory, &batch.triples, pool, metric)?,
            )
        };
        per_step.push(StepRecord {
            step,
            language_id: batch.language_id,
            efficacy: eff,
            generality: gen,
            specificity: spe,
            preservation_drift: preservation_drift(&state.memory, ps, w0)?,
            nullity,
        });
    }

    let all: Vec<SyntheticTriple> = batches.iter().flat_map(|b| b.triples.iter().cloned()).collect();
    let final_mem = &trajectory[trajectory.len() - 1].memory;
    let aggregate = if all.is_empty() {
        Aggregate {
            efficacy: 0.0,
            generality: 0.0,
            specificity: 0.0,
        }
    } else {
        Aggregate {
            efficacy: efficacy_with(final_mem, &all, pool, metric)?,
            generality: generality_with(final_mem, &all, pool, metric)?,
            specificity: specificity_with(final_mem, &all, pool, metric)?,
        }
    };
    Ok(MetricsReport {
        per_step,
        per_language_final: interference_gap(trajectory, batches, pool)?,
        aggregate,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn triple(key: Vec<f64>, target: Vec<f64>) -> SyntheticTriple {
        SyntheticTriple {
            rephrased_key: key.clone(),
            unrelated_key: key.clone(),
            original_value: target.clone(),
            key,
            target_value: target,
            language_id: 0,
        }
    }

    #[test]
    fn exact_memorizer_scores_one() {
        let pool = Matrix::from_rows(&[&[1.0, 0.0, 5.0], &[0.0, 1.0, 5.0]]);
        let mem = AssociativeMemory::new(Matrix::identity(2)).unwrap();
        let ts = vec![triple(vec![1.0, 0.0], vec![1.0, 0.0]), triple(vec![0.0, 1.0], vec![0.0, 1.0])];
        assert_eq!(efficacy(&mem, &ts, &pool).unwrap(), 1.0);
    }

    #[test]
    fn zero_memory_misses() {
        // Column 0 is nearest to the origin; no target lives there.
        let pool = Matrix::from_rows(&[&[0.1, 3.0, 0.0], &[0.0, 0.0, 3.0]]);
        let mem = AssociativeMemory::zeros(2, 2);
        let ts = vec![triple(vec![1.0, 0.0], vec![3.0, 0.0]), triple(vec![0.0, 1.0], vec![0.0, 3.0])];
        assert_eq!(efficacy(&mem, &ts, &pool).unwrap(), 0.0);
        assert_eq!(generality(&mem, &ts, &pool).unwrap(), 0.0);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let pool = Matrix::from_rows(&[&[1.0, -1.0]]);
        assert_eq!(nearest_index(&pool, &[0.0], DistanceMetric::Euclidean), 0);
    }

    #[test]
    fn empty_triples_rejected() {
        let pool = Matrix::zeros(2, 1);
        let mem = AssociativeMemory::zeros(2, 2);
        assert!(efficacy(&mem, &[], &pool).is_err());
    }

    #[test]
    fn missing_target_rejected() {
        let pool = Matrix::zeros(2, 1);
        let mem = AssociativeMemory::zeros(2, 2);
        let ts = vec![triple(vec![1.0, 0.0], vec![3.0, 0.0])];
        assert!(matches!(efficacy(&mem, &ts, &pool), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn unedited_memory_has_no_drift() {
        let ps = PreservationSet::new(Matrix::identity(2), Matrix::identity(2)).unwrap();
        let mem = AssociativeMemory::new(Matrix::identity(2)).unwrap();
        assert_eq!(preservation_drift(&mem, &ps, &mem).unwrap(), 0.0);
    }

    #[test]
    fn cosine_ignores_scale() {
        let pool = Matrix::from_rows(&[&[1.0, 10.0], &[1.0, 0.0]]);
        assert_eq!(nearest_index(&pool, &[3.0, 0.1], DistanceMetric::Cosine), 1);
        assert_eq!(nearest_index(&pool, &[3.0, 0.1], DistanceMetric::Euclidean), 0);
    }
}

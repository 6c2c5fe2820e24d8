//! JSON export of a generated stream for replay by other implementations.
//!
//! Vectors are stored as lists; matrices as lists of columns.

use nsedit_core::{EditBatch, GeneratedStream, Matrix, PreservationSet, StreamSpec, SyntheticTriple};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchDump {
    pub language_id: usize,
    pub step_index: usize,
    pub triples: Vec<SyntheticTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamDump {
    pub spec: StreamSpec,
    pub ridge: f64,
    pub batches: Vec<BatchDump>,
    pub pool: Vec<Vec<f64>>,
    pub preservation_keys: Vec<Vec<f64>>,
    pub preservation_values: Vec<Vec<f64>>,
    pub language_bases: Vec<Vec<Vec<f64>>>,
    pub preservation_basis: Vec<Vec<f64>>,
}

fn columns(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|c| m.column(c)).collect()
}

impl StreamDump {
    pub fn new(spec: &StreamSpec, stream: &GeneratedStream) -> Self {
        Self {
            spec: spec.clone(),
            ridge: stream.ridge,
            batches: stream
                .batches
                .iter()
                .map(|b| BatchDump {
                    language_id: b.language_id,
                    step_index: b.step_index,
                    triples: b.triples.clone(),
                })
                .collect(),
            pool: columns(&stream.pool),
            preservation_keys: columns(&stream.preservation.keys0),
            preservation_values: columns(&stream.preservation.values0),
            language_bases: stream.language_bases.iter().map(columns).collect(),
            preservation_basis: columns(&stream.preservation_basis),
        }
    }

    pub fn into_stream(self) -> nsedit_core::Result<GeneratedStream> {
        let (d0, d1) = (self.spec.d0, self.spec.d1);
        let batches = self
            .batches
            .into_iter()
            .map(|b| EditBatch::from_triples(b.language_id, b.step_index, d0, d1, b.triples))
            .collect::<nsedit_core::Result<Vec<_>>>()?;
        Ok(GeneratedStream {
            batches,
            pool: Matrix::from_columns(d1, &self.pool)?,
            preservation: PreservationSet::new(
                Matrix::from_columns(d0, &self.preservation_keys)?,
                Matrix::from_columns(d1, &self.preservation_values)?,
            )?,
            ridge: self.ridge,
            language_bases: self
                .language_bases
                .iter()
                .map(|b| Matrix::from_columns(d0, b))
                .collect::<nsedit_core::Result<Vec<_>>>()?,
            preservation_basis: Matrix::from_columns(d0, &self.preservation_basis)?,
        })
    }
}

//! Deterministic synthetic multilingual edit streams.
//!
//! Geometry, all drawn from one seeded random orthonormal basis `Q` of the key space:
//!
//! - `s = round(r · overlap)` columns of `Q` are shared by every language;
//! - each language `j` owns `p = r − s` further private columns, so its basis
//!   `B_j` has `r` orthonormal columns;
//! - the next `r` columns are reserved for the preserved knowledge. Each preserved
//!   direction is a reserved column tilted slightly toward a random direction of the
//!   language span, so the preserved subspace meets no edit subspace but is not
//!   orthogonal to them either. Unconstrained writes therefore disturb it.
//!
//! Keys of language `j` are `B_j · z` with `z ~ N(0, I_r)`. Values come from a
//! random ground-truth map plus noise for the preserved set and fresh Gaussian
//! draws for edit targets. Every target and every pre-edit recall of an
//! unrelated probe goes into a candidate pool whose entries are kept at least
//! `0.25 · sqrt(2 · d1)` apart.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::orthonormalize_columns;
use crate::matrix::{dot, norm, Matrix};
use crate::memory::{fit_initial_memory, AssociativeMemory, PreservationSet};

/// Tilt of each preserved direction toward the language span.
pub const PRESERVATION_COUPLING: f64 = 0.08;
/// Noise added on top of the ground-truth map for preserved values.
pub const PRESERVED_VALUE_NOISE: f64 = 0.1;
/// Largest allowed fraction of an unrelated probe lying in its language subspace.
pub const UNRELATED_MAX_PROJECTION: f64 = 0.1;
const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct StreamSpec {
    pub d0: usize,
    pub d1: usize,
    pub num_languages: usize,
    pub batches_per_language: usize,
    pub batch_size: usize,
    pub subspace_rank: usize,
    pub language_overlap: f64,
    pub rephrase_noise: f64,
    pub pool_size: usize,
    /// Number of preserved keys `n0`.
    #[cfg_attr(feature = "serde", serde(default = "default_preservation_size"))]
    pub preservation_size: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

#[cfg(feature = "serde")]
fn default_preservation_size() -> usize {
    StreamSpec::DEFAULT_PRESERVATION_SIZE
}

impl StreamSpec {
    pub const DEFAULT_PRESERVATION_SIZE: usize = 512;

    /// The desk-scale spec used by the acceptance runs.
    pub fn acceptance() -> Self {
        Self {
            d0: 64,
            d1: 32,
            num_languages: 4,
            batches_per_language: 2,
            batch_size: 25,
            subspace_rank: 8,
            language_overlap: 0.0,
            rephrase_noise: 0.05,
            pool_size: 400,
            preservation_size: 128,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn total_edits(&self) -> usize {
        self.num_languages * self.batches_per_language * self.batch_size
    }

    pub fn num_batches(&self) -> usize {
        self.num_languages * self.batches_per_language
    }

    fn shared_directions(&self) -> usize {
        libm::round(self.subspace_rank as f64 * self.language_overlap) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d0", self.d0),
            ("d1", self.d1),
            ("num_languages", self.num_languages),
            ("batches_per_language", self.batches_per_language),
            ("batch_size", self.batch_size),
            ("subspace_rank", self.subspace_rank),
            ("pool_size", self.pool_size),
            ("preservation_size", self.preservation_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.subspace_rank > self.d0 {
            return Err(Error::Config(format!(
                "subspace_rank <= d0 violated ({} > {})",
                self.subspace_rank, self.d0
            )));
        }
        if !(0.0..=1.0).contains(&self.language_overlap) {
            return Err(Error::Config(format!(
                "language_overlap must lie in [0, 1], got {}",
                self.language_overlap
            )));
        }
        if !(self.rephrase_noise >= 0.0 && self.rephrase_noise.is_finite()) {
            return Err(Error::Config(format!(
                "rephrase_noise must be finite and nonnegative, got {}",
                self.rephrase_noise
            )));
        }
        let (m, r) = (self.num_languages as f64, self.subspace_rank as f64);
        let need = m * r * (1.0 - self.language_overlap) + r;
        if need > self.d0 as f64 {
            return Err(Error::Config(format!(
                "num_languages * subspace_rank * (1 - language_overlap) + subspace_rank <= d0 violated ({need} > {})",
                self.d0
            )));
        }
        let s = self.shared_directions();
        let p = self.subspace_rank - s;
        let used = s + self.num_languages * p + self.subspace_rank;
        if used > self.d0 {
            return Err(Error::Config(format!(
                "shared + num_languages * private + subspace_rank <= d0 violated after rounding ({used} > {})",
                self.d0
            )));
        }
        if self.pool_size < 2 * self.total_edits() {
            return Err(Error::Config(format!(
                "pool_size >= 2 * total edits violated ({} < {}); the pool holds every target and every \
                 unrelated-probe recall",
                self.pool_size,
                2 * self.total_edits()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticTriple {
    pub key: Vec<f64>,
    pub target_value: Vec<f64>,
    pub rephrased_key: Vec<f64>,
    pub unrelated_key: Vec<f64>,
    /// Recall of `unrelated_key` by the initial memory.
    pub original_value: Vec<f64>,
    pub language_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditBatch {
    pub language_id: usize,
    pub step_index: usize,
    /// `d0 × n_t`.
    pub keys: Matrix,
    /// `d1 × n_t`.
    pub values: Matrix,
    pub triples: Vec<SyntheticTriple>,
}

impl EditBatch {
    /// Assembles a batch from triples (keys and targets as columns).
    pub fn from_triples(language_id: usize, step_index: usize, d0: usize, d1: usize, triples: Vec<SyntheticTriple>) -> Result<Self> {
        let keys: Vec<Vec<f64>> = triples.iter().map(|t| t.key.clone()).collect();
        let values: Vec<Vec<f64>> = triples.iter().map(|t| t.target_value.clone()).collect();
        Ok(Self {
            language_id,
            step_index,
            keys: Matrix::from_columns(d0, &keys)?,
            values: Matrix::from_columns(d1, &values)?,
            triples,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.cols() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStream {
    /// Block-sequential: every batch of language 0, then language 1, …
    pub batches: Vec<EditBatch>,
    /// `d1 × pool_size` candidate values.
    pub pool: Matrix,
    pub preservation: PreservationSet,
    /// Ridge used to fit the memory that produced `original_value`s.
    pub ridge: f64,
    /// Orthonormal `d0 × r` basis per language.
    pub language_bases: Vec<Matrix>,
    /// Orthonormal `d0 × r` basis of the preserved-key subspace.
    pub preservation_basis: Matrix,
}

impl GeneratedStream {
    pub fn initial_memory(&self) -> Result<AssociativeMemory> {
        fit_initial_memory(&self.preservation, self.ridge)
    }

    pub fn triples(&self) -> impl Iterator<Item = &SyntheticTriple> {
        self.batches.iter().flat_map(|b| b.triples.iter())
    }
}

/// Generates a stream with the default ridge for the initial memory.
pub fn generate_stream(spec: &StreamSpec) -> Result<GeneratedStream> {
    generate_stream_with_ridge(spec, None)
}

/// Generates a stream; `ridge = None` selects [`PreservationSet::default_ridge`].
///
/// `original_value`s are recalls of the memory fit with that ridge, so pass the
/// same ridge the experiment will use.
pub fn generate_stream_with_ridge(spec: &StreamSpec, ridge: Option<f64>) -> Result<GeneratedStream> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (d0, d1, r) = (spec.d0, spec.d1, spec.subspace_rank);
    let s = spec.shared_directions();
    let p = r - s;
    let lang_span = s + spec.num_languages * p;

    let q = orthonormalize_columns(&gaussian_matrix(&mut rng, d0, d0))?;

    let language_bases: Vec<Matrix> = (0..spec.num_languages)
        .map(|j| {
            let cols: Vec<Vec<f64>> = (0..s)
                .chain((s + j * p)..(s + (j + 1) * p))
                .map(|c| q.column(c))
                .collect();
            Matrix::from_columns(d0, &cols)
        })
        .collect::<Result<_>>()?;

    let mut tilted = Vec::with_capacity(r);
    for i in 0..r {
        let mut v = q.column(lang_span + i);
        let coeffs = gaussian_vec(&mut rng, lang_span);
        let mut g = vec![0.0; d0];
        for (c, &a) in coeffs.iter().enumerate() {
            for (gi, qi) in g.iter_mut().zip(q.column(c)) {
                *gi += a * qi;
            }
        }
        let gn = norm(&g);
        if gn > 0.0 {
            for (vi, gi) in v.iter_mut().zip(&g) {
                *vi += PRESERVATION_COUPLING * gi / gn;
            }
        }
        tilted.push(v);
    }
    let preservation_basis = orthonormalize_columns(&Matrix::from_columns(d0, &tilted)?)?;

    let truth = gaussian_matrix(&mut rng, d1, d0).scale(1.0 / libm::sqrt(r as f64));
    let keys0 = preservation_basis.matmul(&gaussian_matrix(&mut rng, r, spec.preservation_size))?;
    let values0 = truth
        .matmul(&keys0)?
        .add(&gaussian_matrix(&mut rng, d1, spec.preservation_size).scale(PRESERVED_VALUE_NOISE))?;
    let preservation = PreservationSet::new(keys0, values0)?;
    let ridge = ridge.unwrap_or_else(|| preservation.default_ridge());
    let w0 = fit_initial_memory(&preservation, ridge)?;

    let min_sep = 0.25 * libm::sqrt(2.0 * d1 as f64);
    let mut pool: Vec<Vec<f64>> = Vec::with_capacity(spec.pool_size);
    let mut batches = Vec::with_capacity(spec.num_batches());

    for (j, basis) in language_bases.iter().enumerate() {
        for b in 0..spec.batches_per_language {
            let mut triples = Vec::with_capacity(spec.batch_size);
            for _ in 0..spec.batch_size {
                let key = basis.matvec(&gaussian_vec(&mut rng, r))?;

                let target_value = sample_separated(&mut rng, &pool, min_sep, |rng| Ok(gaussian_vec(rng, d1)))?;
                pool.push(target_value.clone());

                let rephrased_key = rephrase(&key, spec.rephrase_noise, rng.next_u64())?;

                let mut unrelated_key = Vec::new();
                let original_value = sample_separated(&mut rng, &pool, min_sep, |rng| {
                    for _ in 0..MAX_REJECTIONS {
                        let u = preservation_basis.matvec(&gaussian_vec(rng, r))?;
                        let inside = norm(&basis.transpose().matvec(&u)?);
                        if inside <= UNRELATED_MAX_PROJECTION * norm(&u) {
                            let v = w0.recall(&u)?;
                            unrelated_key = u;
                            return Ok(v);
                        }
                    }
                    Err(Error::Config(format!(
                        "could not draw an unrelated probe with at most {UNRELATED_MAX_PROJECTION} of its norm \
                         inside language {j}'s subspace"
                    )))
                })?;
                pool.push(original_value.clone());

                triples.push(SyntheticTriple {
                    key,
                    target_value,
                    rephrased_key,
                    unrelated_key,
                    original_value,
                    language_id: j,
                });
            }
            let step_index = j * spec.batches_per_language + b;
            batches.push(EditBatch::from_triples(j, step_index, d0, d1, triples)?);
        }
    }

    while pool.len() < spec.pool_size {
        let v = sample_separated(&mut rng, &pool, min_sep, |rng| Ok(gaussian_vec(rng, d1)))?;
        pool.push(v);
    }

    Ok(GeneratedStream {
        batches,
        pool: Matrix::from_columns(d1, &pool)?,
        preservation,
        ridge,
        language_bases,
        preservation_basis,
    })
}

fn sample_separated(
    rng: &mut ChaCha8Rng,
    pool: &[Vec<f64>],
    min_sep: f64,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    for _ in 0..MAX_REJECTIONS {
        let v = draw(rng)?;
        if pool.iter().all(|w| distance(w, &v) >= min_sep) {
            return Ok(v);
        }
    }
    Err(Error::Config(format!(
        "could not place a pool value at least {min_sep} from the {} existing ones; lower pool_size or raise d1",
        pool.len()
    )))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Perturbs `key` by a seeded isotropic direction of length `noise · |key|`, then
/// rescales back to `|key|`.
pub fn rephrase(key: &[f64], noise: f64, seed: u64) -> Result<Vec<f64>> {
    let len = norm(key);
    if !(len > 0.0) {
        return Err(Error::InvalidInput("cannot rephrase a zero key".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidInput(format!("rephrase noise must be nonnegative, got {noise}")));
    }
    if noise == 0.0 {
        return Ok(key.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = loop {
        let g = gaussian_vec(&mut rng, key.len());
        if norm(&g) > 0.0 {
            break g;
        }
    };
    let scale = noise * len / norm(&dir);
    let mut out: Vec<f64> = key.iter().zip(&dir).map(|(k, d)| k + scale * d).collect();
    let out_len = norm(&out);
    if !(out_len > 0.0) {
        return Err(Error::InvalidInput("rephrase perturbation cancelled the key".into()));
    }
    out.iter_mut().for_each(|x| *x *= len / out_len);
    Ok(out)
}

/// Largest `|⟨a_i, b_j⟩|` between columns of two bases.
pub fn max_cross_gram(a: &Matrix, b: &Matrix) -> f64 {
    let mut m = 0.0f64;
    for i in 0..a.cols() {
        let ai = a.column(i);
        for j in 0..b.cols() {
            m = m.max(dot(&ai, &b.column(j)).abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> StreamSpec {
        StreamSpec {
            d0: 4,
            d1: 3,
            num_languages: 1,
            batches_per_language: 1,
            batch_size: 1,
            subspace_rank: 2,
            language_overlap: 0.0,
            rephrase_noise: 0.05,
            pool_size: 2,
            preservation_size: 8,
            seed: 3,
        }
    }

    #[test]
    fn single_triple_stream() {
        let g = generate_stream(&tiny()).unwrap();
        assert_eq!(g.batches.len(), 1);
        assert_eq!(g.batches[0].triples.len(), 1);
        let target = &g.batches[0].triples[0].target_value;
        assert!((0..g.pool.cols()).any(|c| &g.pool.column(c) == target));
    }

    #[test]
    fn infeasible_spec_names_inequality() {
        let mut spec = StreamSpec::acceptance();
        spec.num_languages = 8;
        let err = generate_stream(&spec).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("<= d0")), "{err}");
    }

    #[test]
    fn small_pool_rejected() {
        let mut spec = StreamSpec::acceptance();
        spec.pool_size = 300;
        assert!(matches!(generate_stream(&spec), Err(Error::Config(m)) if m.contains("pool_size")));
    }

    #[test]
    fn rephrase_zero_noise_is_identity() {
        let k = [0.3, -1.2, 2.0];
        assert_eq!(rephrase(&k, 0.0, 9).unwrap(), k);
    }

    #[test]
    fn rephrase_preserves_norm_and_is_seeded() {
        let k = [0.3, -1.2, 2.0, 0.7];
        let a = rephrase(&k, 0.05, 11).unwrap();
        let b = rephrase(&k, 0.05, 11).unwrap();
        assert_eq!(a, b);
        assert!((norm(&a) - norm(&k)).abs() < 1e-12);
        assert_ne!(a, rephrase(&k, 0.05, 12).unwrap());
    }

    #[test]
    fn rephrase_rejects_zero_key() {
        assert!(rephrase(&[0.0, 0.0], 0.1, 1).is_err());
    }
}

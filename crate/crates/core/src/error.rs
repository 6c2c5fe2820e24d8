use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite entry in {what} at ({row}, {col})")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("singular system in {op}: {hint}")]
    Singular { op: &'static str, hint: &'static str },

    #[error("ill-conditioned system in {op}: condition estimate {estimate:e} exceeds {limit:e}")]
    IllConditioned {
        op: &'static str,
        estimate: f64,
        limit: f64,
    },

    #[error(
        "eigendecomposition did not converge after {sweeps} sweeps \
         (off-diagonal norm {off_diagonal:e}, frobenius norm {frobenius:e}, max |entry| {max_abs:e})"
    )]
    NoConvergence {
        sweeps: usize,
        off_diagonal: f64,
        frobenius: f64,
        max_abs: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.into(),
            found: found.into(),
        }
    }

    /// True for failures of the numerical kind (singular, ill-conditioned, non-convergent),
    /// including those wrapped with a step index.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. } | Error::IllConditioned { .. } | Error::NoConvergence { .. } => true,
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

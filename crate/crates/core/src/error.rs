use thiserror::Error;

/// Errors raised by state construction, linear algebra and the solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("subsystem label `{0}` appears more than once")]
    DuplicateLabel(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("subsystem `{name}` has invalid dimension {dim}")]
    InvalidDimension { name: String, dim: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("requested order is not a permutation of the subsystems")]
    NotAPermutation,

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator has a significantly negative eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("operator is not an isometry (max deviation {0:e})")]
    NotIsometry(f64),

    #[error("expected a pure state")]
    NotPure,

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error(
        "solver did not converge after {iterations} iterations; best enclosure [{lower}, {upper}]"
    )]
    NonConvergence {
        lower: f64,
        upper: f64,
        iterations: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: need N >= 2")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    NumericFailure(String),

    #[error("control pair is not bracket generating (closure rank {rank}, need {required})")]
    Uncontrollable { rank: usize, required: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("could not cancel first-order noise (residual {residual:e}, relative {relative:e})")]
    ProtectionFailure { residual: f64, relative: f64 },
}

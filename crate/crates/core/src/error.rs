use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semi-definite (eigenvalue {0:e})")]
    NegativeEigenvalue(f64),

    #[error("matrix is rank deficient (eigenvalue {value:e} <= {eps:e})")]
    RankDeficient { value: f64, eps: f64 },

    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("degenerate eigenvalues: {0}")]
    DegenerateEigenvalues(String),

    #[error("index {index} out of range 1..={max}")]
    OutOfRange { index: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{failures} of {replications} replications failed: {first}")]
    TooManyFailures {
        failures: usize,
        replications: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerically degenerate inputs rather than
    /// malformed data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotSymmetric(_)
                | Error::NegativeEigenvalue(_)
                | Error::RankDeficient { .. }
                | Error::DegenerateEigenvalues(_)
        )
    }
}

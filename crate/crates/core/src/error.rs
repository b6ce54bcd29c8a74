use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("parameter index {index} out of range for {n_params} parameters")]
    InvalidParamIndex { index: usize, n_params: usize },

    #[error("parameter {index} enters its angle as {actual}, not as {expected}")]
    WrongParamKind {
        index: usize,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("invalid angle binding: {0}")]
    InvalidBinding(String),

    #[error("n_shots must be >= 1")]
    ZeroShots,

    #[error("dataset must contain at least one point")]
    EmptyDataset,

    #[error("finite-difference step must be > 0, got {0}")]
    InvalidStep(f64),

    #[error("state is not normalized: |amp0|^2 + |amp1|^2 = {0}")]
    NotNormalized(f64),

    #[error("invalid measurement counts: {n0} + {n1} != {n_shots}")]
    InvalidCounts { n0: u64, n1: u64, n_shots: u64 },

    #[error("{0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

/// Errors produced anywhere in the Fridge pipeline.
#[derive(Debug, Error)]
pub enum FridgeError {
    #[error("invalid penalty order {order} for vector of length {len} (need order < len)")]
    InvalidOrder { order: usize, len: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("non-finite value in penalty recursion at order {order}")]
    Overflow { order: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error("solver diverged after {sweeps} sweeps")]
    Divergence { sweeps: usize, last_finite: Vec<f64> },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("degenerate column `{0}` (zero variance)")]
    DegenerateColumn(String),
    #[error("too many failed bootstrap replicates: {failed} of {total}")]
    BootstrapFailures { failed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FridgeError {
    /// True for errors caused by a bad request rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            FridgeError::LinearAlgebra(_)
                | FridgeError::Divergence { .. }
                | FridgeError::Overflow { .. }
                | FridgeError::BootstrapFailures { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, FridgeError>;

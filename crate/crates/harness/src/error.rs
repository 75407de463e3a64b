use thiserror::Error;

use ssgl::SsglError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] SsglError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// At least one chain failed; the others completed and were written.
    #[error("{failed} of {total} chains failed: {first}")]
    ChainFailures { failed: usize, total: usize, first: String },
}

impl HarnessError {
    /// Process exit code: 1 chain failure, 2 configuration, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::ChainFailures { .. } => 1,
            HarnessError::Config(_) | HarnessError::Json(_) => 2,
            HarnessError::Io(_) | HarnessError::Csv(_) => 3,
            HarnessError::Core(e) => match e {
                SsglError::Io(_) | SsglError::Csv(_) | SsglError::Parse { .. } => 3,
                SsglError::Config(_) | SsglError::Layout(_) => 2,
                _ => 1,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SsglError {
    #[error("layout error: {0}")]
    Layout(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("chain diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: u64, detail: String },

    #[error("sampler unstable: {0}")]
    Stability(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty trace: {0}")]
    EmptyTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SsglError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(SsglError::Domain(msg.into()))
}

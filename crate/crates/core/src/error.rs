//! Error type shared by every module in the crate.

use crate::sysid::IdentifiabilityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index error: {0}")]
    Index(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("identifiability condition failed: observed rank {} < required rank {}", .0.observed_rank, .0.required_rank)]
    Identifiability(Box<IdentifiabilityReport>),

    #[error("modelling assumption violated: {0}")]
    Assumption(String),

    #[error("trajectory diverged at step {step}")]
    Divergence { step: usize },

    #[error("scale guard: {0}")]
    Scale(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

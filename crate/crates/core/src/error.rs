use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("pipeline-order error: {0}")]
    PipelineOrder(String),

    /// No evaluable pairs, e.g. every sample censored.
    #[error("non-admissible: {0}")]
    NonAdmissible(String),

    #[error("test undefined: {0}")]
    Undefined(String),

    #[error("divergence at layer {layer}, step {step}: {detail}")]
    Divergence {
        layer: String,
        step: usize,
        detail: String,
    },

    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the CLI's structured errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Parameter(_) => "parameter",
            Error::Config(_) => "config",
            Error::Contract(_) => "contract",
            Error::Ingestion(_) => "ingestion",
            Error::Alignment(_) => "alignment",
            Error::PipelineOrder(_) => "pipeline_order",
            Error::NonAdmissible(_) => "non_admissible",
            Error::Undefined(_) => "undefined",
            Error::Divergence { .. } => "divergence",
            Error::Malformed { .. } => "malformed",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}

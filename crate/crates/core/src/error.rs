use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("missing input file: {0}")]
    MissingInput(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("feature assembly failed: {0}")]
    Assembly(String),

    #[error("borrower {borrower} not observed at month {month}")]
    NotObserved { borrower: u64, month: u32 },

    #[error("feature selection kept no columns")]
    EmptySelection,

    #[error("panel horizon {horizon} too short: snapshot month {month} needs {needed} months")]
    HorizonTooShort { horizon: u32, month: u32, needed: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag used in machine-parsable CLI errors and FFI status codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Parse { .. } => "parse",
            Error::MissingInput(_) => "missing_input",
            Error::Io { .. } => "io",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::Training(_) => "training",
            Error::Schema(_) => "schema",
            Error::Assembly(_) => "assembly",
            Error::NotObserved { .. } => "not_observed",
            Error::EmptySelection => "empty_selection",
            Error::HorizonTooShort { .. } => "horizon",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Serde(_) => "serde",
        }
    }
}

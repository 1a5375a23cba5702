use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column '{column}': cannot read {value:?} as a finite number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("value {value} of attribute '{attribute}' lies outside its domain [{lower}, {upper}]")]
    DomainViolation {
        attribute: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("attribute '{attribute}' has zero variance but a nonzero difference")]
    DegenerateVariance { attribute: String },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

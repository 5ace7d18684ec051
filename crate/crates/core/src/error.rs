use std::path::PathBuf;

use thiserror::Error;

/// Every failure the workbench can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: parse error: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("{file}:{line}: {field} out of range: {message}")]
    Range {
        file: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("{file}:{line}: invalid value for {field}: {message}")]
    Value {
        file: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("duplicate account id {id:?} in {file}")]
    DuplicateId { file: String, id: String },

    #[error("accounts missing from profiles: {}", .0.join(", "))]
    MissingProfiles(Vec<String>),

    #[error("accounts missing Botometer scores: {}", .0.join(", "))]
    MissingScores(Vec<String>),

    #[error("credulous-only view is empty")]
    EmptyView,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("account {account_id}: snapshot time precedes creation time")]
    Temporal { account_id: String },

    #[error("feature-set mismatch: expected {expected}, got {found}")]
    FeatureSetMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("SMO did not converge after {iterations} pair updates (worst KKT violation {worst_violation:.3e})")]
    Convergence {
        iterations: usize,
        worst_violation: f64,
    },

    #[error("results were not produced from the same fold plan")]
    Pairing,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("repeat {repeat}, fold {fold}: {source}")]
    Fold {
        repeat: usize,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{algorithm} on {feature_set}: {source}")]
    Cell {
        algorithm: String,
        feature_set: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration and input problems, 3 for
    /// failures that happen while computing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotPositiveDefinite { .. } | Error::Convergence { .. } => 3,
            Error::Fold { source, .. } | Error::Cell { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

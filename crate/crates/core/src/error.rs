use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: duplicate id {id:?} on lines {first} and {second}")]
    DuplicateId {
        path: PathBuf,
        id: String,
        first: usize,
        second: usize,
    },

    #[error("{path}:{line}: empty text for item {id:?} (pass allow_empty_text to accept)")]
    EmptyText {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("{path}: row {row}, column {column:?}: {message}")]
    BadCell {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("feature {feature:?} is not present on any item")]
    FeatureAbsent { feature: String },

    #[error("unknown feature {name:?}; known features: {}", known.join(", "))]
    UnknownFeature { name: String, known: Vec<String> },

    #[error("unknown category {category:?}; declared categories: {}", declared.join(", "))]
    UnknownCategory {
        category: String,
        declared: Vec<String>,
    },

    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },

    #[error("insufficient data for feature {feature:?} in corpus {corpus}: {have} usable values, need {need}")]
    InsufficientData {
        feature: String,
        corpus: String,
        have: usize,
        need: usize,
    },

    #[error("no testable features: {}", reasons.join("; "))]
    NoTestableFeatures { reasons: Vec<String> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("endpoint {endpoint}: authentication failed ({status})")]
    Auth { endpoint: String, status: u16 },

    #[error("endpoint {endpoint}: {message}")]
    Http { endpoint: String, message: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that indicate too little data rather than a usage
    /// or environment problem.
    pub fn is_insufficient_data(&self) -> bool {
        matches!(
            self,
            Error::InsufficientData { .. } | Error::NoTestableFeatures { .. } | Error::FeatureAbsent { .. }
        )
    }
}

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

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown label {0:?} (expected entailment, neutral or contradiction)")]
    UnknownLabel(String),

    #[error("unknown fact provenance {0:?} (expected list1, list2, ext or hypcond)")]
    UnknownProvenance(String),

    #[error("duplicate observation id {0:?}")]
    DuplicateId(String),

    #[error("observation {0:?} has no usable facts")]
    EmptyFactList(String),

    #[error("invalid fact: {0}")]
    InvalidFact(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no precomputed vector for observation {id:?}, fact {fact_index}")]
    MissingPair { id: String, fact_index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("observation {0:?} has no gold label")]
    Unlabeled(String),

    #[error("observation {0:?} carries an eval-only fact in a training pass")]
    EvalOnlyInTraining(String),

    #[error("non-finite loss at epoch {epoch}, observation {id:?}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        id: String,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fact strategy {strategy} is not allowed here: {reason}")]
    StrategyNotAllowed {
        strategy: String,
        reason: &'static str,
    },

    #[error("prompt for {kind} template requires {field}")]
    MissingPromptField {
        kind: &'static str,
        field: &'static str,
    },

    #[error("template {path}: {message}")]
    Template { path: String, message: String },

    #[error("generation service failed after {attempts} attempt(s): {message}")]
    Service { attempts: u32, message: String },

    #[error("could not parse a fact list for {id:?} ({kind}); raw response: {raw:?}")]
    ParseFailed {
        id: String,
        kind: String,
        raw: String,
    },

    #[error("cache miss for {id:?} ({kind}) in offline mode")]
    CacheMiss { id: String, kind: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("fact annotation for {id:?} index {fact_index}: {message}")]
    Annotation {
        id: String,
        fact_index: usize,
        message: String,
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
}

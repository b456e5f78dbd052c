use std::fmt;

use crate::kg::{EntityId, Relation};

/// Errors raised by the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{source_name} line {line}: field `{field}`: {message}")]
    Malformed {
        source_name: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("duplicate entity {0}")]
    DuplicateEntity(EntityId),

    #[error("entity not found: {0}")]
    NotFound(EntityId),

    #[error("relation {relation} is not defined for {kind}")]
    InvalidRelation { kind: String, relation: Relation },

    #[error("corpus has no papers")]
    EmptyCorpus,

    #[error("embedding unavailable for {id}: {reason}")]
    EmbeddingUnavailable { id: String, reason: String },

    #[error("cannot train feed `{feed_id}`: {reason}")]
    Training { feed_id: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn malformed(
        source_name: impl fmt::Display,
        line: usize,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Malformed {
            source_name: source_name.to_string(),
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

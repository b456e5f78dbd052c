use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    NotFound,
    Invalid,
    Stale,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Invalid => StatusCode::BAD_REQUEST,
            ErrorCode::Stale => StatusCode::CONFLICT,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Body of every failed request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Invalid, message)
    }

    pub fn stale(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Stale, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    /// Validation problems are the caller's fault; everything else is ours.
    pub fn is_validation(&self) -> bool {
        matches!(self.code, ErrorCode::NotFound | ErrorCode::Invalid | ErrorCode::Stale)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<polylens::Error> for ApiError {
    fn from(e: polylens::Error) -> Self {
        use polylens::Error::*;
        let code = match &e {
            NotFound(_) => ErrorCode::NotFound,
            Malformed { .. } | DuplicateEntity(_) | InvalidRelation { .. } | EmptyCorpus | Training { .. }
            | InvalidArgument(_) => ErrorCode::Invalid,
            EmbeddingUnavailable { .. } | Io(_) | Json(_) | Csv(_) => ErrorCode::Internal,
        };
        let detail = match &e {
            Malformed { source_name, line, field, .. } => Some(serde_json::json!({
                "source": source_name,
                "line": line,
                "field": field,
            })),
            NotFound(id) => Some(serde_json::json!({ "kind": id.kind, "id": id.key })),
            Training { feed_id, .. } => Some(serde_json::json!({ "feed_id": feed_id })),
            _ => None,
        };
        ApiError {
            code,
            message: e.to_string(),
            detail,
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::internal(format!("I/O error: {e}"))
    }
}

impl From<serde_json::Error> for ApiError {
    fn from(e: serde_json::Error) -> Self {
        ApiError::internal(format!("JSON error: {e}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

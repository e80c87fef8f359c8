//! API errors, rendered as `{"code": ..., "message": ...}`.

use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use tosqa_core::store::StoreError;
use tosqa_core::{EmbeddingError, QaError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApiError {
    #[error("platform {0:?} has no indexed document")]
    PlatformNotIndexed(String),
    #[error("question is empty")]
    EmptyQuestion,
    #[error("tau must lie in [0, 1], got {0}")]
    InvalidTau(String),
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::PlatformNotIndexed(_) => "platform_not_indexed",
            ApiError::EmptyQuestion => "empty_question",
            ApiError::InvalidTau(_) => "invalid_tau",
            ApiError::InvalidUrl(_) => "invalid_url",
            ApiError::InvalidRequest(_) => "invalid_request",
            ApiError::BackendUnavailable(_) => "backend_unavailable",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::PlatformNotIndexed(_) => StatusCode::NOT_FOUND,
            ApiError::EmptyQuestion | ApiError::InvalidTau(_) | ApiError::InvalidUrl(_) | ApiError::InvalidRequest(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ApiError::BackendUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { code: self.code().to_owned(), message: self.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::warn!(code = self.code(), "{self}");
        }
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<QaError> for ApiError {
    fn from(e: QaError) -> Self {
        match e {
            QaError::EmptyText => ApiError::EmptyQuestion,
            QaError::InvalidTau(t) => ApiError::InvalidTau(t.to_string()),
            QaError::BackendUnavailable(e) => ApiError::BackendUnavailable(e.to_string()),
            QaError::Embedding(EmbeddingError::BackendUnavailable(e)) => ApiError::BackendUnavailable(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::InvalidUrl(u) => ApiError::InvalidUrl(u),
            StoreError::InvalidPlatformId(_) => ApiError::InvalidRequest(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::InvalidRequest(e.body_text())
    }
}

//! Uniform `{error, detail}` error bodies.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use poolgaze_core::model::MachineRegistry;
use poolgaze_core::storage::StorageError;
use poolgaze_core::timeline::TimelineError;

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: &'static str,
    detail: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    registry: Option<&'a MachineRegistry>,
}

/// An error response. `code` is a stable machine-readable identifier.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub detail: String,
    /// Last known registry, sent along when the live source is down.
    pub registry: Option<MachineRegistry>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            detail: detail.into(),
            registry: None,
        }
    }

    pub fn bad_request(code: &'static str, detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, detail)
    }

    pub fn unknown_machine(name: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_machine", format!("no machine named {name:?}"))
    }

    pub fn source_unavailable(detail: impl Into<String>, registry: Option<MachineRegistry>) -> Self {
        ApiError {
            registry,
            ..ApiError::new(StatusCode::BAD_GATEWAY, "source_unavailable", detail)
        }
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }
}

impl From<StorageError> for ApiError {
    fn from(e: StorageError) -> Self {
        match e {
            StorageError::RegistryMissing(_) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "registry_missing", e.to_string())
            }
            StorageError::InvalidSpan(_) => ApiError::bad_request("invalid_span", e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<TimelineError> for ApiError {
    fn from(e: TimelineError) -> Self {
        match e {
            TimelineError::Storage(s) => s.into(),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code,
            detail: &self.detail,
            registry: self.registry.as_ref(),
        };
        (self.status, Json(body)).into_response()
    }
}

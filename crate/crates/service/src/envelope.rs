//! Response envelope and error codes.

use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::json;
use spanwise_core::Error;

/// `{"status":"ok","payload":...}`
pub struct Ok<T>(pub T);

impl<T: Serialize> IntoResponse for Ok<T> {
    fn into_response(self) -> Response {
        Json(json!({"status": "ok", "payload": self.0})).into_response()
    }
}

/// `{"status":"ok","payload":...}` with a non-200 success status.
pub struct Accepted<T>(pub T);

impl<T: Serialize> IntoResponse for Accepted<T> {
    fn into_response(self) -> Response {
        (StatusCode::ACCEPTED, Ok(self.0)).into_response()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

/// `{"status":"error","error":{"code":...,"message":...}}`
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

pub type ApiResult<T> = Result<T, ApiError>;

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"status": "error", "error": self.body}))).into_response()
    }
}

/// Stable code and HTTP status for each engine error.
pub fn classify(err: &Error) -> (StatusCode, &'static str) {
    use StatusCode as S;
    match err {
        Error::UnknownDocument(_) => (S::NOT_FOUND, "UNKNOWN_DOCUMENT"),
        Error::UnknownFunction(_) => (S::NOT_FOUND, "UNKNOWN_FUNCTION"),
        Error::UnknownLabel(_) => (S::BAD_REQUEST, "UNKNOWN_LABEL"),
        Error::InvalidSpan { .. } => (S::BAD_REQUEST, "INVALID_SPAN"),
        Error::SpanTooLong { .. } => (S::BAD_REQUEST, "SPAN_TOO_LONG"),
        Error::Invalid(_) => (S::BAD_REQUEST, "INVALID_REQUEST"),
        Error::EmptySelection => (S::CONFLICT, "EMPTY_SELECTION"),
        Error::NoSnapshot => (S::CONFLICT, "NO_SNAPSHOT"),
        Error::StaleSnapshot => (S::CONFLICT, "STALE_SNAPSHOT"),
        Error::Exhausted => (S::CONFLICT, "EXHAUSTED"),
        Error::MissingGold(_) => (S::CONFLICT, "MISSING_GOLD"),
        Error::FitFailed(_) => (S::INTERNAL_SERVER_ERROR, "FIT_FAILED"),
        _ => (S::INTERNAL_SERVER_ERROR, "INTERNAL"),
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let (status, code) = classify(&err);
        Self::new(status, code, err.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", rejection.body_text())
    }
}

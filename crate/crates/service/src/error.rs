use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use announce_core::Weeks;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    UnknownPolicy(String),
    #[error("{0}")]
    SolveUnavailable(String),
    #[error("no session with id {0}")]
    SessionNotFound(Uuid),
    #[error("session {0} has completed")]
    SessionCompleted(Uuid),
    #[error("estimate {estimate} outside [{t_min}, {t_max}]")]
    OutOfRange { estimate: Weeks, t_min: Weeks, t_max: Weeks },
    #[error("{0}")]
    WrongPhase(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownPolicy(_) => "UnknownPolicy",
            ServiceError::SolveUnavailable(_) => "SolveUnavailable",
            ServiceError::SessionNotFound(_) => "SessionNotFound",
            ServiceError::SessionCompleted(_) => "SessionCompleted",
            ServiceError::OutOfRange { .. } => "OutOfRange",
            ServiceError::WrongPhase(_) => "WrongPhase",
            ServiceError::InvalidRequest(_) => "InvalidRequest",
            ServiceError::Internal(_) => "Internal",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownPolicy(_) | ServiceError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::SessionNotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::SessionCompleted(_) | ServiceError::WrongPhase(_) => StatusCode::CONFLICT,
            ServiceError::SolveUnavailable(_) | ServiceError::OutOfRange { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code().to_string(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

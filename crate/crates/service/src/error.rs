use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("duplicate hypothesis id {0}")]
    DuplicateId(usize),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("hypothesis {0} is unknown")]
    UnknownHypothesis(usize),
    #[error("hypothesis {0} was already picked")]
    AlreadyPicked(usize),
    #[error("session stopped")]
    Stopped,
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error("policy {policy} needs a {needs} layout, session has {layout}")]
    IncompatiblePolicy { policy: &'static str, needs: &'static str, layout: &'static str },
    #[error("stored session is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable code carried in every error body.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Malformed(_) => "malformed_request",
            Error::InvalidConfig(_) => "invalid_config",
            Error::DuplicateId(_) => "duplicate_id",
            Error::UnknownSession(_) => "unknown_session",
            Error::UnknownHypothesis(_) => "unknown_hypothesis",
            Error::AlreadyPicked(_) => "already_picked",
            Error::Stopped => "session_stopped",
            Error::UnknownPolicy(_) => "unknown_policy",
            Error::IncompatiblePolicy { .. } => "incompatible_policy",
            Error::Corrupt(_) => "corrupt_session",
            Error::Io(_) => "storage_error",
            Error::Internal(_) => "internal_error",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Error::Malformed(_) | Error::InvalidConfig(_) | Error::DuplicateId(_) | Error::UnknownPolicy(_) => {
                StatusCode::BAD_REQUEST
            }
            Error::UnknownSession(_) | Error::UnknownHypothesis(_) => StatusCode::NOT_FOUND,
            Error::AlreadyPicked(_) | Error::Stopped => StatusCode::CONFLICT,
            Error::IncompatiblePolicy { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Corrupt(_) | Error::Io(_) | Error::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<gnt_core::Error> for Error {
    fn from(e: gnt_core::Error) -> Self {
        use gnt_core::Error as E;
        match e {
            E::UnknownHypothesis(id) => Error::UnknownHypothesis(id),
            E::AlreadyPicked(id) => Error::AlreadyPicked(id),
            E::DuplicateId(id) => Error::DuplicateId(id),
            E::Stopped => Error::Stopped,
            other => Error::InvalidConfig(other.to_string()),
        }
    }
}

impl From<gnt_harness::Error> for Error {
    fn from(e: gnt_harness::Error) -> Self {
        match e {
            gnt_harness::Error::Core(c) => c.into(),
            other => Error::InvalidConfig(other.to_string()),
        }
    }
}

impl IntoResponse for Error {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code(), "message": self.to_string() } });
        (self.status(), Json(body)).into_response()
    }
}

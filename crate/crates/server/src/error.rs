use std::time::Duration;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lungseg::Error;
use serde::Serialize;

/// Error returned by every endpoint, serialized as
/// `{"error": {"code", "message", "hint"?}}`.
#[derive(Debug)]
pub enum ApiError {
    Core(Error),
    UnknownSession(String),
    NothingToUndo,
    Timeout(Duration),
    Malformed(String),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

#[derive(Serialize)]
struct Body<'a> {
    error: Detail<'a>,
}

#[derive(Serialize)]
struct Detail<'a> {
    code: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    hint: Option<String>,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Core(e) => match e {
                Error::FileNotFound(_) => StatusCode::NOT_FOUND,
                Error::Io(_) | Error::Csv(_) | Error::Png(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::NothingToUndo => StatusCode::CONFLICT,
            ApiError::Timeout(_) => StatusCode::GATEWAY_TIMEOUT,
            ApiError::Malformed(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Core(e) => e.code(),
            ApiError::UnknownSession(_) => "unknown_session",
            ApiError::NothingToUndo => "nothing_to_undo",
            ApiError::Timeout(_) => "timeout",
            ApiError::Malformed(_) => "malformed_request",
            ApiError::Internal(_) => "internal",
        }
    }

    fn message(&self) -> String {
        match self {
            ApiError::Core(e) => e.to_string(),
            ApiError::UnknownSession(id) => format!("no session {id}"),
            ApiError::NothingToUndo => "no edit to undo".into(),
            ApiError::Timeout(d) => format!("segmentation exceeded {} s", d.as_secs_f64()),
            ApiError::Malformed(m) | ApiError::Internal(m) => m.clone(),
        }
    }

    fn hint(&self) -> Option<String> {
        match self {
            ApiError::Core(Error::MissingSide(side)) => Some(format!(
                "paint seed-{side} strokes on the {side} lung and run segment with mode \"seeded\""
            )),
            ApiError::Core(Error::NoCandidateRegion) => {
                Some("paint seed strokes on both lungs and run segment with mode \"seeded\"".into())
            }
            _ => None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{}: {}", self.code(), self.message());
        }
        let body = Body {
            error: Detail {
                code: self.code(),
                message: self.message(),
                hint: self.hint(),
            },
        };
        (status, Json(body)).into_response()
    }
}

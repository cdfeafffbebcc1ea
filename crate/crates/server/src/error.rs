use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lago_dr_core::Error;
use serde_json::json;

/// An API failure. The body is `{"error": <code>, "message": ...}`, plus
/// `"report"` for validation failures.
#[derive(Debug)]
pub enum ApiError {
    Core(Error),
    /// A malformed query string, JSON body or multipart upload.
    BadParameter(String),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

pub fn status_of(e: &Error) -> StatusCode {
    use Error::*;
    match e {
        ValidationFailed(_) | BadParentKind(_) | BadNode(_) | NoBitstreams(_) | InvalidFilename(_)
        | BadBitstream(_) | BadManifest(_) | UnknownCriterion(_) | InvalidEmail(_) | BadInterval | BadUrl(_)
        | SizeMismatch(_) | Unreadable(_) => StatusCode::BAD_REQUEST,
        Unauthorized => StatusCode::UNAUTHORIZED,
        Forbidden(_) => StatusCode::FORBIDDEN,
        UnknownNode(_) | UnknownSet(_) | UnknownPid(_) | UnknownBitstream(_) | ItemWithdrawn(_) | UnknownPeer(_)
        | UnknownAddress(_) => StatusCode::NOT_FOUND,
        DuplicateSlug(_) | DuplicatePeer(_) | DuplicateSubscription | AlreadyWithdrawn(_) => StatusCode::CONFLICT,
        NoWatermark(_) => StatusCode::CONFLICT,
        PeerUnreachable(_) | ProtocolError { .. } | BadToken { .. } => StatusCode::BAD_GATEWAY,
        ChecksumMismatch { .. } | StorageFailure(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Core(e) => {
                let status = status_of(&e);
                if status.is_server_error() {
                    tracing::error!(code = e.code(), error = %e, "request failed");
                }
                let mut body = json!({ "error": e.code(), "message": e.to_string() });
                if let Error::ValidationFailed(report) = &e {
                    body["report"] = serde_json::to_value(report).unwrap_or_default();
                }
                (status, body)
            }
            ApiError::BadParameter(message) => (StatusCode::BAD_REQUEST, json!({ "error": "BadParameter", "message": message })),
            ApiError::Internal(message) => {
                tracing::error!(%message, "internal error");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "StorageFailure", "message": message }))
            }
        };
        (status, Json(body)).into_response()
    }
}

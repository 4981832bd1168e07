use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use hrc_explain::explain::ExplainError;
use hrc_explain::session::SessionError;
use hrc_explain::sim::ScenarioError;
use serde_json::json;

/// Error envelope `{"error": {"code", "message", "detail_path"}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail_path: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            detail_path: None,
        }
    }

    pub fn at(mut self, path: impl Into<String>) -> Self {
        self.detail_path = Some(path.into());
        self
    }

    pub fn not_found(session: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session `{session}`"))
    }

    pub fn bad_body(e: serde_path_to_error::Error<serde_json::Error>) -> Self {
        let path = e.path().to_string();
        let err = Self::new(StatusCode::BAD_REQUEST, "invalid_body", e.into_inner().to_string());
        if path == "." {
            err
        } else {
            err.at(path)
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": {
                "code": self.code,
                "message": self.message,
                "detail_path": self.detail_path,
            }
        });
        (self.status, Json(body)).into_response()
    }
}

impl From<ScenarioError> for ApiError {
    fn from(e: ScenarioError) -> Self {
        let path = e.path().map(|p| format!("scenario.{p}"));
        let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_scenario", e.to_string());
        err.detail_path = path.or(Some("scenario".into()));
        err
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        match e {
            SessionError::Parse(p) => {
                let help = hrc_explain::query::GRAMMAR_HELP;
                let mut err = ApiError::new(S::BAD_REQUEST, "parse_error", format!("{message}\n\n{help}"));
                err.detail_path = Some(match p.position() {
                    Some(pos) => format!("text[{pos}]"),
                    None => "text".into(),
                });
                err
            }
            SessionError::Wire(w) => {
                let path = if w.path == "." { "structured".into() } else { format!("structured.{}", w.path) };
                ApiError::new(S::BAD_REQUEST, "invalid_query", message).at(path)
            }
            SessionError::Explain(x) => {
                let code = match x {
                    ExplainError::UnknownTick { .. } => "unknown_tick",
                    ExplainError::UnresolvedReferent => "unresolved_referent",
                    ExplainError::UnknownOccluder { .. } => "unknown_occluder",
                    ExplainError::ConflictingDeltas { .. } => "conflicting_deltas",
                    ExplainError::NothingToDo => "nothing_to_do",
                    ExplainError::NotCommandable { .. } => "not_commandable",
                    ExplainError::InvalidState(_) => "invalid_hypothesis",
                };
                let status = match x {
                    ExplainError::UnknownTick { .. } => S::NOT_FOUND,
                    _ => S::UNPROCESSABLE_ENTITY,
                };
                let err = ApiError::new(status, code, message);
                match x {
                    ExplainError::NotCommandable { .. } => err.at("behavior"),
                    ExplainError::UnknownTick { .. } => err.at("at"),
                    _ => err,
                }
            }
            SessionError::Safety(_) => ApiError::new(S::INTERNAL_SERVER_ERROR, "invalid_state", message),
            SessionError::Trace(_) => ApiError::new(S::INTERNAL_SERVER_ERROR, "envelope_violation", message),
            SessionError::Finished { .. } => ApiError::new(S::CONFLICT, "finished", message),
            SessionError::PausedByUser => ApiError::new(S::CONFLICT, "paused_by_user", message),
        }
    }
}

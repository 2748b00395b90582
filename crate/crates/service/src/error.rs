use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use qareply_core::{AnswerError, DraftError, IngestError, ProviderError, QuestionError, SessionError};
use serde_json::{json, Map, Value};

/// An HTTP error rendered as `{"error": code, "message": text, ...}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    extra: Map<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            extra: Map::new(),
        }
    }

    pub fn unknown_session() -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", "no such session")
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        // only the code is logged; messages can quote user content
        tracing::debug!(status = self.status.as_u16(), code = self.code, "request failed");
        let mut body = self.extra;
        body.insert("error".into(), json!(self.code));
        body.insert("message".into(), json!(self.message));
        (self.status, Json(Value::Object(body))).into_response()
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let status = match e {
            IngestError::BodyTooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<AnswerError> for ApiError {
    fn from(e: AnswerError) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::Answer(inner) => return inner.clone().into(),
            SessionError::EmptyFinalText => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::AlreadyFinalized
            | SessionError::NotQuestioned
            | SessionError::AlreadyQuestioned
            | SessionError::NotReady => StatusCode::CONFLICT,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

fn provider_error(e: &ProviderError) -> ApiError {
    ApiError::new(StatusCode::BAD_GATEWAY, e.code(), e.to_string())
}

impl From<DraftError> for ApiError {
    fn from(e: DraftError) -> Self {
        let status = match &e {
            DraftError::Provider(p) => return provider_error(p),
            DraftError::NotReady | DraftError::NoDraft | DraftError::AlreadyFinalized => StatusCode::CONFLICT,
            DraftError::NothingToSay => StatusCode::UNPROCESSABLE_ENTITY,
            DraftError::RegenerationLimit(_) => StatusCode::TOO_MANY_REQUESTS,
            DraftError::EmptyReply => StatusCode::BAD_GATEWAY,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<QuestionError> for ApiError {
    fn from(e: QuestionError) -> Self {
        match &e {
            QuestionError::Prompt(_) => Self::bad_request("empty_body", e.to_string()),
            QuestionError::Provider { source, .. } => provider_error(source),
            QuestionError::Parse(_) => Self::new(StatusCode::BAD_GATEWAY, "unparseable_questions", e.to_string()),
            QuestionError::Validation(_) => Self::new(StatusCode::BAD_GATEWAY, "invalid_questions", e.to_string()),
        }
    }
}

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use qareply_core::{
    apply_edit, generate_draft, generate_questions, parse_email_value, AnswerSet, DraftError, IngestError,
    QuestionError, QuestionSet, ReplyPreferences, Session, SessionError, SessionState, UserIdentity,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::store::{new_session_id, SessionHandle};
use crate::AppState;

type Shared = State<Arc<AppState>>;
type ApiResult = Result<Response, ApiError>;

pub(crate) fn routes(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/questions/retry", post(retry_questions))
        .route("/sessions/{id}/answers", post(submit_answers))
        .route("/sessions/{id}/preferences", post(set_preferences))
        .route("/sessions/{id}/draft", post(draft))
        .route("/sessions/{id}/draft/regenerate", post(regenerate))
        .route("/sessions/{id}/draft/edit", post(edit_draft))
        .route("/sessions/{id}/finalize", post(finalize))
        .with_state(state)
}

/// Decodes a JSON body; serde's message is returned to the caller but not
/// logged since it can quote the payload.
fn decode<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("invalid_payload", e.to_string()))
}

fn lookup(state: &AppState, id: &str) -> Result<SessionHandle, ApiError> {
    state
        .store
        .get(id, state.clock.now())
        .ok_or_else(ApiError::unknown_session)
}

fn persist(state: &AppState, handle: &SessionHandle, session: &Session) {
    if let Err(e) = state.store.persist(handle, session) {
        tracing::error!(session_id = %handle.id(), error = %e, "session snapshot failed");
    }
}

fn ok<T: Serialize>(status: StatusCode, body: T) -> ApiResult {
    Ok((status, Json(body)).into_response())
}

async fn healthz(State(state): Shared) -> Json<Value> {
    Json(json!({ "status": "ok", "sessions": state.store.len() }))
}

#[derive(Serialize)]
struct QuestionsBody<'a> {
    session_id: &'a str,
    state: SessionState,
    questions: &'a QuestionSet,
    attempts: u32,
}

/// Generates questions for a session that has none; on failure the error
/// body still carries the session id and an empty set so the caller can retry.
async fn questions_for(state: &AppState, handle: &SessionHandle, status: StatusCode) -> ApiResult {
    let mut session = handle.write().await;
    if session.question_set.is_some() {
        return Err(SessionError::AlreadyQuestioned.into());
    }
    session.ensure_open()?;
    match generate_questions(&session.email, &session.user, state.provider.as_ref(), &state.engine).await {
        Ok(generated) => {
            session.attach_questions(generated.questions)?;
            persist(state, handle, &session);
            tracing::info!(
                session_id = %handle.id(),
                questions = session.question_set.as_ref().map_or(0, QuestionSet::len),
                attempts = generated.attempts,
                "questions generated"
            );
            ok(
                status,
                QuestionsBody {
                    session_id: handle.id(),
                    state: session.state,
                    questions: session.question_set.as_ref().expect("just attached"),
                    attempts: generated.attempts,
                },
            )
        }
        Err(e) => {
            let attempts = match &e {
                QuestionError::Provider { attempts, .. } => *attempts,
                _ => state.engine.max_attempts,
            };
            let error = ApiError::from(e);
            tracing::warn!(session_id = %handle.id(), code = error.code, attempts, "question generation failed");
            Err(error
                .with("session_id", json!(handle.id()))
                .with("state", json!(session.state))
                .with("questions", json!(QuestionSet::empty(state.provider.source())))
                .with("attempts", json!(attempts)))
        }
    }
}

async fn create_session(State(state): Shared, body: Bytes) -> ApiResult {
    let payload: Value = decode(&body)?;
    let email_value = payload.get("email").ok_or(IngestError::MissingField("email".into()))?;
    let email = parse_email_value(email_value, "email.", &state.ingest)?;
    let user: UserIdentity = match payload.get("user") {
        None => return Err(IngestError::MissingField("user".into()).into()),
        Some(v) => {
            serde_json::from_value(v.clone()).map_err(|e| ApiError::bad_request("invalid_payload", e.to_string()))?
        }
    };
    if email.body.trim().is_empty() {
        return Err(ApiError::bad_request("empty_body", "email body is empty"));
    }
    let now = state.clock.now();
    let handle = state
        .store
        .insert(Session::new(new_session_id(), email, user, now), now);
    tracing::info!(session_id = %handle.id(), "session created");
    questions_for(&state, &handle, StatusCode::CREATED).await
}

async fn retry_questions(State(state): Shared, Path(id): Path<String>) -> ApiResult {
    let handle = lookup(&state, &id)?;
    questions_for(&state, &handle, StatusCode::OK).await
}

#[derive(Serialize)]
struct SessionView<'a> {
    #[serde(flatten)]
    session: &'a Session,
    expires_at: DateTime<Utc>,
}

async fn get_session(State(state): Shared, Path(id): Path<String>) -> ApiResult {
    let handle = lookup(&state, &id)?;
    let session = handle.read().await;
    ok(
        StatusCode::OK,
        SessionView {
            session: &session,
            expires_at: handle.expires_at(),
        },
    )
}

async fn submit_answers(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let handle = lookup(&state, &id)?;
    let answers: AnswerSet = decode(&body)?;
    let mut session = handle.write().await;
    session.submit_answers(answers)?;
    persist(&state, &handle, &session);
    tracing::info!(session_id = %id, answers = session.answers.0.len(), "answers stored");
    ok(
        StatusCode::OK,
        json!({ "session_id": id, "state": session.state, "answers": session.answers }),
    )
}

async fn set_preferences(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let handle = lookup(&state, &id)?;
    let preferences: ReplyPreferences = decode(&body)?;
    let mut session = handle.write().await;
    session.set_preferences(preferences)?;
    persist(&state, &handle, &session);
    tracing::info!(session_id = %id, "preferences stored");
    ok(
        StatusCode::OK,
        json!({ "session_id": id, "state": session.state, "preferences": session.preferences }),
    )
}

async fn run_draft(state: &AppState, handle: &SessionHandle, require_existing: bool) -> ApiResult {
    let mut session = handle.write().await;
    if require_existing && session.drafts.is_empty() {
        session.ensure_open()?;
        return Err(DraftError::NoDraft.into());
    }
    let draft = generate_draft(&mut session, state.provider.as_ref(), &state.engine, state.clock.now()).await?;
    persist(state, handle, &session);
    tracing::info!(session_id = %handle.id(), generation = draft.generation_index, "draft generated");
    ok(StatusCode::OK, draft)
}

async fn draft(State(state): Shared, Path(id): Path<String>) -> ApiResult {
    let handle = lookup(&state, &id)?;
    run_draft(&state, &handle, false).await
}

async fn regenerate(State(state): Shared, Path(id): Path<String>) -> ApiResult {
    let handle = lookup(&state, &id)?;
    run_draft(&state, &handle, true).await
}

#[derive(Deserialize)]
struct EditRequest {
    text: String,
}

async fn edit_draft(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let handle = lookup(&state, &id)?;
    let request: EditRequest = decode(&body)?;
    let mut session = handle.write().await;
    let draft = apply_edit(&mut session, request.text)?;
    persist(&state, &handle, &session);
    tracing::info!(session_id = %id, generation = draft.generation_index, "draft edited");
    ok(StatusCode::OK, draft)
}

#[derive(Deserialize)]
struct FinalizeRequest {
    final_text: String,
}

async fn finalize(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let handle = lookup(&state, &id)?;
    let request: FinalizeRequest = decode(&body)?;
    let mut session = handle.write().await;
    let now = state.clock.now();
    let record = session.finalize(request.final_text, now)?;
    handle.expire_no_later_than(now + state.finalized_retention);
    persist(&state, &handle, &session);
    tracing::info!(
        session_id = %id,
        final_chars = record.final_char_count,
        prompt_chars = record.prompt_char_count,
        "session finalized"
    );
    ok(StatusCode::OK, record)
}

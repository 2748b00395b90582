mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::Duration;
use common::{create_payload, Harness, BODY};
use qareply_core::gateway::ScriptedProvider;
use qareply_core::{MockProvider, ProviderError};
use qareply_service::{Clock, ServiceConfig};
use serde_json::json;
use tower::ServiceExt;

fn mock() -> Harness {
    Harness::new(Arc::new(MockProvider::default()))
}

#[tokio::test]
async fn healthz_reports_ok() {
    let h = mock();
    let (status, body) = h.get("/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn create_returns_anchored_questions() {
    let h = mock();
    let (status, body) = h.create(BODY).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = body["session_id"].as_str().unwrap();
    assert_eq!(id.len(), 32);
    assert_eq!(body["state"], "questioned");
    let questions = body["questions"]["questions"].as_array().unwrap();
    assert_eq!(questions.len(), 3);
    let chars: Vec<char> = BODY.chars().collect();
    for q in questions {
        let start = q["anchor"]["start"].as_u64().unwrap() as usize;
        let length = q["anchor"]["length"].as_u64().unwrap() as usize;
        let slice: String = chars[start..start + length].iter().collect();
        assert_eq!(slice, q["corresponding_part"].as_str().unwrap());
    }
    let (status, session) = h.get(&format!("/sessions/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(session["id"], id);
    assert_eq!(session["email"]["body"], BODY);
    assert_eq!(session["opened_at"], "2023-11-14T22:13:20Z");
}

#[tokio::test]
async fn malformed_payload_creates_nothing() {
    let h = mock();
    let mut payload = create_payload(BODY);
    payload["email"].as_object_mut().unwrap().remove("sender_name");
    let (status, body) = h.post("/sessions", payload).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "missing_field");
    assert!(body["message"].as_str().unwrap().contains("email.sender_name"));

    let (status, body) = h
        .post("/sessions", json!({ "email": create_payload(BODY)["email"] }))
        .await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("missing_field"))
    );

    let (status, body) = h.send("POST", "/sessions", None).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_payload"))
    );

    let (status, body) = h.create("   ").await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("empty_body"))
    );
    assert!(h.state.store.is_empty());
}

#[tokio::test]
async fn provider_outage_keeps_session_for_retry() {
    let outage = || {
        Err(ProviderError::Transport {
            attempts: 1,
            message: "connection refused".into(),
        })
    };
    let provider = Arc::new(ScriptedProvider::new([outage(), outage(), outage()]));
    let h = Harness::new(provider.clone());
    let (status, body) = h.create(BODY).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(body["error"], "transport_error");
    assert_eq!(body["questions"]["questions"], json!([]));
    assert_eq!(body["state"], "created");
    let id = body["session_id"].as_str().unwrap();
    assert_eq!(provider.calls(), 3);

    // the script is exhausted, so the retry falls through to the mock
    let (status, body) = h.post(&format!("/sessions/{id}/questions/retry"), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["questions"]["questions"].as_array().unwrap().len(), 3);
    let (status, body) = h.post(&format!("/sessions/{id}/questions/retry"), json!({})).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::CONFLICT, Some("already_questioned"))
    );
}

#[tokio::test]
async fn answers_are_validated_and_overwritten_atomically() {
    let h = mock();
    let id = h.open(BODY).await;
    let uri = format!("/sessions/{id}/answers");

    let (status, body) = h.post(&uri, json!([{ "question_id": "1", "selected": [1] }])).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["state"], "answered");

    let (status, body) = h
        .post(
            &uri,
            json!([{ "question_id": "1", "selected": [0] }, { "question_id": "2", "selected": [5] }]),
        )
        .await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("index_out_of_range"))
    );
    let (_, session) = h.get(&format!("/sessions/{id}")).await;
    assert_eq!(session["answers"][0]["selected"], json!([1]));

    let (status, body) = h.post(&uri, json!([{ "question_id": "9", "selected": [0] }])).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("unknown_question_id"))
    );

    let (status, body) = h.post(&uri, json!({ "not": "an array" })).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_payload"))
    );

    let (status, _) = h
        .post(
            &uri,
            json!([{ "question_id": "2", "selected": [0], "custom_options": ["after lunch"] }]),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    let (_, session) = h.get(&format!("/sessions/{id}")).await;
    assert_eq!(session["answers"].as_array().unwrap().len(), 1);
    assert_eq!(session["answers"][0]["question_id"], "2");
}

#[tokio::test]
async fn preferences_accept_reject_and_overwrite() {
    let h = mock();
    let id = h.open(BODY).await;
    let uri = format!("/sessions/{id}/preferences");
    let (status, body) = h
        .post(&uri, json!({ "formality": "formal", "relationship": "my manager" }))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["preferences"]["formality"], "formal");

    let (status, body) = h.post(&uri, json!({ "tone": "sarcastic" })).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_payload"))
    );

    let (status, body) = h.post(&uri, json!({ "tone": "friendly" })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["preferences"]["formality"], "neutral");
    assert_eq!(body["preferences"]["relationship"], "");
}

#[tokio::test]
async fn draft_regenerate_edit_flow() {
    let h = mock();
    let id = h.open(BODY).await;
    let (status, body) = h.post(&format!("/sessions/{id}/draft/regenerate"), json!({})).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::CONFLICT, Some("no_draft"))
    );

    let (status, body) = h.post(&format!("/sessions/{id}/draft"), json!({})).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("nothing_to_say"))
    );

    h.post(
        &format!("/sessions/{id}/answers"),
        json!([{ "question_id": "1", "selected": [0] }, { "question_id": "2", "skipped": true }]),
    )
    .await;
    let (status, first) = h.post(&format!("/sessions/{id}/draft"), json!({})).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    assert_eq!(first["generation_index"], 1);
    assert!(first["text"].as_str().unwrap().contains("→ Yes"));

    let (status, second) = h.post(&format!("/sessions/{id}/draft/regenerate"), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(second["generation_index"], 2);

    let (status, edited) = h
        .post(&format!("/sessions/{id}/draft/edit"), json!({ "text": "Edited reply" }))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(edited["edited"], true);
    let (_, session) = h.get(&format!("/sessions/{id}")).await;
    assert_eq!(session["state"], "drafted");
    assert_eq!(session["drafts"].as_array().unwrap().len(), 2);
    assert_eq!(session["drafts"][0]["text"], first["text"]);
    assert_eq!(session["drafts"][1]["text"], "Edited reply");
}

#[tokio::test]
async fn nothing_to_say_unless_instruction_present() {
    let h = mock();
    let id = h.open(BODY).await;
    let skipped: Vec<_> = (1..=3)
        .map(|i| json!({ "question_id": i.to_string(), "skipped": true }))
        .collect();
    h.post(&format!("/sessions/{id}/answers"), json!(skipped)).await;
    let (status, body) = h.post(&format!("/sessions/{id}/draft"), json!({})).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("nothing_to_say"))
    );
    h.post(
        &format!("/sessions/{id}/preferences"),
        json!({ "free_instruction": "Decline politely" }),
    )
    .await;
    let (status, body) = h.post(&format!("/sessions/{id}/draft"), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["text"].as_str().unwrap().contains("Note: Decline politely"));
}

#[tokio::test]
async fn regeneration_limit_is_429() {
    let config = ServiceConfig {
        engine: qareply_core::EngineConfig {
            regeneration_limit: 2,
            ..Default::default()
        },
        ..ServiceConfig::default()
    };
    let h = Harness::with_config(Arc::new(MockProvider::default()), config);
    let id = h.open(BODY).await;
    h.post(
        &format!("/sessions/{id}/answers"),
        json!([{ "question_id": "1", "selected": [0] }]),
    )
    .await;
    for _ in 0..2 {
        assert_eq!(
            h.post(&format!("/sessions/{id}/draft"), json!({})).await.0,
            StatusCode::OK
        );
    }
    let (status, body) = h.post(&format!("/sessions/{id}/draft/regenerate"), json!({})).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::TOO_MANY_REQUESTS, Some("regeneration_limit"))
    );
}

#[tokio::test]
async fn finalize_computes_metrics_then_purges() {
    let h = mock();
    let id = h.open(BODY).await;
    let uri = format!("/sessions/{id}/finalize");
    let (status, body) = h.post(&uri, json!({ "final_text": "too early" })).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::CONFLICT, Some("not_ready"))
    );

    h.post(
        &format!("/sessions/{id}/answers"),
        json!([{ "question_id": "1", "selected": [0], "custom_options": ["Yes on Fri", "by bus"] }]),
    )
    .await;
    h.post(
        &format!("/sessions/{id}/preferences"),
        json!({ "free_instruction": "0123456789" }),
    )
    .await;
    let (status, body) = h.post(&uri, json!({ "final_text": "  " })).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("empty_final_text"))
    );

    h.clock.advance(Duration::seconds(150));
    let (status, record) = h.post(&uri, json!({ "final_text": "x".repeat(300) })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        record,
        json!({
            "condition": "qa_based",
            "final_char_count": 300,
            "elapsed_seconds": 150.0,
            "prompt_char_count": 26
        })
    );

    let (status, body) = h.post(&uri, json!({ "final_text": "again" })).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::CONFLICT, Some("already_finalized"))
    );
    let (status, _) = h.post(&format!("/sessions/{id}/answers"), json!([])).await;
    assert_eq!(status, StatusCode::CONFLICT);

    h.clock.advance(Duration::seconds(3_599));
    assert_eq!(h.get(&format!("/sessions/{id}")).await.0, StatusCode::OK);
    h.clock.advance(Duration::seconds(1));
    assert_eq!(h.get(&format!("/sessions/{id}")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn idle_sessions_expire_after_ttl() {
    let h = mock();
    let a = h.open(BODY).await;
    h.clock.advance(Duration::seconds(86_399));
    let b = h.open(BODY).await;
    assert_eq!(h.get(&format!("/sessions/{a}")).await.0, StatusCode::OK);
    h.clock.advance(Duration::seconds(1));
    assert_eq!(h.get(&format!("/sessions/{a}")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(
        h.post(&format!("/sessions/{a}/draft"), json!({})).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(h.get(&format!("/sessions/{b}")).await.0, StatusCode::OK);
    h.clock.advance(Duration::seconds(86_400));
    assert_eq!(h.state.store.purge_expired(h.clock.now()), 1);
}

#[tokio::test]
async fn probing_ids_finds_nothing() {
    let h = mock();
    let real = h.open(BODY).await;
    let mut probes = vec![
        "0".repeat(32),
        real[..31].to_string(),
        format!("{real}0"),
        real.to_uppercase(),
        "..%2F..%2Fetc".to_string(),
    ];
    probes.extend((0..50).map(|_| qareply_service::new_session_id()));
    for probe in probes {
        if probe == real {
            continue;
        }
        for (method, suffix) in [
            ("GET", ""),
            ("POST", "/answers"),
            ("POST", "/draft"),
            ("POST", "/finalize"),
        ] {
            let (status, body) = h
                .send(method, &format!("/sessions/{probe}{suffix}"), Some(json!([])))
                .await;
            assert_eq!(status, StatusCode::NOT_FOUND, "{method} {probe}{suffix}");
            assert!(body.is_null() || body["error"] == "unknown_session");
        }
    }
}

#[tokio::test]
async fn cors_allows_configured_origin_only() {
    let h = mock();
    let preflight = |origin: &str| {
        Request::builder()
            .method("OPTIONS")
            .uri("/sessions")
            .header("origin", origin)
            .header("access-control-request-method", "POST")
            .body(Body::empty())
            .unwrap()
    };
    let allowed = h.app.clone().oneshot(preflight("http://localhost:5173")).await.unwrap();
    assert_eq!(
        allowed.headers()["access-control-allow-origin"],
        "http://localhost:5173"
    );
    let denied = h.app.clone().oneshot(preflight("http://evil.example")).await.unwrap();
    assert!(denied.headers().get("access-control-allow-origin").is_none());
}

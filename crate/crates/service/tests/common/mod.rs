#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Utc};
use http_body_util::BodyExt;
use qareply_core::CompletionProvider;
use qareply_service::{router, AppState, ManualClock, ServiceConfig, StoreMode};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const BODY: &str = "Hello team,\nAre you free on Monday? The venue is booked. Could you bring the slides.\nWhat time works best?\nCheers";

pub fn start() -> DateTime<Utc> {
    DateTime::from_timestamp(1_700_000_000, 0).unwrap()
}

pub struct Harness {
    pub app: Router,
    pub state: Arc<AppState>,
    pub clock: Arc<ManualClock>,
}

impl Harness {
    pub fn new(provider: Arc<dyn CompletionProvider>) -> Self {
        Self::with_config(provider, ServiceConfig::default())
    }

    pub fn with_config(provider: Arc<dyn CompletionProvider>, config: ServiceConfig) -> Self {
        let clock = Arc::new(ManualClock::new(start()));
        let state = Arc::new(AppState::new(&config, provider, clock.clone(), StoreMode::Ephemeral));
        Self {
            app: router(state.clone(), &config),
            state,
            clock,
        }
    }

    pub async fn send(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let request = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        let response = self.app.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let bytes = response.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.send("GET", uri, None).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.send("POST", uri, Some(body)).await
    }

    pub async fn create(&self, body: &str) -> (StatusCode, Value) {
        self.post("/sessions", create_payload(body)).await
    }

    /// Creates a session and returns its id, asserting success.
    pub async fn open(&self, body: &str) -> String {
        let (status, value) = self.create(body).await;
        assert_eq!(status, StatusCode::CREATED, "{value}");
        value["session_id"].as_str().unwrap().to_string()
    }
}

pub fn create_payload(body: &str) -> Value {
    json!({
        "email": {
            "subject": "Planning",
            "sender_name": "Aiko",
            "sender_address": "aiko@example.org",
            "body": body,
            "thread": []
        },
        "user": { "name": "Ben", "address": "ben@example.org" }
    })
}

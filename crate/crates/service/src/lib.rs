//! HTTP session service for the question-driven reply workflow.
//!
//! Sessions live in memory by default and expire after a TTL. Logs carry
//! session ids, states, counts, and error codes only; email content, answers,
//! and drafts never reach a log line.

mod clock;
mod error;
pub mod persist;
mod routes;
mod store;

use std::future::Future;
use std::sync::Arc;
use std::time::Duration as StdDuration;

use axum::http::{HeaderValue, Method};
use axum::Router;
use chrono::Duration;
use qareply_core::{CompletionProvider, EngineConfig, IngestConfig};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use clock::{Clock, ManualClock, SystemClock};
pub use error::ApiError;
pub use persist::{EncryptedDir, PersistError};
pub use store::{new_session_id, SessionHandle, SessionStore, StoreMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub ttl_seconds: i64,
    /// How long a finalized session stays readable.
    pub finalized_retention_seconds: i64,
    pub sweep_interval_seconds: u64,
    /// Allowed browser origins; `"*"` allows any.
    pub cors_origins: Vec<String>,
    pub engine: EngineConfig,
    pub ingest: IngestConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            ttl_seconds: 86_400,
            finalized_retention_seconds: 3_600,
            sweep_interval_seconds: 60,
            cors_origins: vec!["http://localhost:5173".into(), "http://127.0.0.1:5173".into()],
            engine: EngineConfig::default(),
            ingest: IngestConfig::default(),
        }
    }
}

pub struct AppState {
    pub store: SessionStore,
    pub provider: Arc<dyn CompletionProvider>,
    pub clock: Arc<dyn Clock>,
    pub engine: EngineConfig,
    pub ingest: IngestConfig,
    pub finalized_retention: Duration,
}

impl AppState {
    pub fn new(
        config: &ServiceConfig,
        provider: Arc<dyn CompletionProvider>,
        clock: Arc<dyn Clock>,
        mode: StoreMode,
    ) -> Self {
        Self {
            store: SessionStore::new(Duration::seconds(config.ttl_seconds), mode),
            provider,
            clock,
            engine: config.engine.clone(),
            ingest: config.ingest.clone(),
            finalized_retention: Duration::seconds(config.finalized_retention_seconds),
        }
    }

    /// Ephemeral store on the system clock.
    pub fn ephemeral(config: &ServiceConfig, provider: Arc<dyn CompletionProvider>) -> Self {
        Self::new(config, provider, Arc::new(SystemClock), StoreMode::Ephemeral)
    }
}

pub fn cors_layer(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers(Any);
    if origins.iter().any(|o| o == "*") {
        return layer.allow_origin(Any);
    }
    let allowed: Vec<HeaderValue> = origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    layer.allow_origin(AllowOrigin::list(allowed))
}

pub fn router(state: Arc<AppState>, config: &ServiceConfig) -> Router {
    routes::routes(state).layer(cors_layer(&config.cors_origins))
}

/// Periodically drops expired sessions.
pub fn spawn_sweeper(state: Arc<AppState>, every: StdDuration) -> JoinHandle<()> {
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(every);
        loop {
            ticker.tick().await;
            let purged = state.store.purge_expired(state.clock.now());
            if purged > 0 {
                tracing::info!(purged, "expired sessions purged");
            }
        }
    })
}

/// Serves until `shutdown` resolves, then forgets every in-memory session.
pub async fn serve(
    listener: TcpListener,
    state: Arc<AppState>,
    config: &ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let restored = state
        .store
        .restore(state.clock.now())
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    if restored > 0 {
        tracing::info!(restored, "sessions restored from encrypted store");
    }
    let sweeper = spawn_sweeper(
        state.clone(),
        StdDuration::from_secs(config.sweep_interval_seconds.max(1)),
    );
    let app = router(state.clone(), config);
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    sweeper.abort();
    let dropped = state.store.clear();
    tracing::info!(dropped, "session store cleared on shutdown");
    result
}

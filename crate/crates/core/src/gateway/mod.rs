//! Completion-provider contract shared by the live HTTP adapter and the
//! deterministic mock.

use std::fmt;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::QuestionSource;
use crate::prompt::PromptText;

#[cfg(feature = "live")]
mod live;
mod mock;

#[cfg(feature = "live")]
pub use live::LiveProvider;
pub use mock::{mock_complete, MockProvider, ScriptedProvider, MOCK_ACCEPTANCE_SENTENCE, MOCK_REQUEST_KEYWORDS};

pub const ENV_API_KEY: &str = "QAREPLY_API_KEY";
pub const ENV_BASE_URL: &str = "QAREPLY_BASE_URL";
pub const ENV_MODEL: &str = "QAREPLY_MODEL";

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
    pub latency: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("unexpected provider response: {0}")]
    InvalidResponse(String),
}

impl ProviderError {
    /// Whether a fresh call might succeed.
    pub fn is_retryable(&self) -> bool {
        !matches!(self, Self::Auth(_))
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::Auth(_) => "auth_error",
            Self::RateLimited { .. } => "rate_limited",
            Self::Timeout { .. } => "timeout",
            Self::Transport { .. } => "transport_error",
            Self::InvalidResponse(_) => "invalid_response",
        }
    }
}

#[async_trait]
pub trait CompletionProvider: Send + Sync {
    async fn complete(&self, prompt: &PromptText) -> Result<Completion, ProviderError>;

    /// Provenance recorded on question sets produced through this provider.
    fn source(&self) -> QuestionSource;
}

/// API key wrapper that never prints or serializes its contents.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(String);

impl SecretKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub base_url: String,
    #[serde(skip)]
    pub api_key: Option<SecretKey>,
    pub model_name: String,
    pub temperature: f64,
    pub timeout_seconds: f64,
    pub max_retries: u32,
    /// First backoff delay; doubles on every retry.
    pub backoff_base_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key: None,
            model_name: "gpt-4o".into(),
            temperature: 0.0,
            timeout_seconds: 60.0,
            max_retries: 3,
            backoff_base_ms: 500,
        }
    }
}

impl ProviderConfig {
    /// Overlays `QAREPLY_*` environment variables onto `self`.
    pub fn with_env(mut self) -> Self {
        self.apply_env(|name| std::env::var(name).ok());
        self
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(key) = lookup(ENV_API_KEY).filter(|k| !k.is_empty()) {
            self.api_key = Some(SecretKey::new(key));
        }
        if let Some(url) = lookup(ENV_BASE_URL).filter(|u| !u.is_empty()) {
            self.base_url = url;
        }
        if let Some(model) = lookup(ENV_MODEL).filter(|m| !m.is_empty()) {
            self.model_name = model;
        }
    }

    pub fn backoff_delay(&self, retry: u32) -> Duration {
        Duration::from_millis(self.backoff_base_ms.saturating_mul(1u64 << retry.min(16)))
    }
}

use std::time::{Duration, Instant};

use async_trait::async_trait;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{Completion, CompletionProvider, ProviderConfig, ProviderError};
use crate::domain::QuestionSource;
use crate::prompt::PromptText;

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReplyMessage,
}

#[derive(Deserialize)]
struct ChatReplyMessage {
    content: Option<String>,
}

enum Failure {
    Final(ProviderError),
    Retry {
        error: ProviderError,
        wait: Option<Duration>,
    },
}

/// Chat-completion client with bearer auth and bounded retries.
#[derive(Debug, Clone)]
pub struct LiveProvider {
    config: ProviderConfig,
    client: reqwest::Client,
}

impl LiveProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_seconds.max(0.001)))
            .build()
            .map_err(|e| ProviderError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    async fn attempt(&self, key: &str, prompt: &PromptText, attempt: u32) -> Result<String, Failure> {
        let request = ChatRequest {
            model: &self.config.model_name,
            messages: [ChatMessage {
                role: "user",
                content: &prompt.text,
            }],
            temperature: self.config.temperature,
        };
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(key)
            .json(&request)
            .send()
            .await
            .map_err(|e| Failure::Retry {
                error: if e.is_timeout() {
                    ProviderError::Timeout { attempts: attempt }
                } else {
                    ProviderError::Transport {
                        attempts: attempt,
                        message: e.without_url().to_string(),
                    }
                },
                wait: None,
            })?;

        let status = response.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(Failure::Final(ProviderError::Auth(format!(
                "provider returned {status}"
            ))));
        }
        if status == StatusCode::TOO_MANY_REQUESTS {
            let wait = response
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(|secs| Duration::from_secs(secs.min(30)));
            return Err(Failure::Retry {
                error: ProviderError::RateLimited { attempts: attempt },
                wait,
            });
        }
        if status.is_server_error() || status == StatusCode::REQUEST_TIMEOUT {
            return Err(Failure::Retry {
                error: ProviderError::Transport {
                    attempts: attempt,
                    message: format!("provider returned {status}"),
                },
                wait: None,
            });
        }
        if !status.is_success() {
            return Err(Failure::Final(ProviderError::InvalidResponse(format!(
                "provider returned {status}"
            ))));
        }
        let body: ChatResponse = response
            .json()
            .await
            .map_err(|e| Failure::Final(ProviderError::InvalidResponse(e.without_url().to_string())))?;
        body.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Failure::Final(ProviderError::InvalidResponse("no message content".into())))
    }
}

#[async_trait]
impl CompletionProvider for LiveProvider {
    async fn complete(&self, prompt: &PromptText) -> Result<Completion, ProviderError> {
        let Some(key) = self.config.api_key.as_ref() else {
            return Err(ProviderError::Auth(format!("{} is not set", super::ENV_API_KEY)));
        };
        let started = Instant::now();
        let mut attempt = 1;
        loop {
            match self.attempt(key.expose(), prompt, attempt).await {
                Ok(text) => {
                    let latency = started.elapsed();
                    tracing::debug!(
                        attempts = attempt,
                        latency_ms = latency.as_millis() as u64,
                        "completion ok"
                    );
                    return Ok(Completion {
                        text,
                        attempts: attempt,
                        latency,
                    });
                }
                Err(Failure::Final(error)) => return Err(error),
                Err(Failure::Retry { error, wait }) => {
                    if attempt > self.config.max_retries {
                        return Err(error);
                    }
                    tracing::debug!(attempt, code = error.code(), "retrying completion");
                    let delay = wait.unwrap_or_else(|| self.config.backoff_delay(attempt - 1));
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
            }
        }
    }

    fn source(&self) -> QuestionSource {
        QuestionSource::LiveLlm
    }
}

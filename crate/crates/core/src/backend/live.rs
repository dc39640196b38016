use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::request::{ChatRequest, ChatResponse, Usage};
use super::{BackendError, ChatBackend};

pub const DEFAULT_API_KEY_ENV: &str = "MASCA_API_KEY";
const TRANSIENT_STATUSES: [u16; 6] = [408, 429, 500, 502, 503, 504];
const BODY_EXCERPT: usize = 300;

/// Connection settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
    pub attempts: u32,
    pub backoff_base_ms: u64,
    /// Body field for the token budget; some reasoning models need `max_completion_tokens`.
    pub max_tokens_field: String,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 120.0,
            max_in_flight: 4,
            attempts: 3,
            backoff_base_ms: 1000,
            max_tokens_field: "max_tokens".into(),
        }
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    api_key: String,
    client: reqwest::Client,
    limiter: Arc<Semaphore>,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| BackendError::Credential {
            var: config.api_key_env.clone(),
        })?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: LiveConfig, api_key: String) -> Result<Self, BackendError> {
        if config.max_in_flight == 0
            || config.attempts == 0
            || config.timeout_secs.is_nan()
            || config.timeout_secs <= 0.0
        {
            return Err(BackendError::Config(
                "max_in_flight, attempts and timeout_secs must be positive".into(),
            ));
        }
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            limiter: Arc::new(Semaphore::new(config.max_in_flight)),
            config,
            api_key,
            client,
        })
    }

    /// The request body sent to the endpoint.
    pub fn wire_body(&self, request: &ChatRequest) -> Value {
        wire_body(request, &self.config.max_tokens_field)
    }

    async fn attempt(&self, body: &Value) -> Result<(u16, String), reqwest::Error> {
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .await?;
        let status = response.status().as_u16();
        let text = response.text().await?;
        Ok((status, text))
    }
}

pub fn wire_body(request: &ChatRequest, max_tokens_field: &str) -> Value {
    let mut body = json!({
        "model": request.model_id,
        "messages": request.messages,
        "temperature": request.temperature,
    });
    body[max_tokens_field] = json!(request.max_tokens);
    body
}

pub fn parse_wire_response(body: &str) -> Result<(String, Usage), BackendError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| BackendError::Malformed(format!("{e}: {}", excerpt(body))))?;
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Malformed(format!("missing choices[0].message.content: {}", excerpt(body))))?
        .to_string();
    let count = |field: &str| {
        value
            .pointer(&format!("/usage/{field}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok((
        text,
        Usage {
            prompt_tokens: count("prompt_tokens"),
            completion_tokens: count("completion_tokens"),
        },
    ))
}

fn excerpt(body: &str) -> String {
    match body.char_indices().nth(BODY_EXCERPT) {
        Some((idx, _)) => format!("{}…", &body[..idx]),
        None => body.to_string(),
    }
}

#[async_trait]
impl ChatBackend for LiveBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let body = self.wire_body(request);
        let _permit = self.limiter.acquire().await.expect("limiter never closes");
        let started = Instant::now();
        let mut last_error = String::new();
        let mut last_status = None;
        for attempt in 0..self.config.attempts {
            if attempt > 0 {
                let delay = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                tokio::time::sleep(Duration::from_millis(delay)).await;
            }
            match self.attempt(&body).await {
                Ok((status, text)) if (200..300).contains(&status) => {
                    let (text, usage) = parse_wire_response(&text)?;
                    return Ok(ChatResponse {
                        text,
                        usage,
                        cached: false,
                        latency_ms: started.elapsed().as_secs_f64() * 1000.0,
                    });
                }
                Ok((status @ (401 | 403), text)) => {
                    return Err(BackendError::Auth {
                        status,
                        body: excerpt(&text),
                    })
                }
                Ok((status, text)) if TRANSIENT_STATUSES.contains(&status) => {
                    tracing::warn!(status, attempt, tag = %request.tag, "transient backend failure");
                    last_status = Some(status);
                    last_error = excerpt(&text);
                }
                Ok((status, text)) => {
                    return Err(BackendError::Http {
                        status,
                        body: excerpt(&text),
                    })
                }
                Err(e) => {
                    tracing::warn!(error = %e, attempt, tag = %request.tag, "network failure");
                    last_status = None;
                    last_error = e.to_string();
                }
            }
        }
        let attempts = self.config.attempts;
        Err(match last_status {
            Some(429) => BackendError::RateLimited {
                attempts,
                body: last_error,
            },
            Some(status) => BackendError::Http {
                status,
                body: format!("after {attempts} attempts: {last_error}"),
            },
            None => BackendError::Network {
                attempts,
                message: last_error,
            },
        })
    }
}

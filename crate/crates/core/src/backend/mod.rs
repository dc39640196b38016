//! Chat-completion backends: a live OpenAI-compatible HTTP client, a
//! scripted backend for reproducible runs, a content-addressed response
//! cache, and JSON extraction from model text.

mod cache;
mod extract;
mod live;
mod request;
mod scripted;

use async_trait::async_trait;

pub use cache::{CachedBackend, ResponseCache};
pub use extract::{extract_json, ExtractError, Extracted};
pub use live::{parse_wire_response, wire_body, LiveBackend, LiveConfig, DEFAULT_API_KEY_ENV};
pub use request::{
    sha256_hex, ChatRequest, ChatResponse, Message, Role, Usage, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE,
};
pub use scripted::{ScriptEntry, ScriptedBackend, WILDCARD};

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("credential variable {var} is not set")]
    Credential { var: String },
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("authentication failed (HTTP {status}): {body}")]
    Auth { status: u16, body: String },
    #[error("rate limit still exceeded after {attempts} attempts: {body}")]
    RateLimited { attempts: u32, body: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no scripted response for tag `{tag}`")]
    ScriptMiss { tag: String },
    #[error("cache: {0}")]
    Cache(String),
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

#[async_trait]
impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request).await
    }
}

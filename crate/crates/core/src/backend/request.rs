use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BackendError;

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Agent role or baseline name; used for script lookup and auditing only.
    pub tag: String,
}

impl ChatRequest {
    pub fn new(
        model_id: impl Into<String>,
        messages: Vec<Message>,
        tag: impl Into<String>,
    ) -> Result<Self, BackendError> {
        let request = Self {
            model_id: model_id.into(),
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            tag: tag.into(),
        };
        request.validate()?;
        Ok(request)
    }

    pub fn with_sampling(mut self, temperature: f64, max_tokens: u32) -> Result<Self, BackendError> {
        self.temperature = temperature;
        self.max_tokens = max_tokens;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let mut problems = Vec::new();
        match self.messages.first() {
            None => problems.push("request has no messages".to_string()),
            Some(m) if m.role == Role::Assistant => problems.push("first message must be system or user".to_string()),
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            problems.push(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_tokens == 0 {
            problems.push("max_tokens must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(BackendError::InvalidRequest(problems.join("; ")))
        }
    }

    /// Content address of everything that influences the reply.
    pub fn cache_key(&self) -> String {
        let canonical = serde_json::json!({
            "model_id": self.model_id,
            "messages": self.messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        });
        sha256_hex(&serde_json::to_vec(&canonical).expect("request serializes"))
    }

    /// Hash of the message list alone, as used by script entries.
    pub fn prompt_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.messages).expect("messages serialize"))
    }

    pub fn last_user_message(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
    pub cached: bool,
    pub latency_ms: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

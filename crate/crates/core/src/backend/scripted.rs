use std::path::Path;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::request::{ChatRequest, ChatResponse, Role, Usage};
use super::{BackendError, ChatBackend};

pub const WILDCARD: &str = "*";

/// One canned reply. `tag` and `prompt` accept `*`; `prompt` otherwise holds a
/// [`ChatRequest::prompt_hash`]. `contains` narrows a match to requests whose
/// non-system messages include the given substring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub tag: String,
    #[serde(default = "wildcard")]
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub response: String,
}

fn wildcard() -> String {
    WILDCARD.to_string()
}

impl ScriptEntry {
    pub fn new(tag: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            prompt: wildcard(),
            contains: None,
            response: response.into(),
        }
    }

    pub fn containing(mut self, needle: impl Into<String>) -> Self {
        self.contains = Some(needle.into());
        self
    }

    pub fn for_prompt(mut self, hash: impl Into<String>) -> Self {
        self.prompt = hash.into();
        self
    }

    /// Higher wins: exact prompt hash, then substring, then bare wildcard.
    fn specificity(&self) -> u8 {
        (self.prompt != WILDCARD) as u8 * 2 + self.contains.is_some() as u8
    }

    fn matches(&self, request: &ChatRequest, prompt_hash: &str) -> bool {
        (self.tag == WILDCARD || self.tag == request.tag)
            && (self.prompt == WILDCARD || self.prompt == prompt_hash)
            && self.contains.as_deref().is_none_or(|needle| {
                request
                    .messages
                    .iter()
                    .any(|m| m.role != Role::System && m.content.contains(needle))
            })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedBackend {
    #[serde(default, rename = "entry")]
    pub script: Vec<ScriptEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
}

impl ScriptedBackend {
    pub fn new(script: Vec<ScriptEntry>) -> Self {
        Self { script, default: None }
    }

    pub fn with_default(mut self, text: impl Into<String>) -> Self {
        self.default = Some(text.into());
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, BackendError> {
        toml::from_str(text).map_err(|e| BackendError::Config(format!("script: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("cannot read script {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("script serializes")
    }

    pub fn lookup(&self, request: &ChatRequest) -> Result<&str, BackendError> {
        let hash = request.prompt_hash();
        let mut best: Option<&ScriptEntry> = None;
        for entry in self.script.iter().filter(|e| e.matches(request, &hash)) {
            if best.is_none_or(|b| entry.specificity() > b.specificity()) {
                best = Some(entry);
            }
        }
        best.map(|e| e.response.as_str())
            .or(self.default.as_deref())
            .ok_or_else(|| BackendError::ScriptMiss {
                tag: request.tag.clone(),
            })
    }
}

fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let text = self.lookup(request)?.to_string();
        let usage = Usage {
            prompt_tokens: request.messages.iter().map(|m| word_count(&m.content)).sum(),
            completion_tokens: word_count(&text),
        };
        Ok(ChatResponse {
            text,
            usage,
            cached: false,
            latency_ms: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::request::Message;

    fn request(tag: &str, user: &str) -> ChatRequest {
        ChatRequest::new("m", vec![Message::system("s"), Message::user(user)], tag).unwrap()
    }

    #[tokio::test]
    async fn returns_scripted_text_verbatim() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::new("risk_modeler", "{\"risk_score\": 0.4}")]);
        let reply = backend.complete(&request("risk_modeler", "x")).await.unwrap();
        assert_eq!(reply.text, "{\"risk_score\": 0.4}");
        assert!(!reply.cached);
    }

    #[tokio::test]
    async fn miss_names_the_tag() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::new("risk_modeler", "x")]);
        let err = backend.complete(&request("debt_analyst", "x")).await.unwrap_err();
        assert!(err.to_string().contains("debt_analyst"), "{err}");
    }

    #[tokio::test]
    async fn default_covers_misses() {
        let backend = ScriptedBackend::default().with_default("fallback");
        assert_eq!(backend.complete(&request("any", "x")).await.unwrap().text, "fallback");
    }

    #[test]
    fn most_specific_entry_wins_regardless_of_order() {
        let req = request("t", "needle here");
        let backend = ScriptedBackend::new(vec![
            ScriptEntry::new("t", "wild"),
            ScriptEntry::new("t", "sub").containing("needle"),
            ScriptEntry::new("t", "exact").for_prompt(req.prompt_hash()),
        ]);
        assert_eq!(backend.lookup(&req).unwrap(), "exact");
        assert_eq!(backend.lookup(&request("t", "needle")).unwrap(), "sub");
        assert_eq!(backend.lookup(&request("t", "hay")).unwrap(), "wild");
    }

    #[test]
    fn first_entry_wins_among_equals() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::new("*", "first"), ScriptEntry::new("t", "second")]);
        assert_eq!(backend.lookup(&request("t", "x")).unwrap(), "first");
    }

    #[test]
    fn script_round_trips_through_toml() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::new("t", "a\nb").containing("\"value\": \"A14\"")])
            .with_default("d");
        assert_eq!(ScriptedBackend::from_toml(&backend.to_toml()).unwrap(), backend);
    }
}

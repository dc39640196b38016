#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use masca::backend::{BackendError, ChatBackend, ChatRequest, ChatResponse, ScriptedBackend};
use masca::dataset::{load_dataset, ApplicantRecord, AttributeSchema, DatasetFormat};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn fixture_records() -> Vec<ApplicantRecord> {
    load_dataset(
        &fixture("german10.data"),
        &AttributeSchema::german_credit(),
        DatasetFormat::Statlog,
    )
    .unwrap()
}

pub fn golden_script() -> ScriptedBackend {
    ScriptedBackend::load(&fixture("golden_script.toml")).unwrap()
}

/// Compares with the committed file; `MASCA_BLESS=1` rewrites it instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden(name);
    if std::env::var_os("MASCA_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let line = expected
        .lines()
        .zip(actual.lines())
        .position(|(a, b)| a != b)
        .map_or(expected.lines().count().min(actual.lines().count()) + 1, |i| i + 1);
    Err(format!("{name} differs from golden at line {line}"))
}

#[derive(Debug, Clone)]
pub struct CallEvent {
    pub tag: String,
    pub start: usize,
    pub end: usize,
    pub user: String,
    pub system: String,
}

/// Wraps a backend, yields mid-call so same-stage calls interleave, and
/// logs the logical start and end of every call.
pub struct RecordingBackend<B> {
    pub inner: B,
    clock: AtomicUsize,
    log: Mutex<Vec<CallEvent>>,
}

impl<B> RecordingBackend<B> {
    pub fn new(inner: B) -> Arc<Self> {
        Arc::new(Self {
            inner,
            clock: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        })
    }

    pub fn events(&self) -> Vec<CallEvent> {
        self.log.lock().unwrap().clone()
    }
}

#[async_trait]
impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let start = self.clock.fetch_add(1, Ordering::SeqCst);
        for _ in 0..3 {
            tokio::task::yield_now().await;
        }
        let result = self.inner.complete(request).await;
        let end = self.clock.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(CallEvent {
            tag: request.tag.clone(),
            start,
            end,
            user: request.messages.get(1).map(|m| m.content.clone()).unwrap_or_default(),
            system: request.messages[0].content.clone(),
        });
        result
    }
}

pub mod mock {
    //! Minimal OpenAI-compatible chat-completions server for tests.

    use std::collections::VecDeque;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::{Arc, Mutex};
    use std::time::Duration;

    use axum::extract::State;
    use axum::http::{HeaderMap, StatusCode};
    use axum::routing::post;
    use axum::{Json, Router};
    use masca::agents::{AgentCatalog, AgentRole, BASELINE_PROMPT, DEFAULT_MODEL, MULTITASK_HEADER};
    use masca::backend::{ChatRequest, Message, ScriptedBackend};
    use masca::orchestrator::COT_INSTRUCTION;
    use serde_json::{json, Value};

    pub const ROUTE: &str = "/v1/chat/completions";

    #[derive(Clone)]
    pub enum Reply {
        /// Fixed status and body.
        Fixed(u16, String),
        /// Answers from a script, recovering the tag from the system prompt.
        Script(Arc<ScriptedBackend>),
    }

    #[derive(Default)]
    pub struct Recorded {
        pub bodies: Vec<Value>,
        pub auth: Vec<Option<String>>,
    }

    pub struct MockState {
        queue: Mutex<VecDeque<Reply>>,
        fallback: Reply,
        delay: Duration,
        pub recorded: Mutex<Recorded>,
        in_flight: AtomicUsize,
        pub max_in_flight: AtomicUsize,
    }

    pub struct MockServer {
        pub url: String,
        pub state: Arc<MockState>,
    }

    impl MockServer {
        pub fn requests(&self) -> usize {
            self.state.recorded.lock().unwrap().bodies.len()
        }
    }

    pub fn completion(text: &str) -> String {
        json!({
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 10, "completion_tokens": 2}
        })
        .to_string()
    }

    fn tag_for(system: &str, user: &str) -> String {
        let catalog = AgentCatalog::builtin(DEFAULT_MODEL);
        if let Some(role) = AgentRole::ALL
            .into_iter()
            .find(|r| catalog.get(*r).system_prompt == system)
        {
            return role.as_str().to_string();
        }
        if system == BASELINE_PROMPT {
            return if user.starts_with(COT_INSTRUCTION) {
                "cot"
            } else {
                "zero_shot"
            }
            .to_string();
        }
        if system.starts_with(MULTITASK_HEADER.trim_end()) {
            return "single_agent_multitask".to_string();
        }
        "unknown".to_string()
    }

    async fn handler(
        State(state): State<Arc<MockState>>,
        headers: HeaderMap,
        Json(body): Json<Value>,
    ) -> (StatusCode, String) {
        let now = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        state.max_in_flight.fetch_max(now, Ordering::SeqCst);
        {
            let mut rec = state.recorded.lock().unwrap();
            rec.bodies.push(body.clone());
            rec.auth.push(
                headers
                    .get("authorization")
                    .and_then(|v| v.to_str().ok())
                    .map(str::to_string),
            );
        }
        if !state.delay.is_zero() {
            tokio::time::sleep(state.delay).await;
        }
        let reply = state
            .queue
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| state.fallback.clone());
        let out = match reply {
            Reply::Fixed(status, text) => (StatusCode::from_u16(status).unwrap(), text),
            Reply::Script(script) => {
                let messages: Vec<Message> = serde_json::from_value(body["messages"].clone()).unwrap();
                let system = messages[0].content.clone();
                let user = messages.get(1).map(|m| m.content.clone()).unwrap_or_default();
                let request =
                    ChatRequest::new(body["model"].as_str().unwrap(), messages, tag_for(&system, &user)).unwrap();
                match script.lookup(&request) {
                    Ok(text) => (StatusCode::OK, completion(text)),
                    Err(e) => (StatusCode::BAD_REQUEST, e.to_string()),
                }
            }
        };
        state.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }

    pub async fn spawn(queue: Vec<Reply>, fallback: Reply, delay: Duration) -> MockServer {
        let state = Arc::new(MockState {
            queue: Mutex::new(queue.into()),
            fallback,
            delay,
            recorded: Mutex::new(Recorded::default()),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
        });
        let app = Router::new().route(ROUTE, post(handler)).with_state(state.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        MockServer {
            url: format!("http://{addr}{ROUTE}"),
            state,
        }
    }
}

pub mod gen {
    //! Seeded generators for fuzzed inputs.

    use masca::dataset::{ApplicantRecord, AttributeSchema, AttributeValue, CreditLabel};
    use rand::seq::IndexedRandom;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    /// Plausible integer ranges for the numerical columns; anything else gets 1..=10.
    fn numeric_range(id: &str) -> (u32, u32) {
        match id {
            "X2" => (4, 72),
            "X5" => (250, 18424),
            "X8" | "X11" | "X16" => (1, 4),
            "X13" => (19, 75),
            "X18" => (1, 2),
            _ => (1, 10),
        }
    }

    /// A schema-valid record with every attribute drawn uniformly.
    pub fn record(rng: &mut ChaCha8Rng, schema: &AttributeSchema, id: &str) -> ApplicantRecord {
        let mut r = ApplicantRecord::new(id);
        for attr in schema.iter() {
            let value = if attr.is_categorical() {
                let codes: Vec<&String> = attr.codebook.keys().collect();
                AttributeValue::Code(codes.choose(rng).unwrap().to_string())
            } else {
                let (lo, hi) = numeric_range(&attr.id);
                AttributeValue::Number(rng.random_range(lo..=hi) as f64)
            };
            r.values.insert(attr.id.clone(), value);
        }
        r.label = Some(if rng.random_bool(0.7) {
            CreditLabel::Good
        } else {
            CreditLabel::Bad
        });
        r
    }

    pub fn records(rng: &mut ChaCha8Rng, schema: &AttributeSchema, n: usize) -> Vec<ApplicantRecord> {
        (0..n).map(|i| record(rng, schema, &format!("f{i:04}"))).collect()
    }
}

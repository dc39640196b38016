use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::request::{ChatRequest, ChatResponse, Usage};
use super::{BackendError, ChatBackend};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    request: ChatRequest,
    text: String,
    usage: Usage,
}

/// One JSON file per request, named by the request's content hash.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| BackendError::Cache(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, request: &ChatRequest) -> Result<Option<ChatResponse>, BackendError> {
        let key = request.cache_key();
        let path = self.path_for(&key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(BackendError::Cache(format!("{}: {e}", path.display()))),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes)
            .map_err(|e| BackendError::Cache(format!("corrupt entry {}: {e}", path.display())))?;
        if entry.key != key {
            return Err(BackendError::Cache(format!("key mismatch in {}", path.display())));
        }
        Ok(Some(ChatResponse {
            text: entry.text,
            usage: entry.usage,
            cached: true,
            latency_ms: 0.0,
        }))
    }

    pub fn put(&self, request: &ChatRequest, response: &ChatResponse) -> Result<(), BackendError> {
        let key = request.cache_key();
        let entry = CacheEntry {
            key: key.clone(),
            request: request.clone(),
            text: response.text.clone(),
            usage: response.usage,
        };
        let path = self.path_for(&key);
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        let bytes = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
        std::fs::write(&tmp, bytes)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| BackendError::Cache(format!("{}: {e}", path.display())))
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|it| {
                it.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Serves repeated requests from a [`ResponseCache`] before reaching `inner`.
pub struct CachedBackend {
    inner: Arc<dyn ChatBackend>,
    cache: ResponseCache,
}

impl CachedBackend {
    pub fn new(inner: Arc<dyn ChatBackend>, cache: ResponseCache) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

#[async_trait]
impl ChatBackend for CachedBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        if let Some(hit) = self.cache.get(request)? {
            return Ok(hit);
        }
        let response = self.inner.complete(request).await?;
        self.cache.put(request, &response)?;
        Ok(response)
    }
}

//! Run directories: `meta.json`, `transcripts.jsonl`, `failures.jsonl` and a
//! response cache, with resume by record id.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::StreamExt;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{sha256_hex, CachedBackend, ChatBackend, ResponseCache};
use crate::dataset::ApplicantRecord;
use crate::orchestrator::{run_pipeline, DecisionPolicy, Engine, OrchestratorError, Topology, Transcript};

pub const META_FILE: &str = "meta.json";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const CACHE_DIR: &str = "cache";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("run directory {path} belongs to a different run: {message}")]
    Mismatch { path: PathBuf, message: String },
    #[error("{0}")]
    Setup(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Written before any record is processed. Holds no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub engine_version: String,
    pub configuration: String,
    pub topology: Topology,
    pub dataset_sha256: String,
    pub record_count: usize,
    pub prompt_checksums: std::collections::BTreeMap<String, String>,
    pub seed: String,
    pub policy: DecisionPolicy,
    /// The effective configuration as given by the caller.
    pub config: Value,
}

impl RunMeta {
    pub fn new(
        engine: &Engine,
        topology: &Topology,
        dataset_sha256: &str,
        record_count: usize,
        seed: &str,
        config: Value,
    ) -> Self {
        Self {
            engine_version: ENGINE_VERSION.to_string(),
            configuration: topology.label(&engine.catalog, &engine.default_model),
            topology: topology.clone(),
            dataset_sha256: dataset_sha256.to_string(),
            record_count,
            prompt_checksums: engine.catalog.prompt_checksums(),
            seed: seed.to_string(),
            policy: engine.policy.clone(),
            config,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub record_id: String,
    pub error: String,
    /// Agent outputs completed before the failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<Transcript>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub completed: usize,
    pub skipped: usize,
    pub failed: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Opens an existing run directory.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, RunError> {
        let path = path.into();
        if !path.is_dir() {
            return Err(RunError::Io {
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "run directory not found"),
                path,
            });
        }
        Ok(Self { path })
    }

    /// Creates the directory, or checks that an existing one holds the same run.
    pub fn prepare(path: impl Into<PathBuf>, meta: &RunMeta) -> Result<Self, RunError> {
        let path = path.into();
        fs::create_dir_all(&path).map_err(io_err(&path))?;
        let dir = Self { path };
        if dir.meta_path().exists() {
            let existing = dir.read_meta()?;
            let mut problems = Vec::new();
            if existing.configuration != meta.configuration {
                problems.push(format!(
                    "configuration `{}` vs `{}`",
                    existing.configuration, meta.configuration
                ));
            }
            if existing.dataset_sha256 != meta.dataset_sha256 {
                problems.push("dataset differs".to_string());
            }
            if existing.prompt_checksums != meta.prompt_checksums {
                problems.push("prompts differ".to_string());
            }
            if !problems.is_empty() {
                return Err(RunError::Mismatch {
                    path: dir.path.clone(),
                    message: problems.join(", "),
                });
            }
        }
        write_atomic(
            &dir.meta_path(),
            &serde_json::to_vec_pretty(meta).expect("meta serializes"),
        )?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn id(&self) -> String {
        self.path
            .file_name()
            .map_or_else(|| self.path.display().to_string(), |n| n.to_string_lossy().into_owned())
    }

    pub fn meta_path(&self) -> PathBuf {
        self.path.join(META_FILE)
    }

    pub fn transcripts_path(&self) -> PathBuf {
        self.path.join(TRANSCRIPTS_FILE)
    }

    pub fn failures_path(&self) -> PathBuf {
        self.path.join(FAILURES_FILE)
    }

    pub fn cache(&self) -> Result<ResponseCache, RunError> {
        ResponseCache::open(self.path.join(CACHE_DIR)).map_err(|e| RunError::Setup(e.to_string()))
    }

    pub fn read_meta(&self) -> Result<RunMeta, RunError> {
        let path = self.meta_path();
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| RunError::Corrupt {
            path,
            message: e.to_string(),
        })
    }

    /// Parsed transcripts plus one note per unreadable line.
    pub fn read_transcripts(&self) -> Result<(Vec<Transcript>, Vec<String>), RunError> {
        let path = self.transcripts_path();
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut transcripts = Vec::new();
        let mut notes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Transcript>(line) {
                Ok(t) => transcripts.push(t),
                Err(e) => notes.push(format!("{TRANSCRIPTS_FILE} line {}: skipped ({e})", i + 1)),
            }
        }
        Ok((transcripts, notes))
    }

    pub fn completed_ids(&self) -> Result<BTreeSet<String>, RunError> {
        if !self.transcripts_path().exists() {
            return Ok(BTreeSet::new());
        }
        Ok(self.read_transcripts()?.0.into_iter().map(|t| t.record_id).collect())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Runs every record not yet in `transcripts.jsonl`, `workers` at a time,
/// appending results in dataset order. Failed records go to `failures.jsonl`
/// and are retried on the next invocation.
pub async fn execute_run(
    dir: &RunDir,
    records: &[ApplicantRecord],
    topology: &Topology,
    backend: Arc<dyn ChatBackend>,
    engine: &Engine,
    workers: usize,
) -> Result<RunSummary, RunError> {
    let done = dir.completed_ids()?;
    let backend: Arc<dyn ChatBackend> = Arc::new(CachedBackend::new(backend, dir.cache()?));
    let pending: Vec<&ApplicantRecord> = records.iter().filter(|r| !done.contains(&r.id)).collect();
    let mut summary = RunSummary {
        skipped: records.len() - pending.len(),
        ..RunSummary::default()
    };
    let transcripts_path = dir.transcripts_path();
    let mut out = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&transcripts_path)
        .map_err(io_err(&transcripts_path))?;
    let failures_path = dir.failures_path();
    let mut failures = File::create(&failures_path).map_err(io_err(&failures_path))?;

    let mut results = futures::stream::iter(pending)
        .map(|record| {
            let backend = backend.clone();
            async move { (record, run_pipeline(record, topology, &*backend, engine).await) }
        })
        .buffered(workers.max(1));
    while let Some((record, result)) = results.next().await {
        match result {
            Ok(transcript) => {
                let line = format!("{}\n", transcript.to_json_line());
                out.write_all(line.as_bytes()).map_err(io_err(&transcripts_path))?;
                summary.completed += 1;
            }
            Err(e) => {
                tracing::warn!(record = %record.id, error = %e, "record failed");
                let partial = match &e {
                    OrchestratorError::Agent { partial, .. } => Some((**partial).clone()),
                    _ => None,
                };
                let failure = Failure {
                    record_id: record.id.clone(),
                    error: e.to_string(),
                    partial,
                };
                let line = format!("{}\n", serde_json::to_string(&failure).expect("failure serializes"));
                failures.write_all(line.as_bytes()).map_err(io_err(&failures_path))?;
                summary.failed.push(record.id.clone());
            }
        }
    }
    out.flush().map_err(io_err(&transcripts_path))?;
    drop(out);
    if summary.skipped > 0 && summary.completed > 0 {
        restore_dataset_order(dir, records)?;
    }
    Ok(summary)
}

/// Resumed runs append out of order; this rewrites the file in dataset order.
fn restore_dataset_order(dir: &RunDir, records: &[ApplicantRecord]) -> Result<(), RunError> {
    let path = dir.transcripts_path();
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let position: HashMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let mut lines: Vec<(usize, &str)> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let rank = serde_json::from_str::<Transcript>(l)
                .ok()
                .and_then(|t| position.get(t.record_id.as_str()).copied())
                .unwrap_or(usize::MAX);
            (rank, l)
        })
        .collect();
    lines.sort_by_key(|(rank, _)| *rank);
    let mut joined = String::with_capacity(text.len());
    for (_, line) in lines {
        joined.push_str(line);
        joined.push('\n');
    }
    write_atomic(&path, joined.as_bytes())
}

/// Picks `n` records reproducibly from the seed text, keeping dataset order.
pub fn sample_records(records: &[ApplicantRecord], n: usize, seed: &str) -> Vec<ApplicantRecord> {
    if n >= records.len() {
        return records.to_vec();
    }
    let digest = sha256_hex(seed.as_bytes());
    let seed_u64 = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
    let mut rng = ChaCha8Rng::seed_from_u64(seed_u64);
    let mut picked = index::sample(&mut rng, records.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| records[i].clone()).collect()
}

pub fn file_sha256(path: &Path) -> Result<String, RunError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}

//! Run configuration: one TOML file plus command-line overrides (overrides
//! win). Relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentCatalog, DEFAULT_MODEL};
use crate::backend::{ChatBackend, LiveBackend, LiveConfig, ScriptedBackend, DEFAULT_MAX_TOKENS};
use crate::dataset::{load_dataset, ApplicantRecord, AttributeSchema, DatasetFormat};
use crate::features::{BucketTable, IncomeEstimator};
use crate::orchestrator::{perturb_scenario, DecisionPolicy, Engine, Scenario, Topology, TopologyKind};
use crate::runner::sample_records;

pub const DEFAULT_SEED: &str = "masca";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Build(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: DatasetFormat,
    /// Alternative attribute schema; the bundled codebook otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    /// Run on a seeded sample of this many records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Scripted { script: PathBuf },
    Live(LiveConfig),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasConfig {
    /// Gender swap and redaction table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<PathBuf>,
    /// Ethnicity group list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<PathBuf>,
}

fn default_model() -> String {
    DEFAULT_MODEL.to_string()
}
fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}
fn default_workers() -> usize {
    4
}
fn default_seed() -> String {
    DEFAULT_SEED.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Agent catalog overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buckets: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub income: Option<IncomeEstimator>,
    pub backend: BackendConfig,
    #[serde(default)]
    pub policy: DecisionPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    /// Records processed concurrently.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: String,
    #[serde(default)]
    pub bias: BiasConfig,
}

/// Command-line values that replace file values when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub format: Option<DatasetFormat>,
    pub sample: Option<usize>,
    pub topology: Option<TopologyKind>,
    pub model: Option<String>,
    pub orchestrator_model: Option<String>,
    pub script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub scenario: Option<PathBuf>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub seed: Option<String>,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>, backend: BackendConfig) -> Self {
        Self {
            dataset: DatasetConfig {
                path: dataset.into(),
                format: DatasetFormat::default(),
                schema: None,
                sample: None,
            },
            topology: Topology::default(),
            model: default_model(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            agents: None,
            buckets: None,
            income: None,
            backend,
            policy: DecisionPolicy::default(),
            scenario: None,
            workers: default_workers(),
            output: None,
            seed: default_seed(),
            bias: BiasConfig::default(),
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: base_dir.to_path_buf(),
            message: e.to_string(),
        })?;
        config.resolve_paths(base_dir);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.path);
        for p in [
            self.dataset.schema.as_mut(),
            self.agents.as_mut(),
            self.buckets.as_mut(),
            self.scenario.as_mut(),
            self.output.as_mut(),
            self.bias.mapping.as_mut(),
            self.bias.groups.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let BackendConfig::Scripted { script } = &mut self.backend {
            fix(script);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.dataset {
            self.dataset.path = v.clone();
        }
        if let Some(v) = o.format {
            self.dataset.format = v;
        }
        if let Some(v) = o.sample {
            self.dataset.sample = Some(v);
        }
        if let Some(v) = o.topology {
            self.topology.kind = v;
        }
        if let Some(v) = &o.model {
            self.model = v.clone();
        }
        if let Some(v) = &o.orchestrator_model {
            self.topology
                .model_map
                .insert("decision_orchestrator".into(), v.clone());
        }
        if let Some(v) = &o.script {
            self.backend = BackendConfig::Scripted { script: v.clone() };
        }
        if let Some(v) = &o.endpoint {
            match &mut self.backend {
                BackendConfig::Live(live) => live.endpoint = v.clone(),
                BackendConfig::Scripted { .. } => {
                    self.backend = BackendConfig::Live(LiveConfig {
                        endpoint: v.clone(),
                        ..LiveConfig::default()
                    })
                }
            }
        }
        if let Some(v) = &o.scenario {
            self.scenario = Some(v.clone());
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = &o.output {
            self.output = Some(v.clone());
        }
        if let Some(v) = &o.seed {
            self.seed = v.clone();
        }
    }

    /// Lists every problem rather than stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let mut must_exist = |what: &str, p: &Path| {
            if !p.exists() {
                problems.push(format!("{what} {} does not exist", p.display()));
            }
        };
        must_exist("dataset", &self.dataset.path);
        let optional = [
            ("schema", &self.dataset.schema),
            ("agent catalog", &self.agents),
            ("bucket table", &self.buckets),
            ("scenario", &self.scenario),
            ("gender mapping", &self.bias.mapping),
            ("ethnicity groups", &self.bias.groups),
        ];
        for (what, path) in optional {
            if let Some(p) = path {
                must_exist(what, p);
            }
        }
        match &self.backend {
            BackendConfig::Scripted { script } => must_exist("script", script),
            BackendConfig::Live(live) => {
                if live.endpoint.trim().is_empty() {
                    problems.push("live endpoint is empty".into());
                }
                if live.max_in_flight == 0 {
                    problems.push("max_in_flight must be at least 1".into());
                }
                if live.attempts == 0 {
                    problems.push("attempts must be at least 1".into());
                }
                if live.timeout_secs.is_nan() || live.timeout_secs <= 0.0 {
                    problems.push("timeout_secs must be positive".into());
                }
            }
        }
        if self.dataset.sample == Some(0) {
            problems.push("sample must be at least 1".into());
        }
        if self.model.trim().is_empty() {
            problems.push("model is empty".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            problems.push(format!("temperature {} outside [0,2]", self.temperature));
        }
        if self.max_tokens == 0 {
            problems.push("max_tokens must be positive".into());
        }
        if self.workers == 0 {
            problems.push("workers must be at least 1".into());
        }
        if let Err(e) = self.topology.validate() {
            problems.push(e.to_string());
        }
        problems.extend(self.policy.validate());
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn schema(&self) -> Result<AttributeSchema, ConfigError> {
        match &self.dataset.schema {
            Some(p) => AttributeSchema::load(p).map_err(|e| ConfigError::Build(e.to_string())),
            None => Ok(AttributeSchema::german_credit()),
        }
    }

    pub fn engine(&self) -> Result<Engine, ConfigError> {
        let schema = self.schema()?;
        let buckets = match &self.buckets {
            Some(p) => BucketTable::load(p).map_err(|e| ConfigError::Build(e.to_string()))?,
            None => BucketTable::default(),
        };
        let unknown = buckets.unknown_codes(&schema);
        if !unknown.is_empty() {
            return Err(ConfigError::Build(format!(
                "bucket table names codes outside the schema: {}",
                unknown.join(", ")
            )));
        }
        let mut catalog = match &self.agents {
            Some(p) => AgentCatalog::load(p, &self.model).map_err(|e| ConfigError::Build(e.to_string()))?,
            None => AgentCatalog::builtin(&self.model),
        };
        catalog.set_sampling(self.temperature, self.max_tokens);
        Ok(Engine {
            schema,
            buckets,
            income_estimator: self.income.clone(),
            catalog,
            policy: self.policy.clone(),
            default_model: self.model.clone(),
        })
    }

    pub fn backend(&self) -> Result<Arc<dyn ChatBackend>, ConfigError> {
        match &self.backend {
            BackendConfig::Scripted { script } => Ok(Arc::new(
                ScriptedBackend::load(script).map_err(|e| ConfigError::Build(e.to_string()))?,
            )),
            BackendConfig::Live(live) => Ok(Arc::new(
                LiveBackend::new(live.clone()).map_err(|e| ConfigError::Build(e.to_string()))?,
            )),
        }
    }

    /// Loads, samples and (if configured) perturbs the records.
    pub fn records(&self, schema: &AttributeSchema) -> Result<Vec<ApplicantRecord>, ConfigError> {
        let mut records = load_dataset(&self.dataset.path, schema, self.dataset.format)
            .map_err(|e| ConfigError::Build(e.to_string()))?;
        if let Some(n) = self.dataset.sample {
            records = sample_records(&records, n, &self.seed);
        }
        if let Some(path) = &self.scenario {
            let scenario = Scenario::load(path).map_err(|e| ConfigError::Build(e.to_string()))?;
            records = records
                .iter()
                .map(|r| perturb_scenario(r, &scenario, schema))
                .collect::<Result<_, _>>()
                .map_err(|e| ConfigError::Build(e.to_string()))?;
        }
        Ok(records)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

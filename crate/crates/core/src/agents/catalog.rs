use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::roles::{AgentRole, Artifact};
use super::schema::SchemaDef;
use super::AgentError;
use crate::backend::{sha256_hex, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};

pub const DEFAULT_MODEL: &str = "gpt-4o";

pub const BASELINE_PROMPT: &str = include_str!("../../data/prompts/baseline.txt");
pub const MULTITASK_HEADER: &str = include_str!("../../data/prompts/multitask_header.txt");
pub const MULTITASK_FOOTER: &str = include_str!("../../data/prompts/multitask_footer.txt");

pub fn builtin_prompt(role: AgentRole) -> &'static str {
    match role {
        AgentRole::DataAnalyst => include_str!("../../data/prompts/data_analyst.txt"),
        AgentRole::Contextualizer => include_str!("../../data/prompts/contextualizer.txt"),
        AgentRole::FeatureEngineer => include_str!("../../data/prompts/feature_engineer.txt"),
        AgentRole::RiskModeler => include_str!("../../data/prompts/risk_modeler.txt"),
        AgentRole::IncomeStabilityAnalyst => {
            include_str!("../../data/prompts/income_stability_analyst.txt")
        }
        AgentRole::DebtAnalyst => include_str!("../../data/prompts/debt_analyst.txt"),
        AgentRole::RewardModeler => include_str!("../../data/prompts/reward_modeler.txt"),
        AgentRole::RiskRewardOptimizer => include_str!("../../data/prompts/risk_reward_optimizer.txt"),
        AgentRole::DecisionOrchestrator => include_str!("../../data/prompts/decision_orchestrator.txt"),
    }
}

/// Context each role reads in the full four-layer pipeline.
pub fn default_inputs(role: AgentRole) -> Vec<Artifact> {
    use Artifact::*;
    match role.layer() {
        1 if role == AgentRole::FeatureEngineer => vec![StructuredProfile, ComputedRatios],
        1 => vec![StructuredProfile],
        2 => vec![StructuredProfile, DataAnalysis, PersonaReport, DerivedFeatures],
        3 => vec![RiskAssessment, IncomeAssessment, DebtAssessment, RewardAssessment],
        _ => vec![
            RiskAssessment,
            IncomeAssessment,
            DebtAssessment,
            RewardAssessment,
            BeliefState,
            RiskRewardAnalysis,
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub role: AgentRole,
    pub layer: u8,
    pub system_prompt: String,
    pub input_selector: Vec<Artifact>,
    pub output_schema: SchemaDef,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl AgentSpec {
    pub fn builtin(role: AgentRole, model_id: impl Into<String>) -> Self {
        Self {
            role,
            layer: role.layer(),
            system_prompt: builtin_prompt(role).to_string(),
            input_selector: default_inputs(role),
            output_schema: SchemaDef::for_role(role),
            model_id: model_id.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let mut problems = Vec::new();
        if self.layer != self.role.layer() {
            problems.push(format!(
                "{} must sit in layer {}, not {}",
                self.role,
                self.role.layer(),
                self.layer
            ));
        }
        for artifact in &self.input_selector {
            if artifact.layer() >= self.layer && *artifact != Artifact::StructuredProfile {
                problems.push(format!(
                    "{} reads {artifact}, which is not produced by an earlier layer",
                    self.role
                ));
            }
        }
        if self.system_prompt.trim().is_empty() {
            problems.push(format!("{} has an empty prompt", self.role));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(AgentError::Catalog(problems.join("; ")))
        }
    }

    pub fn prompt_checksum(&self) -> String {
        sha256_hex(self.system_prompt.as_bytes())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CatalogFile {
    #[serde(default)]
    agents: BTreeMap<String, CatalogEntry>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CatalogEntry {
    /// Path to the prompt text, relative to the catalog file.
    prompt: Option<String>,
    model_id: Option<String>,
    inputs: Option<Vec<String>>,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentCatalog {
    specs: BTreeMap<AgentRole, AgentSpec>,
}

impl AgentCatalog {
    pub fn builtin(model_id: &str) -> Self {
        Self {
            specs: AgentRole::ALL
                .into_iter()
                .map(|r| (r, AgentSpec::builtin(r, model_id)))
                .collect(),
        }
    }

    /// Built-in catalog with overrides from a catalog file.
    pub fn load(path: &Path, model_id: &str) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AgentError::Catalog(format!("cannot read {}: {e}", path.display())))?;
        let file: CatalogFile =
            toml::from_str(&text).map_err(|e| AgentError::Catalog(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut catalog = Self::builtin(model_id);
        let mut problems = Vec::new();
        for (name, entry) in file.agents {
            let Some(role) = AgentRole::parse(&name) else {
                problems.push(format!("unknown role {name}"));
                continue;
            };
            let spec = catalog.specs.get_mut(&role).expect("builtin covers every role");
            if let Some(prompt) = entry.prompt {
                match std::fs::read_to_string(base.join(&prompt)) {
                    Ok(text) => spec.system_prompt = text,
                    Err(e) => problems.push(format!("{name}: cannot read prompt {prompt}: {e}")),
                }
            }
            if let Some(model) = entry.model_id {
                spec.model_id = model;
            }
            if let Some(inputs) = entry.inputs {
                let mut parsed = Vec::new();
                for input in inputs {
                    match Artifact::parse(&input) {
                        Some(a) => parsed.push(a),
                        None => problems.push(format!("{name}: unknown artifact {input}")),
                    }
                }
                spec.input_selector = parsed;
            }
            if let Some(t) = entry.temperature {
                spec.temperature = t;
            }
            if let Some(m) = entry.max_tokens {
                spec.max_tokens = m;
            }
        }
        for spec in catalog.specs.values() {
            if let Err(AgentError::Catalog(p)) = spec.validate() {
                problems.push(p);
            }
        }
        if problems.is_empty() {
            Ok(catalog)
        } else {
            Err(AgentError::Catalog(problems.join("; ")))
        }
    }

    pub fn get(&self, role: AgentRole) -> &AgentSpec {
        &self.specs[&role]
    }

    pub fn set_model(&mut self, role: AgentRole, model_id: &str) {
        if let Some(spec) = self.specs.get_mut(&role) {
            spec.model_id = model_id.to_string();
        }
    }

    pub fn set_sampling(&mut self, temperature: f64, max_tokens: u32) {
        for spec in self.specs.values_mut() {
            spec.temperature = temperature;
            spec.max_tokens = max_tokens;
        }
    }

    pub fn specs(&self) -> impl Iterator<Item = &AgentSpec> {
        self.specs.values()
    }

    pub fn prompt_checksums(&self) -> BTreeMap<String, String> {
        self.specs
            .values()
            .map(|s| (s.role.to_string(), s.prompt_checksum()))
            .collect()
    }
}

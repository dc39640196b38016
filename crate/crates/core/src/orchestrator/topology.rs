use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::agents::{AgentCatalog, AgentRole, AgentSpec, Artifact};

/// Model-map key for the single-call topologies.
pub const BASELINE_KEY: &str = "baseline";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Hierarchical3,
    TwoLevel,
    Flat,
    SingleAgentMultitask,
    ZeroShot,
    Cot,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 6] = [
        TopologyKind::ZeroShot,
        TopologyKind::Cot,
        TopologyKind::SingleAgentMultitask,
        TopologyKind::Flat,
        TopologyKind::TwoLevel,
        TopologyKind::Hierarchical3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::Hierarchical3 => "hierarchical3",
            TopologyKind::TwoLevel => "two_level",
            TopologyKind::Flat => "flat",
            TopologyKind::SingleAgentMultitask => "single_agent_multitask",
            TopologyKind::ZeroShot => "zero_shot",
            TopologyKind::Cot => "cot",
        }
    }

    /// Row label used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            TopologyKind::Hierarchical3 => "MultiAgent",
            TopologyKind::TwoLevel => "Two-level with multiple agents",
            TopologyKind::Flat => "Single-level with multiple agents",
            TopologyKind::SingleAgentMultitask => "Single Agent performing multitasks",
            TopologyKind::ZeroShot => "Zero Shot",
            TopologyKind::Cot => "Chain of Thought",
        }
    }

    pub fn is_single_call(self) -> bool {
        matches!(
            self,
            TopologyKind::SingleAgentMultitask | TopologyKind::ZeroShot | TopologyKind::Cot
        )
    }

    /// Backend calls per record when no retry is needed.
    pub fn agent_calls(self) -> usize {
        match self {
            TopologyKind::Hierarchical3 | TopologyKind::Flat => 9,
            TopologyKind::TwoLevel => 8,
            _ => 1,
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = OrchestratorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
            OrchestratorError::Topology(format!("unknown kind `{s}`; expected one of {}", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub kind: TopologyKind,
    /// Per-role model overrides; `baseline` applies to single-call kinds.
    #[serde(default)]
    pub model_map: BTreeMap<String, String>,
    /// Overrides the generated configuration label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Default for Topology {
    fn default() -> Self {
        Self::new(TopologyKind::Hierarchical3)
    }
}

impl Topology {
    pub fn new(kind: TopologyKind) -> Self {
        Self {
            kind,
            model_map: BTreeMap::new(),
            name: None,
        }
    }

    pub fn with_model(mut self, key: &str, model_id: &str) -> Self {
        self.model_map.insert(key.to_string(), model_id.to_string());
        self
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let mut problems = Vec::new();
        for (key, model) in &self.model_map {
            if key != BASELINE_KEY && AgentRole::parse(key).is_none() {
                problems.push(format!("model_map key `{key}` is neither a role nor `{BASELINE_KEY}`"));
            }
            if model.trim().is_empty() {
                problems.push(format!("model_map entry `{key}` is empty"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(OrchestratorError::Topology(problems.join("; ")))
        }
    }

    /// Roles in the order their outputs appear in a transcript.
    pub fn roles(&self) -> Vec<AgentRole> {
        match self.kind {
            TopologyKind::Hierarchical3 | TopologyKind::Flat => AgentRole::ALL.to_vec(),
            TopologyKind::TwoLevel => AgentRole::ALL
                .into_iter()
                .filter(|r| *r != AgentRole::RiskRewardOptimizer)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Agent specs grouped into barrier-separated stages, with the model map
    /// and the topology's context wiring applied.
    pub fn stages(&self, catalog: &AgentCatalog) -> Vec<Vec<AgentSpec>> {
        let spec = |role: AgentRole| {
            let mut s = catalog.get(role).clone();
            if let Some(model) = self.model_map.get(role.as_str()) {
                s.model_id = model.clone();
            }
            match self.kind {
                TopologyKind::Flat => s.input_selector = vec![Artifact::StructuredProfile],
                TopologyKind::TwoLevel if role == AgentRole::DecisionOrchestrator => {
                    s.input_selector.retain(|a| *a != Artifact::RiskRewardAnalysis)
                }
                _ => {}
            }
            s
        };
        match self.kind {
            TopologyKind::Flat => vec![AgentRole::ALL.into_iter().map(spec).collect()],
            TopologyKind::Hierarchical3 | TopologyKind::TwoLevel => {
                let roles = self.roles();
                let mut stages: Vec<Vec<AgentSpec>> = Vec::new();
                for role in roles {
                    match stages.last_mut() {
                        Some(stage) if stage[0].layer == role.layer() => stage.push(spec(role)),
                        _ => stages.push(vec![spec(role)]),
                    }
                }
                stages
            }
            _ => Vec::new(),
        }
    }

    pub fn baseline_model<'a>(&'a self, default_model: &'a str) -> &'a str {
        self.model_map.get(BASELINE_KEY).map_or(default_model, String::as_str)
    }

    /// Distinct models in role order, e.g. `gpt-4o & o3-mini`.
    pub fn models(&self, catalog: &AgentCatalog, default_model: &str) -> Vec<String> {
        let mut models: Vec<String> = Vec::new();
        let mut push = |m: &str| {
            if !models.iter().any(|x| x == m) {
                models.push(m.to_string());
            }
        };
        if self.kind.is_single_call() {
            push(self.baseline_model(default_model));
        } else {
            for stage in self.stages(catalog) {
                for spec in stage {
                    push(&spec.model_id);
                }
            }
        }
        models
    }

    pub fn label(&self, catalog: &AgentCatalog, default_model: &str) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        format!(
            "{} ({})",
            self.kind.display_name(),
            self.models(catalog, default_model).join(" & ")
        )
    }
}

use serde::{Deserialize, Serialize};

use super::aggregate::RiskReward;
use super::belief::BeliefState;
use super::topology::TopologyKind;
use crate::agents::AgentOutput;
use crate::backend::Usage;
use crate::dataset::CreditLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    /// Parsed from the decision orchestrator's payload.
    Agent,
    /// Rule-based fallback after the orchestrator's reply was unusable.
    Deterministic,
    /// Parsed from a single-call baseline reply.
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioSource {
    Agent,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRewardRecord {
    pub ratio: f64,
    pub source: RatioSource,
    /// The rule-based aggregate, kept alongside an agent ratio as an oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deterministic: Option<RiskReward>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCall {
    pub tag: String,
    pub model_id: String,
    pub raw_text: String,
    pub usage: Usage,
    pub latency_ms: f64,
}

/// Everything one record's run produced. Contains no wall-clock data, so
/// scripted and cached runs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub record_id: String,
    #[serde(default)]
    pub label: Option<CreditLabel>,
    pub configuration: String,
    pub topology: TopologyKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<BeliefState>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub belief_trajectory: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_reward: Option<RiskRewardRecord>,
    pub decision: Option<CreditLabel>,
    pub decision_source: Option<DecisionSource>,
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub usage: Usage,
    pub latency_ms: f64,
}

impl Transcript {
    pub fn new(record_id: &str, label: Option<CreditLabel>, configuration: &str, topology: TopologyKind) -> Self {
        Self {
            record_id: record_id.to_string(),
            label,
            configuration: configuration.to_string(),
            topology,
            agents: Vec::new(),
            baseline: None,
            belief: None,
            belief_trajectory: Vec::new(),
            risk_reward: None,
            decision: None,
            decision_source: None,
            confidence: None,
            notes: Vec::new(),
            usage: Usage::default(),
            latency_ms: 0.0,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub(crate) fn tally(&mut self) {
        let mut usage = Usage::default();
        let mut latency = 0.0;
        for a in &self.agents {
            usage += a.usage;
            latency += a.latency_ms;
        }
        if let Some(b) = &self.baseline {
            usage += b.usage;
            latency += b.latency_ms;
        }
        self.usage = usage;
        self.latency_ms = latency;
    }
}

//! Runs one applicant record through a topology: layer barriers, context
//! propagation, the belief fold, risk-reward aggregation and the decision.

mod aggregate;
mod belief;
mod pipeline;
mod scenario;
mod topology;
mod transcript;

pub use aggregate::{aggregate_risk_reward, decide_deterministic, RiskReward, RiskWeights, Thresholds, REWARD_FLOOR};
pub use belief::{
    clamp_signal, default_signal, logit, sigmoid, update_belief, BeliefState, Observation, DEFAULT_PRIOR, SIGNAL_CLAMP,
};
pub use pipeline::{
    belief_report, multitask_prompt, parse_final_decision, run_pipeline, DecisionPolicy, Engine, COT_INSTRUCTION,
};
pub use scenario::{perturb_scenario, Scenario};
pub use topology::{Topology, TopologyKind, BASELINE_KEY};
pub use transcript::{BaselineCall, DecisionSource, RatioSource, RiskRewardRecord, Transcript};

use crate::agents::{AgentError, AgentRole};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("belief update: {0}")]
    InvalidBelief(String),
    #[error("no valid {0}-side scores")]
    NoScores(&'static str),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("topology: {0}")]
    Topology(String),
    #[error("record: {0}")]
    Record(String),
    #[error("record {record_id}: {role} failed: {source}")]
    Agent {
        record_id: String,
        role: AgentRole,
        source: AgentError,
        /// Everything completed before the failure.
        partial: Box<Transcript>,
    },
    #[error(transparent)]
    Context(#[from] AgentError),
}

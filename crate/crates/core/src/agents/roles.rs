use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    DataAnalyst,
    Contextualizer,
    FeatureEngineer,
    RiskModeler,
    IncomeStabilityAnalyst,
    DebtAnalyst,
    RewardModeler,
    RiskRewardOptimizer,
    DecisionOrchestrator,
}

impl AgentRole {
    pub const ALL: [AgentRole; 9] = [
        AgentRole::DataAnalyst,
        AgentRole::Contextualizer,
        AgentRole::FeatureEngineer,
        AgentRole::RiskModeler,
        AgentRole::IncomeStabilityAnalyst,
        AgentRole::DebtAnalyst,
        AgentRole::RewardModeler,
        AgentRole::RiskRewardOptimizer,
        AgentRole::DecisionOrchestrator,
    ];

    pub fn layer(self) -> u8 {
        match self {
            AgentRole::DataAnalyst | AgentRole::Contextualizer | AgentRole::FeatureEngineer => 1,
            AgentRole::RiskModeler
            | AgentRole::IncomeStabilityAnalyst
            | AgentRole::DebtAnalyst
            | AgentRole::RewardModeler => 2,
            AgentRole::RiskRewardOptimizer => 3,
            AgentRole::DecisionOrchestrator => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::DataAnalyst => "data_analyst",
            AgentRole::Contextualizer => "contextualizer",
            AgentRole::FeatureEngineer => "feature_engineer",
            AgentRole::RiskModeler => "risk_modeler",
            AgentRole::IncomeStabilityAnalyst => "income_stability_analyst",
            AgentRole::DebtAnalyst => "debt_analyst",
            AgentRole::RewardModeler => "reward_modeler",
            AgentRole::RiskRewardOptimizer => "risk_reward_optimizer",
            AgentRole::DecisionOrchestrator => "decision_orchestrator",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }

    /// The artifact this role's output becomes for downstream agents.
    pub fn produces(self) -> Option<Artifact> {
        match self {
            AgentRole::DataAnalyst => Some(Artifact::DataAnalysis),
            AgentRole::Contextualizer => Some(Artifact::PersonaReport),
            AgentRole::FeatureEngineer => Some(Artifact::DerivedFeatures),
            AgentRole::RiskModeler => Some(Artifact::RiskAssessment),
            AgentRole::IncomeStabilityAnalyst => Some(Artifact::IncomeAssessment),
            AgentRole::DebtAnalyst => Some(Artifact::DebtAssessment),
            AgentRole::RewardModeler => Some(Artifact::RewardAssessment),
            AgentRole::RiskRewardOptimizer => Some(Artifact::RiskRewardAnalysis),
            AgentRole::DecisionOrchestrator => None,
        }
    }

    pub fn in_layer(layer: u8) -> impl Iterator<Item = AgentRole> {
        Self::ALL.into_iter().filter(move |r| r.layer() == layer)
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named pieces of context. Declaration order is the order they appear in a
/// user message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    StructuredProfile,
    ComputedRatios,
    DataAnalysis,
    PersonaReport,
    DerivedFeatures,
    RiskAssessment,
    IncomeAssessment,
    DebtAssessment,
    RewardAssessment,
    BeliefState,
    RiskRewardAnalysis,
}

impl Artifact {
    pub const ALL: [Artifact; 11] = [
        Artifact::StructuredProfile,
        Artifact::ComputedRatios,
        Artifact::DataAnalysis,
        Artifact::PersonaReport,
        Artifact::DerivedFeatures,
        Artifact::RiskAssessment,
        Artifact::IncomeAssessment,
        Artifact::DebtAssessment,
        Artifact::RewardAssessment,
        Artifact::BeliefState,
        Artifact::RiskRewardAnalysis,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            Artifact::StructuredProfile => "Structured Profile",
            Artifact::ComputedRatios => "Computed Financial Ratios",
            Artifact::DataAnalysis => "Data Analyst Report",
            Artifact::PersonaReport => "Persona Report",
            Artifact::DerivedFeatures => "Derived Features",
            Artifact::RiskAssessment => "Risk Assessment",
            Artifact::IncomeAssessment => "Income Stability Assessment",
            Artifact::DebtAssessment => "Debt Assessment",
            Artifact::RewardAssessment => "Reward Assessment",
            Artifact::RiskRewardAnalysis => "Risk-Reward Analysis",
            Artifact::BeliefState => "Belief State",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Artifact::StructuredProfile => "structured_profile",
            Artifact::ComputedRatios => "computed_ratios",
            Artifact::DataAnalysis => "data_analysis",
            Artifact::PersonaReport => "persona_report",
            Artifact::DerivedFeatures => "derived_features",
            Artifact::RiskAssessment => "risk_assessment",
            Artifact::IncomeAssessment => "income_assessment",
            Artifact::DebtAssessment => "debt_assessment",
            Artifact::RewardAssessment => "reward_assessment",
            Artifact::RiskRewardAnalysis => "risk_reward_analysis",
            Artifact::BeliefState => "belief_state",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }

    /// Layer whose completion makes the artifact available; 0 = raw inputs.
    pub fn layer(self) -> u8 {
        match self {
            Artifact::StructuredProfile | Artifact::ComputedRatios => 0,
            Artifact::BeliefState => 2,
            other => AgentRole::ALL
                .into_iter()
                .find(|r| r.produces() == Some(other))
                .map(AgentRole::layer)
                .expect("every agent artifact has a producer"),
        }
    }
}

impl fmt::Display for Artifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

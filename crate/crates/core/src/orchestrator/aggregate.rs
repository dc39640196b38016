use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::agents::AgentOutput;
use crate::dataset::CreditLabel;

pub const REWARD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskWeights {
    pub risk: f64,
    pub income_stability: f64,
    pub loan_feasibility: f64,
}

impl Default for RiskWeights {
    fn default() -> Self {
        Self {
            risk: 1.0,
            income_stability: 1.0,
            loan_feasibility: 1.0,
        }
    }
}

impl RiskWeights {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            risk: self.risk * factor,
            income_stability: self.income_stability * factor,
            loan_feasibility: self.loan_feasibility * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReward {
    pub aggregate_risk: f64,
    pub reward: f64,
    pub ratio: f64,
    pub reward_floor_applied: bool,
}

/// Weighted mean of the risk-side signals over the reward score.
pub fn aggregate_risk_reward(outputs: &[AgentOutput], weights: &RiskWeights) -> Result<RiskReward, OrchestratorError> {
    let find = |name: &str| outputs.iter().find_map(|o| o.score(name));
    let risk_terms = [
        (find("risk_score"), weights.risk),
        (
            find("income_stability_score").map(|s| 1.0 - s),
            weights.income_stability,
        ),
        (
            find("loan_feasibility_score").map(|s| 1.0 - s),
            weights.loan_feasibility,
        ),
    ];
    let (mut weighted, mut total) = (0.0, 0.0);
    for (value, weight) in risk_terms {
        if let Some(v) = value {
            weighted += weight * v;
            total += weight;
        }
    }
    if total <= 0.0 {
        return Err(OrchestratorError::NoScores("risk"));
    }
    let reward = find("overall_reward_score").ok_or(OrchestratorError::NoScores("reward"))?;
    let aggregate_risk = weighted / total;
    let reward_floor_applied = reward < REWARD_FLOOR;
    Ok(RiskReward {
        aggregate_risk,
        reward,
        ratio: aggregate_risk / reward.max(REWARD_FLOOR),
        reward_floor_applied,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Largest acceptable risk-reward ratio (inclusive).
    pub max_ratio: f64,
    /// Largest acceptable posterior probability of default (inclusive).
    pub max_default_prob: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            max_ratio: 1.0,
            max_default_prob: 0.5,
        }
    }
}

/// Rule-based decision used when the orchestrator agent's reply is unusable.
/// Without a ratio the posterior alone decides.
pub fn decide_deterministic(ratio: Option<f64>, posterior: f64, thresholds: &Thresholds) -> (CreditLabel, f64) {
    let posterior_ok = posterior <= thresholds.max_default_prob;
    let posterior_margin = (posterior - thresholds.max_default_prob).abs();
    let (ok, margin) = match ratio {
        Some(r) => (
            r <= thresholds.max_ratio && posterior_ok,
            posterior_margin + (r - thresholds.max_ratio).abs(),
        ),
        None => (posterior_ok, posterior_margin),
    };
    let label = if ok { CreditLabel::Good } else { CreditLabel::Bad };
    (label, margin.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{validate_output, AgentRole};
    use serde_json::json;

    fn outputs(risk: f64, stability: f64, feasibility: f64, reward: f64) -> Vec<AgentOutput> {
        vec![
            validate_output(
                AgentRole::RiskModeler,
                &json!({"pattern_analysis": "", "risk_score": risk, "recommendations": []}),
            ),
            validate_output(
                AgentRole::IncomeStabilityAnalyst,
                &json!({"income_analysis": "", "income_stability_score": stability, "recommendations": []}),
            ),
            validate_output(
                AgentRole::DebtAnalyst,
                &json!({"debt_analysis": "", "loan_feasibility_score": feasibility, "recommendations": []}),
            ),
            validate_output(
                AgentRole::RewardModeler,
                &json!({"profitability_assessment": "", "overall_reward_score": reward, "recommendations": []}),
            ),
        ]
    }

    #[test]
    fn equal_weights_example() {
        let rr = aggregate_risk_reward(&outputs(0.6, 0.6, 0.5, 0.5), &RiskWeights::default()).unwrap();
        assert!((rr.aggregate_risk - 0.5).abs() < 1e-12);
        assert!((rr.ratio - 1.0).abs() < 1e-12);
        assert!(!rr.reward_floor_applied);
    }

    #[test]
    fn zero_risk_full_reward() {
        let rr = aggregate_risk_reward(&outputs(0.0, 1.0, 1.0, 1.0), &RiskWeights::default()).unwrap();
        assert_eq!(rr.ratio, 0.0);
    }

    #[test]
    fn reward_floor() {
        let rr = aggregate_risk_reward(&outputs(0.6, 0.6, 0.5, 0.0), &RiskWeights::default()).unwrap();
        assert!(rr.reward_floor_applied);
        assert!((rr.ratio - 0.5 / 1e-6).abs() < 1e-6);
        assert!(rr.ratio.is_finite());
    }

    #[test]
    fn invalid_outputs_are_skipped() {
        let mut outs = outputs(0.6, 0.6, 0.5, 0.5);
        outs[0] = validate_output(AgentRole::RiskModeler, &json!({"risk_score": 0.9}));
        let rr = aggregate_risk_reward(&outs, &RiskWeights::default()).unwrap();
        assert!((rr.aggregate_risk - 0.45).abs() < 1e-12);
    }

    #[test]
    fn missing_sides_are_errors() {
        let outs = outputs(0.6, 0.6, 0.5, 0.5);
        assert!(matches!(
            aggregate_risk_reward(&outs[3..], &RiskWeights::default()),
            Err(OrchestratorError::NoScores("risk"))
        ));
        assert!(matches!(
            aggregate_risk_reward(&outs[..3], &RiskWeights::default()),
            Err(OrchestratorError::NoScores("reward"))
        ));
    }

    #[test]
    fn doubled_weights_same_aggregate() {
        let outs = outputs(0.7, 0.2, 0.4, 0.3);
        let w = RiskWeights {
            risk: 2.0,
            income_stability: 0.5,
            loan_feasibility: 1.0,
        };
        let a = aggregate_risk_reward(&outs, &w).unwrap();
        let b = aggregate_risk_reward(&outs, &w.scaled(2.0)).unwrap();
        assert!((a.aggregate_risk - b.aggregate_risk).abs() < 1e-12);
    }

    #[test]
    fn deterministic_decisions() {
        let t = Thresholds::default();
        assert_eq!(decide_deterministic(Some(1.0), 0.5, &t).0, CreditLabel::Good);
        assert_eq!(decide_deterministic(Some(2.0), 0.9, &t).0, CreditLabel::Bad);
        let (label, confidence) = decide_deterministic(Some(0.2), 0.1, &t);
        assert_eq!(label, CreditLabel::Good);
        assert_eq!(confidence, 1.0);
        assert_eq!(decide_deterministic(Some(0.9), 0.6, &t).0, CreditLabel::Bad);
        assert_eq!(decide_deterministic(None, 0.4, &t).0, CreditLabel::Good);
    }
}

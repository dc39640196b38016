use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::roles::AgentRole;
use crate::dataset::parse_label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Text,
    /// Inclusive range; `max: None` means unbounded above.
    Score {
        min: f64,
        max: Option<f64>,
    },
    List,
    Object {
        schema: SchemaDef,
    },
    /// A text naming a credit decision.
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: FieldKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SchemaDef {
    pub fields: Vec<FieldDef>,
}

fn text(name: &str) -> FieldDef {
    FieldDef {
        name: name.into(),
        kind: FieldKind::Text,
    }
}

fn list(name: &str) -> FieldDef {
    FieldDef {
        name: name.into(),
        kind: FieldKind::List,
    }
}

fn unit_score(name: &str) -> FieldDef {
    FieldDef {
        name: name.into(),
        kind: FieldKind::Score {
            min: 0.0,
            max: Some(1.0),
        },
    }
}

fn range_text(min: f64, max: Option<f64>) -> String {
    match max {
        Some(max) => format!("[{min},{max}]"),
        None => format!("[{min},inf)"),
    }
}

impl SchemaDef {
    pub fn for_role(role: AgentRole) -> Self {
        let fields = match role {
            AgentRole::DataAnalyst => vec![list("structured_data")],
            AgentRole::Contextualizer => vec![FieldDef {
                name: "output_requirements".into(),
                kind: FieldKind::Object {
                    schema: SchemaDef {
                        fields: vec![
                            text("persona_report"),
                            text("explainability"),
                            unit_score("context_confidence_score"),
                        ],
                    },
                },
            }],
            AgentRole::FeatureEngineer => vec![
                list("derived_features and their respective values"),
                list("recommendations"),
                text("feature_report"),
            ],
            AgentRole::RiskModeler => vec![
                text("pattern_analysis"),
                unit_score("risk_score"),
                list("recommendations"),
            ],
            AgentRole::IncomeStabilityAnalyst => vec![
                text("income_analysis"),
                unit_score("income_stability_score"),
                list("recommendations"),
            ],
            AgentRole::DebtAnalyst => vec![
                text("debt_analysis"),
                unit_score("loan_feasibility_score"),
                list("recommendations"),
            ],
            AgentRole::RewardModeler => vec![
                text("profitability_assessment"),
                unit_score("overall_reward_score"),
                list("recommendations"),
            ],
            AgentRole::RiskRewardOptimizer => vec![
                FieldDef {
                    name: "risk_reward_ratio".into(),
                    kind: FieldKind::Score { min: 0.0, max: None },
                },
                text("risk_assessment"),
                text("reward_potential"),
                text("final_recommendation"),
            ],
            AgentRole::DecisionOrchestrator => vec![
                FieldDef {
                    name: "decision".into(),
                    kind: FieldKind::Label,
                },
                unit_score("confidence"),
                text("rationale"),
            ],
        };
        SchemaDef { fields }
    }

    /// Checks every field and returns the score values found together with
    /// every violation (not just the first).
    pub fn check(&self, payload: &Value) -> (BTreeMap<String, f64>, Vec<String>) {
        let mut scores = BTreeMap::new();
        let mut violations = Vec::new();
        self.check_into(payload, "", &mut scores, &mut violations);
        (scores, violations)
    }

    fn check_into(
        &self,
        payload: &Value,
        prefix: &str,
        scores: &mut BTreeMap<String, f64>,
        violations: &mut Vec<String>,
    ) {
        let Some(object) = payload.as_object() else {
            let at = if prefix.is_empty() {
                "payload".to_string()
            } else {
                prefix.trim_end_matches('.').to_string()
            };
            violations.push(format!("{at} is not a JSON object"));
            return;
        };
        for field in &self.fields {
            let path = format!("{prefix}{}", field.name);
            let Some(value) = object.get(&field.name) else {
                violations.push(format!("missing field {path}"));
                continue;
            };
            match &field.kind {
                FieldKind::Text if !value.is_string() => violations.push(format!("{path} must be text")),
                FieldKind::List if !value.is_array() => violations.push(format!("{path} must be a list")),
                FieldKind::Label => match value.as_str().map(parse_label) {
                    Some(Ok(_)) => {}
                    _ => violations.push(format!("{path} must name good or bad")),
                },
                FieldKind::Score { min, max } => match value.as_f64() {
                    Some(v) if v >= *min && max.is_none_or(|m| v <= m) && v.is_finite() => {
                        scores.insert(field.name.clone(), v);
                    }
                    Some(_) => violations.push(format!("{} out of {}", path, range_text(*min, *max))),
                    None => violations.push(format!("{path} must be a number")),
                },
                FieldKind::Object { schema } => schema.check_into(value, &format!("{path}."), scores, violations),
                _ => {}
            }
        }
    }
}

/// A payload each role's schema accepts; used as the base for mutation tests
/// and for scripted fixtures.
pub fn example_payload(role: AgentRole) -> Value {
    match role {
        AgentRole::DataAnalyst => json!({
            "structured_data": [{
                "attribute": "X1",
                "name": "Status of existing checking account",
                "value": "A11",
                "description": "smaller than 0 DM"
            }]
        }),
        AgentRole::Contextualizer => json!({
            "output_requirements": {
                "persona_report": "Established applicant with stable employment.",
                "explainability": "Built from employment, housing and credit history attributes.",
                "context_confidence_score": 0.7
            }
        }),
        AgentRole::FeatureEngineer => json!({
            "derived_features and their respective values": [
                {"name": "Employment Stability Index", "value": 0.0714}
            ],
            "recommendations": [],
            "feature_report": "Debt-to-asset ratio not computable without asset values."
        }),
        AgentRole::RiskModeler => json!({
            "pattern_analysis": "No delays in past repayments.",
            "risk_score": 0.3,
            "recommendations": []
        }),
        AgentRole::IncomeStabilityAnalyst => json!({
            "income_analysis": "Employed for more than four years.",
            "income_stability_score": 0.7,
            "recommendations": []
        }),
        AgentRole::DebtAnalyst => json!({
            "debt_analysis": "Moderate installment burden.",
            "loan_feasibility_score": 0.6,
            "recommendations": []
        }),
        AgentRole::RewardModeler => json!({
            "profitability_assessment": "Interest income over a 24 month term.",
            "overall_reward_score": 0.6,
            "recommendations": []
        }),
        AgentRole::RiskRewardOptimizer => json!({
            "risk_reward_ratio": 0.6,
            "risk_assessment": "Low to moderate.",
            "reward_potential": "Moderate.",
            "final_recommendation": "approve"
        }),
        AgentRole::DecisionOrchestrator => json!({
            "decision": "good",
            "confidence": 0.8,
            "rationale": "Risk is outweighed by repayment capacity."
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples_are_accepted() {
        for role in AgentRole::ALL {
            let (_, violations) = SchemaDef::for_role(role).check(&example_payload(role));
            assert!(violations.is_empty(), "{role}: {violations:?}");
        }
    }

    #[test]
    fn risk_score_out_of_range() {
        let mut payload = example_payload(AgentRole::RiskModeler);
        payload["risk_score"] = json!(1.5);
        let (_, violations) = SchemaDef::for_role(AgentRole::RiskModeler).check(&payload);
        assert_eq!(violations, ["risk_score out of [0,1]"]);
    }

    #[test]
    fn violations_are_exhaustive() {
        let payload = json!({"risk_score": "high"});
        let (_, violations) = SchemaDef::for_role(AgentRole::RiskModeler).check(&payload);
        assert_eq!(
            violations,
            [
                "missing field pattern_analysis",
                "risk_score must be a number",
                "missing field recommendations"
            ]
        );
    }

    #[test]
    fn nested_scores_are_collected() {
        let (scores, _) =
            SchemaDef::for_role(AgentRole::Contextualizer).check(&example_payload(AgentRole::Contextualizer));
        assert_eq!(scores.get("context_confidence_score"), Some(&0.7));
    }

    #[test]
    fn ratio_has_no_upper_bound() {
        let mut payload = example_payload(AgentRole::RiskRewardOptimizer);
        payload["risk_reward_ratio"] = json!(12.0);
        let schema = SchemaDef::for_role(AgentRole::RiskRewardOptimizer);
        assert!(schema.check(&payload).1.is_empty());
        payload["risk_reward_ratio"] = json!(-0.1);
        assert_eq!(schema.check(&payload).1, ["risk_reward_ratio out of [0,inf)"]);
    }
}

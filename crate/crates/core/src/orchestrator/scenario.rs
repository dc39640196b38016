use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::dataset::{ApplicantRecord, Attribute, AttributeSchema, AttributeValue};

/// An economic shock expressed as multipliers on numerical attributes.
/// Keys are attribute ids (`X5`) or snake-cased names (`credit_amount`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub shock_name: String,
    pub multipliers: BTreeMap<String, f64>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, OrchestratorError> {
        toml::from_str(text).map_err(|e| OrchestratorError::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OrchestratorError::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Resolves every key against the schema; all problems are reported together.
    pub fn resolve<'a>(&self, schema: &'a AttributeSchema) -> Result<Vec<(&'a Attribute, f64)>, OrchestratorError> {
        let mut problems = Vec::new();
        let mut resolved = Vec::new();
        if self.shock_name.trim().is_empty() {
            problems.push("shock_name is empty".to_string());
        }
        for (key, &multiplier) in &self.multipliers {
            let Some(attr) = schema.iter().find(|a| a.id == *key || snake_case(&a.name) == *key) else {
                problems.push(format!("unknown attribute {key}"));
                continue;
            };
            if attr.is_categorical() {
                problems.push(format!("{key} is categorical and cannot be scaled"));
            }
            if !(multiplier > 0.0 && multiplier.is_finite()) {
                problems.push(format!("multiplier for {key} must be positive, got {multiplier}"));
            }
            resolved.push((attr, multiplier));
        }
        if problems.is_empty() {
            Ok(resolved)
        } else {
            Err(OrchestratorError::Scenario(problems.join("; ")))
        }
    }
}

fn snake_case(name: &str) -> String {
    let mut out = String::new();
    for word in name
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push('_');
        }
        out.push_str(&word.to_ascii_lowercase());
    }
    out
}

/// Returns a scaled copy with id `<id>@<shock_name>`; values are rounded to
/// the attribute's step.
pub fn perturb_scenario(
    record: &ApplicantRecord,
    scenario: &Scenario,
    schema: &AttributeSchema,
) -> Result<ApplicantRecord, OrchestratorError> {
    let mut next = record.clone();
    next.id = format!("{}@{}", record.id, scenario.shock_name);
    for (attr, multiplier) in scenario.resolve(schema)? {
        let value = record.number(&attr.id).ok_or_else(|| {
            OrchestratorError::Scenario(format!("record {} has no number for {}", record.id, attr.id))
        })?;
        let step = attr.step();
        let scaled = (value * multiplier / step).round() * step;
        next.values.insert(attr.id.clone(), AttributeValue::Number(scaled));
    }
    Ok(next)
}

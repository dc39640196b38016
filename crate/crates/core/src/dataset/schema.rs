use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

const BUNDLED_SCHEMA: &str = include_str!("../../data/german_credit_schema.toml");

pub const ATTRIBUTE_COUNT: usize = 20;
pub const CATEGORICAL_COUNT: usize = 13;
pub const NUMERICAL_COUNT: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub id: String,
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    /// Rounding granularity for numerical values (1 = integers).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub codebook: BTreeMap<String, String>,
}

impl Attribute {
    pub fn is_categorical(&self) -> bool {
        self.kind == AttributeKind::Categorical
    }

    pub fn describe(&self, code: &str) -> Option<&str> {
        self.codebook.get(code).map(String::as_str)
    }

    pub fn step(&self) -> f64 {
        self.step.unwrap_or(1.0)
    }
}

/// Ordered attribute table with codebooks for the categorical columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    #[serde(rename = "attribute")]
    pub attributes: Vec<Attribute>,
}

impl AttributeSchema {
    /// The standard German-credit codebook shipped with the crate.
    pub fn german_credit() -> Self {
        Self::from_toml(BUNDLED_SCHEMA).expect("bundled schema is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        let schema: AttributeSchema = toml::from_str(text).map_err(|e| DatasetError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut problems = Vec::new();
        if self.attributes.len() != ATTRIBUTE_COUNT {
            problems.push(format!(
                "expected {ATTRIBUTE_COUNT} attributes, found {}",
                self.attributes.len()
            ));
        }
        let categorical = self.attributes.iter().filter(|a| a.is_categorical()).count();
        let numerical = self.attributes.len() - categorical;
        if categorical != CATEGORICAL_COUNT || numerical != NUMERICAL_COUNT {
            problems.push(format!(
                "expected {CATEGORICAL_COUNT} categorical and {NUMERICAL_COUNT} numerical attributes, found {categorical} and {numerical}"
            ));
        }
        let mut seen = HashSet::new();
        for attr in &self.attributes {
            if !seen.insert(attr.id.as_str()) {
                problems.push(format!("duplicate attribute id {}", attr.id));
            }
            match attr.kind {
                AttributeKind::Categorical if attr.codebook.is_empty() => {
                    problems.push(format!("categorical attribute {} has an empty codebook", attr.id))
                }
                AttributeKind::Numerical if !attr.codebook.is_empty() => {
                    problems.push(format!("numerical attribute {} carries a codebook", attr.id))
                }
                _ => {}
            }
            if let Some(step) = attr.step {
                if !(step.is_finite() && step > 0.0) {
                    problems.push(format!("attribute {} has invalid step {step}", attr.id));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::Schema(problems.join("; ")))
        }
    }

    pub fn get(&self, id: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter()
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_schema_has_expected_shape() {
        let schema = AttributeSchema::german_credit();
        assert_eq!(schema.len(), 20);
        assert_eq!(schema.iter().filter(|a| a.is_categorical()).count(), 13);
        assert_eq!(schema.get("X1").unwrap().describe("A11"), Some("smaller than 0 DM"));
        assert_eq!(schema.get("X2").unwrap().unit.as_deref(), Some("months"));
    }

    #[test]
    fn schema_round_trips_through_toml() {
        let schema = AttributeSchema::german_credit();
        let again = AttributeSchema::from_toml(&schema.to_toml()).unwrap();
        assert_eq!(schema, again);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut schema = AttributeSchema::german_credit();
        schema.attributes[2].codebook.clear();
        schema.attributes[3].id = "X1".into();
        let err = schema.validate().unwrap_err().to_string();
        assert!(err.contains("empty codebook"), "{err}");
        assert!(err.contains("duplicate attribute id X1"), "{err}");
    }

    #[test]
    fn wrong_attribute_count_is_rejected() {
        let mut schema = AttributeSchema::german_credit();
        schema.attributes.pop();
        assert!(schema.validate().is_err());
    }
}

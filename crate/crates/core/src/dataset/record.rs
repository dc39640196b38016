use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::{AttributeKind, AttributeSchema};
use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CreditLabel {
    Good,
    Bad,
}

impl CreditLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CreditLabel::Good => "good",
            CreditLabel::Bad => "bad",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            CreditLabel::Good => CreditLabel::Bad,
            CreditLabel::Bad => CreditLabel::Good,
        }
    }
}

impl fmt::Display for CreditLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CreditLabel {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" => Ok(CreditLabel::Good),
            "bad" => Ok(CreditLabel::Bad),
            other => Err(DatasetError::Unparseable(other.to_string())),
        }
    }
}

/// A raw attribute value: a codebook code for categorical columns, a number otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Number(f64),
    Code(String),
}

impl AttributeValue {
    pub fn as_code(&self) -> Option<&str> {
        match self {
            AttributeValue::Code(c) => Some(c),
            AttributeValue::Number(_) => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttributeValue::Number(n) => Some(*n),
            AttributeValue::Code(_) => None,
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Number(n) => write!(f, "{n}"),
            AttributeValue::Code(c) => f.write_str(c),
        }
    }
}

/// Rendering-level alterations used by the bias probes. They never touch `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    /// Adds a synthetic line to the rendered profile.
    Annotate { name: String, value: String },
    /// Hides an attribute's code and replaces its description.
    Redact { attribute: String, description: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicantRecord {
    pub id: String,
    pub values: BTreeMap<String, AttributeValue>,
    #[serde(default)]
    pub label: Option<CreditLabel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Probe>,
}

impl ApplicantRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            values: BTreeMap::new(),
            label: None,
            probes: Vec::new(),
        }
    }

    pub fn with(mut self, attribute: &str, value: AttributeValue) -> Self {
        self.values.insert(attribute.to_string(), value);
        self
    }

    pub fn code(&self, attribute: &str) -> Option<&str> {
        self.values.get(attribute).and_then(AttributeValue::as_code)
    }

    pub fn number(&self, attribute: &str) -> Option<f64> {
        self.values.get(attribute).and_then(AttributeValue::as_number)
    }

    /// Checks keys, kinds, codes and numeric ranges, and that every schema
    /// attribute is present. All problems are reported together.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<(), DatasetError> {
        let mut problems = Vec::new();
        for (key, value) in &self.values {
            let Some(attr) = schema.get(key) else {
                problems.push(format!("unknown attribute {key}"));
                continue;
            };
            match (attr.kind, value) {
                (AttributeKind::Categorical, AttributeValue::Code(code)) => {
                    if attr.describe(code).is_none() {
                        problems.push(format!("unknown code {code} for attribute {key}"));
                    }
                }
                (AttributeKind::Numerical, AttributeValue::Number(n)) => {
                    if !n.is_finite() || *n < 0.0 {
                        problems.push(format!("attribute {key} must be finite and non-negative, got {n}"));
                    }
                }
                (AttributeKind::Categorical, AttributeValue::Number(n)) => {
                    problems.push(format!("attribute {key} expects a code, got number {n}"))
                }
                (AttributeKind::Numerical, AttributeValue::Code(c)) => {
                    problems.push(format!("attribute {key} expects a number, got code {c}"))
                }
            }
        }
        for attr in schema.iter() {
            if !self.values.contains_key(&attr.id) {
                problems.push(format!("missing attribute {}", attr.id));
            }
        }
        for probe in &self.probes {
            if let Probe::Redact { attribute, .. } = probe {
                if schema.get(attribute).is_none() {
                    problems.push(format!("redaction of unknown attribute {attribute}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::InvalidRecord {
                id: self.id.clone(),
                problems,
            })
        }
    }
}

use serde::{Deserialize, Serialize};

use super::record::{ApplicantRecord, AttributeValue, Probe};
use super::schema::{AttributeKind, AttributeSchema};
use super::DatasetError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub attribute: String,
    pub name: String,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// The code-plus-meaning view of a record that agents consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredProfile {
    pub structured_data: Vec<ProfileEntry>,
}

impl StructuredProfile {
    pub fn to_prompt_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn len(&self) -> usize {
        self.structured_data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structured_data.is_empty()
    }
}

pub fn render_structured(
    record: &ApplicantRecord,
    schema: &AttributeSchema,
) -> Result<StructuredProfile, DatasetError> {
    let mut entries = Vec::with_capacity(schema.len() + record.probes.len());
    for attr in schema.iter() {
        let value = record
            .values
            .get(&attr.id)
            .ok_or_else(|| DatasetError::MissingAttribute {
                id: record.id.clone(),
                attribute: attr.id.clone(),
            })?;
        let redaction = record.probes.iter().find_map(|p| match p {
            Probe::Redact { attribute, description } if *attribute == attr.id => Some(description),
            _ => None,
        });
        let entry = match (attr.kind, value) {
            _ if redaction.is_some() => ProfileEntry {
                attribute: attr.id.clone(),
                name: attr.name.clone(),
                value: "redacted".into(),
                unit: None,
                description: redaction.cloned(),
            },
            (AttributeKind::Categorical, AttributeValue::Code(code)) => {
                let description = attr.describe(code).ok_or_else(|| DatasetError::InvalidRecord {
                    id: record.id.clone(),
                    problems: vec![format!("unknown code {code} for attribute {}", attr.id)],
                })?;
                ProfileEntry {
                    attribute: attr.id.clone(),
                    name: attr.name.clone(),
                    value: code.clone(),
                    unit: None,
                    description: Some(description.to_string()),
                }
            }
            (AttributeKind::Numerical, AttributeValue::Number(n)) => ProfileEntry {
                attribute: attr.id.clone(),
                name: attr.name.clone(),
                value: format!("{n}"),
                unit: attr.unit.clone(),
                description: None,
            },
            (_, other) => {
                return Err(DatasetError::InvalidRecord {
                    id: record.id.clone(),
                    problems: vec![format!("attribute {} has a value of the wrong kind: {other}", attr.id)],
                })
            }
        };
        entries.push(entry);
    }
    for probe in &record.probes {
        if let Probe::Annotate { name, value } = probe {
            entries.push(ProfileEntry {
                attribute: name.to_ascii_lowercase(),
                name: name.clone(),
                value: value.clone(),
                unit: None,
                description: Some(format!("{name}: {value}")),
            });
        }
    }
    Ok(StructuredProfile {
        structured_data: entries,
    })
}

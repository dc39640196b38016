use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BiasError;
use crate::dataset::{ApplicantRecord, AttributeSchema, AttributeValue, Probe};

pub const PERSONAL_STATUS: &str = "X9";
pub const ETHNICITY_LINE: &str = "Ethnicity";

/// Code-level gender swap table for the combined personal-status-and-sex
/// attribute, plus the sex-free descriptions used by the redaction probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenderMapping {
    pub attribute: String,
    /// Sex whose records form the unaltered side of each pair.
    pub base_group: String,
    pub swap: BTreeMap<String, String>,
    pub redacted: BTreeMap<String, String>,
}

impl Default for GenderMapping {
    fn default() -> Self {
        let pairs = |xs: &[(&str, &str)]| xs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        Self {
            attribute: PERSONAL_STATUS.to_string(),
            base_group: "male".to_string(),
            swap: pairs(&[
                ("A91", "A92"),
                ("A92", "A93"),
                ("A93", "A95"),
                ("A94", "A92"),
                ("A95", "A93"),
            ]),
            redacted: pairs(&[
                ("A91", "divorced/separated"),
                ("A92", "divorced/separated/married"),
                ("A93", "single"),
                ("A94", "married/widowed"),
                ("A95", "single"),
            ]),
        }
    }
}

impl GenderMapping {
    pub fn from_toml(text: &str) -> Result<Self, BiasError> {
        toml::from_str(text).map_err(|e| BiasError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BiasError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BiasError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Every code must exist in the schema's codebook for the attribute.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<(), BiasError> {
        let Some(attr) = schema.get(&self.attribute) else {
            return Err(BiasError::Config(format!("unknown attribute {}", self.attribute)));
        };
        let problems: Vec<String> = self
            .swap
            .iter()
            .flat_map(|(a, b)| [a, b])
            .chain(self.redacted.keys())
            .filter(|c| attr.describe(c).is_none())
            .map(|c| format!("code {c} not in the codebook of {}", self.attribute))
            .collect();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(BiasError::Config(problems.join("; ")))
        }
    }

    /// Records whose code belongs to the base group and has a swap entry.
    pub fn eligible(&self, record: &ApplicantRecord, schema: &AttributeSchema) -> bool {
        record.code(&self.attribute).is_some_and(|code| {
            self.swap.contains_key(code)
                && sex_of(schema, &self.attribute, code).as_deref() == Some(self.base_group.as_str())
        })
    }

    /// Entries `a → b` whose image maps back to `a`.
    pub fn is_bijective_entry(&self, code: &str) -> bool {
        self.swap
            .get(code)
            .and_then(|b| self.swap.get(b))
            .is_some_and(|back| back == code)
    }

    pub fn bijective_codes(&self) -> Vec<&str> {
        self.swap
            .keys()
            .filter(|c| self.is_bijective_entry(c))
            .map(String::as_str)
            .collect()
    }

    /// Codes whose swap cannot be undone by swapping again.
    pub fn flagged_codes(&self) -> Vec<&str> {
        self.swap
            .keys()
            .filter(|c| !self.is_bijective_entry(c))
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualPair {
    pub base: ApplicantRecord,
    pub variant: ApplicantRecord,
    pub changed_attribute: String,
    pub direction: String,
    /// False when the swap used a many-to-one entry.
    pub reversible: bool,
}

/// The part of a codebook description before " : ", e.g. `male`.
pub fn sex_of(schema: &AttributeSchema, attribute: &str, code: &str) -> Option<String> {
    let description = schema.get(attribute)?.describe(code)?;
    description.split(" : ").next().map(|s| s.trim().to_string())
}

pub fn swap_gender(
    record: &ApplicantRecord,
    mapping: &GenderMapping,
    schema: &AttributeSchema,
) -> Result<CounterfactualPair, BiasError> {
    let code = record
        .code(&mapping.attribute)
        .ok_or_else(|| BiasError::MissingAttribute {
            id: record.id.clone(),
            attribute: mapping.attribute.clone(),
        })?;
    let target = mapping.swap.get(code).ok_or_else(|| BiasError::UnmappedCode {
        id: record.id.clone(),
        code: code.to_string(),
    })?;
    let from = sex_of(schema, &mapping.attribute, code).unwrap_or_else(|| code.to_string());
    let to = sex_of(schema, &mapping.attribute, target).unwrap_or_else(|| target.clone());
    let mut variant = record.clone();
    variant.id = format!("{}@{to}", record.id);
    variant
        .values
        .insert(mapping.attribute.clone(), AttributeValue::Code(target.clone()));
    Ok(CounterfactualPair {
        base: record.clone(),
        variant,
        changed_attribute: mapping.attribute.clone(),
        direction: format!("{from}→{to}"),
        reversible: mapping.is_bijective_entry(code),
    })
}

/// Adds an `Ethnicity: <group>` line to the rendered profile. Attribute
/// values are untouched.
pub fn inject_ethnicity(record: &ApplicantRecord, group: &str) -> Result<ApplicantRecord, BiasError> {
    let group = group.trim();
    if group.is_empty() {
        return Err(BiasError::EmptyGroup);
    }
    let mut variant = record.clone();
    variant.id = format!("{}@{group}", record.id);
    variant.probes.push(Probe::Annotate {
        name: ETHNICITY_LINE.to_string(),
        value: group.to_string(),
    });
    Ok(variant)
}

/// Hides the personal-status code and shows a description without sex.
pub fn redact_gender(record: &ApplicantRecord, mapping: &GenderMapping) -> Result<ApplicantRecord, BiasError> {
    let code = record
        .code(&mapping.attribute)
        .ok_or_else(|| BiasError::MissingAttribute {
            id: record.id.clone(),
            attribute: mapping.attribute.clone(),
        })?;
    let description = mapping.redacted.get(code).ok_or_else(|| BiasError::UnmappedCode {
        id: record.id.clone(),
        code: code.to_string(),
    })?;
    let mut variant = record.clone();
    variant.id = format!("{}@redacted", record.id);
    variant.probes.push(Probe::Redact {
        attribute: mapping.attribute.clone(),
        description: description.clone(),
    });
    Ok(variant)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EthnicityGroups {
    pub groups: Vec<String>,
}

impl Default for EthnicityGroups {
    fn default() -> Self {
        Self {
            groups: vec!["African/Black".into(), "Asian".into()],
        }
    }
}

impl EthnicityGroups {
    pub fn from_toml(text: &str) -> Result<Self, BiasError> {
        let groups: Self = toml::from_str(text).map_err(|e| BiasError::Config(e.to_string()))?;
        if groups.groups.is_empty() {
            return Err(BiasError::Config("group list is empty".into()));
        }
        if groups.groups.iter().any(|g| g.trim().is_empty()) {
            return Err(BiasError::EmptyGroup);
        }
        Ok(groups)
    }

    pub fn load(path: &Path) -> Result<Self, BiasError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BiasError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

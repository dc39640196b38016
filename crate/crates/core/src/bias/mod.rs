//! Counterfactual fairness probes: gender swap, ethnicity injection and
//! gender redaction, with paired-flip and four-fifths-rule reporting.

mod probes;
mod report;

pub use probes::{
    inject_ethnicity, redact_gender, sex_of, swap_gender, CounterfactualPair, EthnicityGroups, GenderMapping,
    ETHNICITY_LINE, PERSONAL_STATUS,
};
pub use report::{
    disparate_impact, group_row, paired_flip_report, BiasReport, DisparateImpact, FlipCase, FlipReport, GroupRow,
    ImpactRow, PairedDecision, FOUR_FIFTHS, NEAR_THRESHOLD,
};

#[derive(Debug, Clone, thiserror::Error)]
pub enum BiasError {
    #[error("record {id}: code {code} has no entry in the mapping")]
    UnmappedCode { id: String, code: String },
    #[error("record {id} has no code for {attribute}")]
    MissingAttribute { id: String, attribute: String },
    #[error("ethnicity group is empty")]
    EmptyGroup,
    #[error("reference approval rate is zero")]
    ZeroReference,
    #[error("rate {0} outside [0,1]")]
    Rate(f64),
    #[error("pair {0} lacks a decision")]
    MissingDecision(String),
    #[error("bias configuration: {0}")]
    Config(String),
}

//! Applicant records, the attribute codebook, and the structured profile
//! view that the agents read.
//!
//! Records are stored as JSONL (`{"id", "values", "label"}` per line); the
//! space-separated statlog layout is also accepted on input.

mod label;
mod load;
mod profile;
mod record;
mod schema;

use std::path::PathBuf;

pub use label::parse_label;
pub use load::{load_dataset, parse_dataset, write_jsonl, DatasetFormat};
pub use profile::{render_structured, ProfileEntry, StructuredProfile};
pub use record::{ApplicantRecord, AttributeValue, CreditLabel, Probe};
pub use schema::{Attribute, AttributeKind, AttributeSchema};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("line {line}: unknown code `{code}` for attribute {attribute}")]
    UnknownCode {
        line: usize,
        attribute: String,
        code: String,
    },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("record {id} is invalid: {}", problems.join("; "))]
    InvalidRecord { id: String, problems: Vec<String> },
    #[error("record {id} is missing attribute {attribute}")]
    MissingAttribute { id: String, attribute: String },
    #[error("unparseable decision: {0:?}")]
    Unparseable(String),
}

//! The nine agent roles: prompts, context selection, output schemas and the
//! call-validate-retry loop.

mod catalog;
mod roles;
mod run;
mod schema;

pub use catalog::{
    builtin_prompt, default_inputs, AgentCatalog, AgentSpec, BASELINE_PROMPT, DEFAULT_MODEL, MULTITASK_FOOTER,
    MULTITASK_HEADER,
};
pub use roles::{AgentRole, Artifact};
pub use run::{build_prompt, render_context, run_agent, validate_output, AgentOutput, Context, CORRECTIVE_INSTRUCTION};
pub use schema::{example_payload, FieldDef, FieldKind, SchemaDef};

use crate::backend::BackendError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum AgentError {
    #[error("{role} needs artifact {artifact}, which is not in context")]
    MissingArtifact { role: String, artifact: Artifact },
    #[error("agent catalog: {0}")]
    Catalog(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::catalog::AgentSpec;
use super::roles::{AgentRole, Artifact};
use super::schema::SchemaDef;
use super::AgentError;
use crate::backend::{extract_json, ChatBackend, ChatRequest, Message, Usage};

pub const CORRECTIVE_INSTRUCTION: &str = "Return only valid JSON matching the required format.";

pub type Context = BTreeMap<Artifact, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutput {
    pub role: AgentRole,
    pub model_id: String,
    pub raw_text: String,
    /// The extracted object as returned by the model; `null` if none was found.
    pub payload: Value,
    pub scores: BTreeMap<String, f64>,
    pub valid: bool,
    pub violations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub attempts: u32,
    pub usage: Usage,
    pub latency_ms: f64,
}

impl AgentOutput {
    pub fn score(&self, name: &str) -> Option<f64> {
        if self.valid {
            self.scores.get(name).copied()
        } else {
            None
        }
    }

    /// Text handed to downstream agents.
    pub fn artifact_text(&self) -> String {
        if self.payload.is_object() {
            serde_json::to_string_pretty(&self.payload).expect("payload serializes")
        } else {
            self.raw_text.clone()
        }
    }
}

/// Assembles the chat request: the role prompt as system message and the
/// selected artifacts, in canonical order, under `## <heading>` lines.
pub fn build_prompt(spec: &AgentSpec, context: &Context) -> Result<ChatRequest, AgentError> {
    let user = render_context(spec.role.as_str(), &spec.input_selector, context)?;
    ChatRequest::new(
        spec.model_id.clone(),
        vec![Message::system(spec.system_prompt.clone()), Message::user(user)],
        spec.role.as_str(),
    )
    .and_then(|r| r.with_sampling(spec.temperature, spec.max_tokens))
    .map_err(AgentError::Backend)
}

pub fn render_context(consumer: &str, selector: &[Artifact], context: &Context) -> Result<String, AgentError> {
    let mut sections = Vec::with_capacity(selector.len());
    for artifact in Artifact::ALL.iter().filter(|a| selector.contains(a)) {
        let text = context.get(artifact).ok_or_else(|| AgentError::MissingArtifact {
            role: consumer.to_string(),
            artifact: *artifact,
        })?;
        sections.push(format!("## {}\n{}", artifact.heading(), text.trim_end()));
    }
    Ok(sections.join("\n\n"))
}

pub fn validate_output(role: AgentRole, payload: &Value) -> AgentOutput {
    let mut output = assess(role, "", &payload.to_string());
    output.raw_text = payload.to_string();
    output
}

/// Extracts and validates one reply.
fn assess(role: AgentRole, model_id: &str, raw_text: &str) -> AgentOutput {
    let (payload, note, scores, violations) = match extract_json(raw_text) {
        Ok(extracted) => {
            let (scores, violations) = SchemaDef::for_role(role).check(&extracted.value);
            (extracted.value, extracted.note, scores, violations)
        }
        Err(e) => (Value::Null, None, BTreeMap::new(), vec![e.to_string()]),
    };
    AgentOutput {
        role,
        model_id: model_id.to_string(),
        raw_text: raw_text.to_string(),
        payload,
        valid: violations.is_empty(),
        scores,
        violations,
        note,
        attempts: 1,
        usage: Usage::default(),
        latency_ms: 0.0,
    }
}

/// Prompt, call, extract, validate; one corrective retry on an invalid reply.
pub async fn run_agent(
    spec: &AgentSpec,
    context: &Context,
    backend: &dyn ChatBackend,
) -> Result<AgentOutput, AgentError> {
    let request = build_prompt(spec, context)?;
    run_request(spec.role, request, backend).await
}

async fn run_request(
    role: AgentRole,
    request: ChatRequest,
    backend: &dyn ChatBackend,
) -> Result<AgentOutput, AgentError> {
    let first = backend.complete(&request).await?;
    let mut output = assess(role, &request.model_id, &first.text);
    output.usage = first.usage;
    output.latency_ms = first.latency_ms;
    if output.valid {
        return Ok(output);
    }
    tracing::debug!(%role, violations = ?output.violations, "invalid output, retrying once");
    let mut retry = request.clone();
    retry.messages.push(Message::assistant(first.text));
    retry.messages.push(Message::user(CORRECTIVE_INSTRUCTION));
    let second = backend.complete(&retry).await?;
    let mut again = assess(role, &request.model_id, &second.text);
    again.attempts = 2;
    again.usage = output.usage;
    again.usage += second.usage;
    again.latency_ms = output.latency_ms + second.latency_ms;
    Ok(again)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::schema::example_payload;
    use crate::backend::{ScriptEntry, ScriptedBackend};

    fn layer1_context() -> Context {
        Artifact::ALL
            .iter()
            .filter(|a| a.layer() <= 1)
            .map(|a| (*a, format!("{a} text")))
            .collect()
    }

    #[test]
    fn layer2_headings_in_order() {
        let spec = AgentSpec::builtin(AgentRole::RiskModeler, "m");
        let request = build_prompt(&spec, &layer1_context()).unwrap();
        let user = &request.messages[1].content;
        let positions: Vec<usize> = ["## Structured Profile", "## Persona Report", "## Derived Features"]
            .iter()
            .map(|h| user.find(h).unwrap_or_else(|| panic!("{h} missing")))
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(request.messages[0].content, spec.system_prompt);
        assert_eq!(request.tag, "risk_modeler");
    }

    #[test]
    fn contextualizer_gets_a_single_heading() {
        let spec = AgentSpec::builtin(AgentRole::Contextualizer, "m");
        let request = build_prompt(&spec, &layer1_context()).unwrap();
        assert_eq!(request.messages[1].content.matches("## ").count(), 1);
    }

    #[test]
    fn identical_inputs_give_identical_requests() {
        let spec = AgentSpec::builtin(AgentRole::DebtAnalyst, "m");
        let a = build_prompt(&spec, &layer1_context()).unwrap();
        let b = build_prompt(&spec, &layer1_context()).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn missing_artifact_is_named() {
        let spec = AgentSpec::builtin(AgentRole::RiskRewardOptimizer, "m");
        let err = build_prompt(&spec, &layer1_context()).unwrap_err().to_string();
        assert!(err.contains("risk_assessment"), "{err}");
    }

    #[test]
    fn prompt_grows_with_selected_artifacts() {
        let mut spec = AgentSpec::builtin(AgentRole::DecisionOrchestrator, "m");
        let context: Context = Artifact::ALL.iter().map(|a| (*a, "x".to_string())).collect();
        let mut last = 0;
        let selector = spec.input_selector.clone();
        for n in 0..=selector.len() {
            spec.input_selector = selector[..n].to_vec();
            let len = build_prompt(&spec, &context).unwrap().messages[1].content.len();
            assert!(len >= last);
            last = len;
        }
    }

    #[test]
    fn validate_accepting_example() {
        let out = validate_output(AgentRole::RiskModeler, &example_payload(AgentRole::RiskModeler));
        assert!(out.valid);
        assert_eq!(out.scores["risk_score"], 0.3);
    }

    #[test]
    fn missing_recommendations_named() {
        let mut payload = example_payload(AgentRole::RiskModeler);
        payload.as_object_mut().unwrap().remove("recommendations");
        let out = validate_output(AgentRole::RiskModeler, &payload);
        assert!(!out.valid);
        assert_eq!(out.violations, ["missing field recommendations"]);
    }

    fn risk_context() -> Context {
        layer1_context()
    }

    #[tokio::test]
    async fn valid_reply_uses_one_call() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::new(
            "risk_modeler",
            example_payload(AgentRole::RiskModeler).to_string(),
        )]);
        let spec = AgentSpec::builtin(AgentRole::RiskModeler, "m");
        let out = run_agent(&spec, &risk_context(), &backend).await.unwrap();
        assert!(out.valid);
        assert_eq!(out.attempts, 1);
    }

    #[tokio::test]
    async fn invalid_then_valid_uses_two_calls() {
        let backend = ScriptedBackend::new(vec![
            ScriptEntry::new("risk_modeler", "I cannot comply"),
            ScriptEntry::new("risk_modeler", example_payload(AgentRole::RiskModeler).to_string())
                .containing(CORRECTIVE_INSTRUCTION),
        ]);
        let spec = AgentSpec::builtin(AgentRole::RiskModeler, "m");
        let out = run_agent(&spec, &risk_context(), &backend).await.unwrap();
        assert!(out.valid);
        assert_eq!(out.attempts, 2);
    }

    #[tokio::test]
    async fn invalid_twice_is_carried_forward() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::new(
            "risk_modeler",
            r#"{"pattern_analysis": "x", "risk_score": 3, "recommendations": []}"#,
        )]);
        let spec = AgentSpec::builtin(AgentRole::RiskModeler, "m");
        let out = run_agent(&spec, &risk_context(), &backend).await.unwrap();
        assert!(!out.valid);
        assert_eq!(out.attempts, 2);
        assert_eq!(out.violations, ["risk_score out of [0,1]"]);
        assert_eq!(out.payload["risk_score"], 3);
        assert_eq!(out.score("risk_score"), None);
    }

    #[tokio::test]
    async fn backend_errors_propagate() {
        let spec = AgentSpec::builtin(AgentRole::RiskModeler, "m");
        let err = run_agent(&spec, &risk_context(), &ScriptedBackend::default())
            .await
            .unwrap_err();
        assert!(matches!(err, AgentError::Backend(_)));
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_risk_reward, decide_deterministic, RiskWeights, Thresholds};
use super::belief::{default_signal, update_belief, BeliefState, DEFAULT_PRIOR};
use super::topology::{Topology, TopologyKind};
use super::transcript::{BaselineCall, DecisionSource, RatioSource, RiskRewardRecord, Transcript};
use super::OrchestratorError;
use crate::agents::{
    render_context, run_agent, AgentCatalog, AgentOutput, AgentRole, Artifact, Context, BASELINE_PROMPT, DEFAULT_MODEL,
    MULTITASK_FOOTER, MULTITASK_HEADER,
};
use crate::backend::{extract_json, ChatBackend, ChatRequest, Message};
use crate::dataset::{parse_label, render_structured, ApplicantRecord, AttributeSchema, CreditLabel};
use crate::features::{compute_ratios, inputs_report, numericize, ratios_report, BucketTable, IncomeEstimator};

pub const COT_INSTRUCTION: &str = "Think step by step.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionPolicy {
    pub prior: f64,
    /// Belief weight per role name; roles not listed weigh 1.
    pub belief_weights: BTreeMap<String, f64>,
    pub risk_weights: RiskWeights,
    pub thresholds: Thresholds,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        Self {
            prior: DEFAULT_PRIOR,
            belief_weights: BTreeMap::new(),
            risk_weights: RiskWeights::default(),
            thresholds: Thresholds::default(),
        }
    }
}

impl DecisionPolicy {
    pub fn belief_weight(&self, role: AgentRole) -> f64 {
        self.belief_weights.get(role.as_str()).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.prior > 0.0 && self.prior < 1.0) {
            problems.push(format!("prior {} outside (0,1)", self.prior));
        }
        for (role, w) in &self.belief_weights {
            if AgentRole::parse(role).is_none() {
                problems.push(format!("belief weight for unknown role `{role}`"));
            }
            if !(*w >= 0.0 && w.is_finite()) {
                problems.push(format!("belief weight for {role} must be non-negative, got {w}"));
            }
        }
        let rw = &self.risk_weights;
        for (name, w) in [
            ("risk", rw.risk),
            ("income_stability", rw.income_stability),
            ("loan_feasibility", rw.loan_feasibility),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                problems.push(format!("risk weight {name} must be non-negative, got {w}"));
            }
        }
        if rw.risk + rw.income_stability + rw.loan_feasibility <= 0.0 {
            problems.push("risk weights sum to zero".into());
        }
        let t = &self.thresholds;
        if !(t.max_ratio > 0.0 && t.max_ratio.is_finite()) {
            problems.push(format!("max_ratio must be positive, got {}", t.max_ratio));
        }
        if !(0.0..=1.0).contains(&t.max_default_prob) {
            problems.push(format!("max_default_prob {} outside [0,1]", t.max_default_prob));
        }
        problems
    }
}

/// Immutable inputs shared by every record of a run.
#[derive(Debug, Clone)]
pub struct Engine {
    pub schema: AttributeSchema,
    pub buckets: BucketTable,
    pub income_estimator: Option<IncomeEstimator>,
    pub catalog: AgentCatalog,
    pub policy: DecisionPolicy,
    pub default_model: String,
}

impl Default for Engine {
    fn default() -> Self {
        Self::new(DEFAULT_MODEL)
    }
}

impl Engine {
    pub fn new(default_model: &str) -> Self {
        Self {
            schema: AttributeSchema::german_credit(),
            buckets: BucketTable::default(),
            income_estimator: None,
            catalog: AgentCatalog::builtin(default_model),
            policy: DecisionPolicy::default(),
            default_model: default_model.to_string(),
        }
    }

    /// The two artifacts derived from the record itself.
    pub fn base_context(&self, record: &ApplicantRecord) -> Result<Context, OrchestratorError> {
        let profile = render_structured(record, &self.schema).map_err(|e| OrchestratorError::Record(e.to_string()))?;
        let numeric = numericize(record, &self.buckets, self.income_estimator.as_ref());
        let ratios = format!(
            "{}\nInputs:\n{}",
            ratios_report(&compute_ratios(&numeric)),
            inputs_report(&numeric)
        );
        Ok(Context::from([
            (Artifact::StructuredProfile, profile.to_prompt_text()),
            (Artifact::ComputedRatios, ratios),
        ]))
    }

    fn baseline_request(&self, topology: &Topology, context: &Context) -> Result<ChatRequest, OrchestratorError> {
        let profile_only = [Artifact::StructuredProfile];
        let (system, user) = match topology.kind {
            TopologyKind::ZeroShot => (
                BASELINE_PROMPT.to_string(),
                render_context("zero_shot", &profile_only, context)?,
            ),
            TopologyKind::Cot => (
                BASELINE_PROMPT.to_string(),
                format!(
                    "{COT_INSTRUCTION}\n\n{}",
                    render_context("cot", &profile_only, context)?
                ),
            ),
            TopologyKind::SingleAgentMultitask => (
                multitask_prompt(&self.catalog),
                render_context(
                    "single_agent_multitask",
                    &[Artifact::StructuredProfile, Artifact::ComputedRatios],
                    context,
                )?,
            ),
            kind => {
                return Err(OrchestratorError::Topology(format!(
                    "{kind} is not a single-call topology"
                )))
            }
        };
        let spec = self.catalog.get(AgentRole::DecisionOrchestrator);
        ChatRequest::new(
            topology.baseline_model(&self.default_model),
            vec![Message::system(system), Message::user(user)],
            topology.kind.as_str(),
        )
        .and_then(|r| r.with_sampling(spec.temperature, spec.max_tokens))
        .map_err(|e| OrchestratorError::Topology(e.to_string()))
    }

    /// Belief from every valid default-risk score, in transcript order.
    fn belief(&self, outputs: &[AgentOutput]) -> Result<BeliefState, OrchestratorError> {
        let mut belief = BeliefState::new(self.policy.prior)?;
        for output in outputs {
            for (name, score) in &output.scores {
                if let (true, Some(signal)) = (output.valid, default_signal(name, *score)) {
                    let weight = self.policy.belief_weight(output.role);
                    belief = update_belief(&belief, output.role.as_str(), signal, weight)?;
                }
            }
        }
        Ok(belief)
    }
}

/// System prompt for the single-agent baseline: every role brief in layer order.
pub fn multitask_prompt(catalog: &AgentCatalog) -> String {
    let mut out = MULTITASK_HEADER.trim_end().to_string();
    for spec in catalog.specs() {
        out.push_str(&format!("\n\n### {}\n{}", spec.role, spec.system_prompt.trim_end()));
    }
    out.push_str("\n\n");
    out.push_str(MULTITASK_FOOTER.trim_end());
    out
}

pub fn belief_report(belief: &BeliefState) -> String {
    let trajectory = belief.trajectory();
    let mut out = format!("Prior probability of default: {:.4}\n", belief.prior_default_prob);
    for (obs, p) in belief.observations.iter().zip(&trajectory[1..]) {
        out.push_str(&format!(
            "After {} (signal {:.4}, weight {:.2}): {:.4}\n",
            obs.role, obs.signal, obs.weight, p
        ));
    }
    out.push_str(&format!(
        "Posterior probability of default: {:.4}\n",
        belief.posterior_default_prob
    ));
    out
}

/// Reads a decision from free text, preferring whatever follows the last
/// "final decision" marker.
pub fn parse_final_decision(text: &str) -> Option<CreditLabel> {
    let lower = text.to_lowercase();
    let tail = lower
        .rfind("final decision")
        .map_or(lower.as_str(), |i| &lower[i + "final decision".len()..]);
    parse_label(tail).ok()
}

pub async fn run_pipeline(
    record: &ApplicantRecord,
    topology: &Topology,
    backend: &dyn ChatBackend,
    engine: &Engine,
) -> Result<Transcript, OrchestratorError> {
    record
        .validate(&engine.schema)
        .map_err(|e| OrchestratorError::Record(e.to_string()))?;
    topology.validate()?;
    let mut context = engine.base_context(record)?;
    let configuration = topology.label(&engine.catalog, &engine.default_model);
    let mut transcript = Transcript::new(&record.id, record.label, &configuration, topology.kind);
    if topology.kind.is_single_call() {
        run_single_call(&mut transcript, topology, &context, backend, engine).await?;
        transcript.tally();
        return Ok(transcript);
    }

    for stage in topology.stages(&engine.catalog) {
        let needs_belief = stage.iter().any(|s| s.input_selector.contains(&Artifact::BeliefState));
        if needs_belief && !context.contains_key(&Artifact::BeliefState) {
            let belief = engine.belief(&transcript.agents)?;
            context.insert(Artifact::BeliefState, belief_report(&belief));
        }
        let calls = stage.iter().map(|spec| run_agent(spec, &context, backend));
        let results = futures::future::join_all(calls).await;
        let mut failure = None;
        for (spec, result) in stage.iter().zip(results) {
            match result {
                Ok(output) => transcript.agents.push(output),
                Err(e) => {
                    failure.get_or_insert((spec.role, e));
                }
            }
        }
        if let Some((role, source)) = failure {
            transcript.tally();
            return Err(OrchestratorError::Agent {
                record_id: record.id.clone(),
                role,
                source,
                partial: Box::new(transcript),
            });
        }
        for output in transcript
            .agents
            .iter()
            .filter(|o| stage.iter().any(|s| s.role == o.role))
        {
            if let Some(artifact) = output.role.produces() {
                context.insert(artifact, output.artifact_text());
            }
        }
    }

    let belief = engine.belief(&transcript.agents)?;
    transcript.belief_trajectory = belief.trajectory();
    let posterior = belief.posterior_default_prob;
    transcript.belief = Some(belief);

    let deterministic = aggregate_risk_reward(&transcript.agents, &engine.policy.risk_weights);
    let agent_ratio = transcript
        .agents
        .iter()
        .find(|o| o.role == AgentRole::RiskRewardOptimizer)
        .and_then(|o| o.score("risk_reward_ratio"));
    transcript.risk_reward = match (agent_ratio, deterministic) {
        (Some(ratio), det) => Some(RiskRewardRecord {
            ratio,
            source: RatioSource::Agent,
            deterministic: det.ok(),
        }),
        (None, Ok(det)) => Some(RiskRewardRecord {
            ratio: det.ratio,
            source: RatioSource::Deterministic,
            deterministic: Some(det),
        }),
        (None, Err(e)) => {
            transcript.notes.push(format!("risk-reward ratio unavailable: {e}"));
            None
        }
    };

    let orchestrator = transcript
        .agents
        .iter()
        .find(|o| o.role == AgentRole::DecisionOrchestrator && o.valid);
    let agent_decision = orchestrator.and_then(|o| {
        let label = o.payload.get("decision")?.as_str().and_then(|d| parse_label(d).ok())?;
        Some((label, o.score("confidence")))
    });
    match agent_decision {
        Some((label, confidence)) => {
            transcript.decision = Some(label);
            transcript.decision_source = Some(DecisionSource::Agent);
            transcript.confidence = confidence;
        }
        None => {
            let ratio = transcript.risk_reward.as_ref().map(|r| r.ratio);
            let (label, confidence) = decide_deterministic(ratio, posterior, &engine.policy.thresholds);
            transcript.decision = Some(label);
            transcript.decision_source = Some(DecisionSource::Deterministic);
            transcript.confidence = Some(confidence);
            transcript
                .notes
                .push("decision_orchestrator output invalid; rule-based decision used".into());
        }
    }
    transcript.tally();
    Ok(transcript)
}

async fn run_single_call(
    transcript: &mut Transcript,
    topology: &Topology,
    context: &Context,
    backend: &dyn ChatBackend,
    engine: &Engine,
) -> Result<(), OrchestratorError> {
    let request = engine.baseline_request(topology, context)?;
    let response = backend.complete(&request).await.map_err(|e| {
        let mut partial = transcript.clone();
        partial.tally();
        OrchestratorError::Agent {
            record_id: transcript.record_id.clone(),
            role: AgentRole::DecisionOrchestrator,
            source: e.into(),
            partial: Box::new(partial),
        }
    })?;
    let (decision, confidence) = match topology.kind {
        TopologyKind::SingleAgentMultitask => {
            let payload = extract_json(&response.text).ok().map(|e| e.value);
            let from_json = payload
                .as_ref()
                .and_then(|p| p.get("decision")?.as_str().and_then(|d| parse_label(d).ok()));
            let confidence = payload
                .as_ref()
                .and_then(|p| p.get("confidence")?.as_f64())
                .filter(|c| (0.0..=1.0).contains(c));
            (from_json.or_else(|| parse_final_decision(&response.text)), confidence)
        }
        _ => (parse_final_decision(&response.text), None),
    };
    if decision.is_none() {
        transcript.notes.push("unparseable decision".into());
    }
    transcript.decision = decision;
    transcript.decision_source = Some(DecisionSource::Baseline);
    transcript.confidence = confidence;
    transcript.baseline = Some(BaselineCall {
        tag: request.tag.clone(),
        model_id: request.model_id.clone(),
        raw_text: response.text,
        usage: response.usage,
        latency_ms: response.latency_ms,
    });
    Ok(())
}

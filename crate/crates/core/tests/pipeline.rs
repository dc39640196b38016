mod common;

use common::{fixture_records, golden_script, RecordingBackend};
use masca::agents::{AgentRole, Artifact};
use masca::backend::{ScriptEntry, ScriptedBackend};
use masca::dataset::CreditLabel;
use masca::orchestrator::{
    run_pipeline, DecisionSource, Engine, OrchestratorError, RatioSource, Topology, TopologyKind, COT_INSTRUCTION,
};

fn layer_of(tag: &str) -> u8 {
    AgentRole::parse(tag).map_or(0, AgentRole::layer)
}

/// Every call must start after all calls of lower layers have ended.
fn assert_barriers(events: &[common::CallEvent]) {
    for e in events {
        for earlier in events.iter().filter(|x| layer_of(&x.tag) < layer_of(&e.tag)) {
            assert!(
                earlier.end < e.start,
                "{} started at {} before {} ended at {}",
                e.tag,
                e.start,
                earlier.tag,
                earlier.end
            );
        }
    }
}

#[tokio::test]
async fn hierarchical_runs_nine_agents_in_layer_order() {
    let engine = Engine::default();
    let record = &fixture_records()[6];
    let backend = RecordingBackend::new(golden_script());
    let t = run_pipeline(record, &Topology::new(TopologyKind::Hierarchical3), &*backend, &engine)
        .await
        .unwrap();
    let events = backend.events();
    assert_eq!(events.len(), 9);
    assert_barriers(&events);
    let roles: Vec<AgentRole> = t.agents.iter().map(|a| a.role).collect();
    assert_eq!(roles, AgentRole::ALL);
    assert_eq!(t.decision, Some(CreditLabel::Good));
    assert_eq!(t.decision_source, Some(DecisionSource::Agent));
    assert_eq!(t.confidence, Some(0.8));
    assert_eq!(t.risk_reward.as_ref().unwrap().source, RatioSource::Agent);
    assert!(t.agents.iter().all(|a| a.valid));
}

#[tokio::test]
async fn same_layer_calls_overlap() {
    let engine = Engine::default();
    let backend = RecordingBackend::new(golden_script());
    run_pipeline(
        &fixture_records()[0],
        &Topology::new(TopologyKind::Hierarchical3),
        &*backend,
        &engine,
    )
    .await
    .unwrap();
    let events = backend.events();
    let layer2: Vec<_> = events.iter().filter(|e| layer_of(&e.tag) == 2).collect();
    let first_end = layer2.iter().map(|e| e.end).min().unwrap();
    let last_start = layer2.iter().map(|e| e.start).max().unwrap();
    assert!(last_start < first_end, "layer-2 calls ran one after another");
}

#[tokio::test]
async fn layer_two_sees_all_layer_one_artifacts() {
    let engine = Engine::default();
    let backend = RecordingBackend::new(golden_script());
    run_pipeline(
        &fixture_records()[0],
        &Topology::new(TopologyKind::Hierarchical3),
        &*backend,
        &engine,
    )
    .await
    .unwrap();
    for e in backend.events().iter().filter(|e| layer_of(&e.tag) == 2) {
        for artifact in [
            Artifact::DataAnalysis,
            Artifact::PersonaReport,
            Artifact::DerivedFeatures,
        ] {
            assert!(
                e.user.contains(&format!("## {}", artifact.heading())),
                "{} lacks {artifact}",
                e.tag
            );
        }
    }
    let orchestrator = backend
        .events()
        .into_iter()
        .find(|e| e.tag == "decision_orchestrator")
        .unwrap();
    for heading in [
        "## Risk Assessment",
        "## Reward Assessment",
        "## Belief State",
        "## Risk-Reward Analysis",
    ] {
        assert!(orchestrator.user.contains(heading), "orchestrator lacks {heading}");
    }
}

#[tokio::test]
async fn two_level_skips_the_optimizer() {
    let engine = Engine::default();
    let backend = RecordingBackend::new(golden_script());
    let t = run_pipeline(
        &fixture_records()[6],
        &Topology::new(TopologyKind::TwoLevel),
        &*backend,
        &engine,
    )
    .await
    .unwrap();
    let events = backend.events();
    assert_eq!(events.len(), 8);
    assert_barriers(&events);
    assert!(events.iter().all(|e| e.tag != "risk_reward_optimizer"));
    assert_eq!(t.risk_reward.unwrap().source, RatioSource::Deterministic);
    let orchestrator = events.iter().find(|e| e.tag == "decision_orchestrator").unwrap();
    assert!(orchestrator.user.contains("## Belief State"));
    assert!(!orchestrator.user.contains("## Risk-Reward Analysis"));
}

#[tokio::test]
async fn flat_agents_only_see_the_profile() {
    let engine = Engine::default();
    let backend = RecordingBackend::new(golden_script());
    run_pipeline(
        &fixture_records()[0],
        &Topology::new(TopologyKind::Flat),
        &*backend,
        &engine,
    )
    .await
    .unwrap();
    let events = backend.events();
    assert_eq!(events.len(), 9);
    for e in &events {
        assert!(e.user.starts_with("## Structured Profile\n"), "{}", e.tag);
        assert_eq!(e.user.matches("\n## ").count(), 0, "{} got extra sections", e.tag);
    }
}

#[tokio::test]
async fn zero_shot_is_one_call() {
    let engine = Engine::default();
    let backend = RecordingBackend::new(golden_script());
    let t = run_pipeline(
        &fixture_records()[0],
        &Topology::new(TopologyKind::ZeroShot),
        &*backend,
        &engine,
    )
    .await
    .unwrap();
    assert_eq!(backend.events().len(), 1);
    assert_eq!(t.decision, Some(CreditLabel::Bad));
    assert_eq!(t.decision_source, Some(DecisionSource::Baseline));
    assert!(t.agents.is_empty());
}

#[tokio::test]
async fn zero_shot_unparseable_reply_has_no_decision() {
    let engine = Engine::default();
    let t = run_pipeline(
        &fixture_records()[2],
        &Topology::new(TopologyKind::ZeroShot),
        &golden_script(),
        &engine,
    )
    .await
    .unwrap();
    assert_eq!(t.decision, None);
    assert_eq!(t.notes, ["unparseable decision"]);
}

#[tokio::test]
async fn cot_prompt_asks_for_steps() {
    let engine = Engine::default();
    let backend = RecordingBackend::new(golden_script());
    let t = run_pipeline(
        &fixture_records()[1],
        &Topology::new(TopologyKind::Cot),
        &*backend,
        &engine,
    )
    .await
    .unwrap();
    let events = backend.events();
    assert_eq!(events.len(), 1);
    assert!(events[0].user.starts_with(COT_INSTRUCTION));
    assert!(events[0].user.contains("Think step by step"));
    // The reply mentions "bad" before its final line; only the final decision counts.
    assert_eq!(t.decision, Some(CreditLabel::Good));
}

#[tokio::test]
async fn multitask_prompt_holds_every_role_brief() {
    let engine = Engine::default();
    let backend = RecordingBackend::new(golden_script());
    let t = run_pipeline(
        &fixture_records()[1],
        &Topology::new(TopologyKind::SingleAgentMultitask),
        &*backend,
        &engine,
    )
    .await
    .unwrap();
    let events = backend.events();
    assert_eq!(events.len(), 1);
    for role in AgentRole::ALL {
        assert!(
            events[0].system.contains(engine.catalog.get(role).system_prompt.trim()),
            "{role}"
        );
    }
    assert_eq!(t.decision, Some(CreditLabel::Good));
    assert_eq!(t.confidence, Some(0.75));
}

#[tokio::test]
async fn invalid_orchestrator_falls_back_to_rules() {
    let engine = Engine::default();
    // Record 9 is unemployed (A71); the scripted orchestrator never answers in JSON.
    let t = run_pipeline(
        &fixture_records()[8],
        &Topology::new(TopologyKind::Hierarchical3),
        &golden_script(),
        &engine,
    )
    .await
    .unwrap();
    let orchestrator = t.agents.last().unwrap();
    assert!(!orchestrator.valid);
    assert_eq!(orchestrator.attempts, 2);
    assert_eq!(t.decision_source, Some(DecisionSource::Deterministic));
    assert!(t.decision.is_some());
    assert!(t.confidence.is_some());
}

#[tokio::test]
async fn corrective_retry_recovers_debt_analyst() {
    let engine = Engine::default();
    // Record 2 carries A92, for which the first debt reply is prose.
    let t = run_pipeline(
        &fixture_records()[1],
        &Topology::new(TopologyKind::Hierarchical3),
        &golden_script(),
        &engine,
    )
    .await
    .unwrap();
    let debt = t.agents.iter().find(|a| a.role == AgentRole::DebtAnalyst).unwrap();
    assert!(debt.valid);
    assert_eq!(debt.attempts, 2);
    assert_eq!(debt.scores["loan_feasibility_score"], 0.55);
}

#[tokio::test]
async fn transcripts_are_byte_identical_across_runs() {
    let engine = Engine::default();
    for kind in TopologyKind::ALL {
        let topology = Topology::new(kind);
        for record in fixture_records() {
            let a = run_pipeline(&record, &topology, &golden_script(), &engine)
                .await
                .unwrap();
            let b = run_pipeline(&record, &topology, &*RecordingBackend::new(golden_script()), &engine)
                .await
                .unwrap();
            assert_eq!(a.to_json_line(), b.to_json_line(), "{kind} {}", record.id);
        }
    }
}

#[tokio::test]
async fn backend_failure_returns_partial_transcript() {
    let engine = Engine::default();
    let mut script = golden_script();
    script.script.retain(|e| e.tag != "reward_modeler");
    let err = run_pipeline(
        &fixture_records()[0],
        &Topology::new(TopologyKind::Hierarchical3),
        &script,
        &engine,
    )
    .await
    .unwrap_err();
    let OrchestratorError::Agent { role, partial, .. } = err else {
        panic!("{err}")
    };
    assert_eq!(role, AgentRole::RewardModeler);
    assert_eq!(partial.agents.len(), 6);
    assert!(partial.decision.is_none());
}

#[tokio::test]
async fn belief_is_recorded_for_agent_topologies() {
    let engine = Engine::default();
    let t = run_pipeline(
        &fixture_records()[0],
        &Topology::new(TopologyKind::Hierarchical3),
        &golden_script(),
        &engine,
    )
    .await
    .unwrap();
    let belief = t.belief.unwrap();
    // contextualizer, risk, income stability, feasibility, reward
    assert_eq!(belief.observations.len(), 5);
    assert_eq!(t.belief_trajectory.len(), 6);
    assert_eq!(t.belief_trajectory[0], 0.3);
    let signals = [0.4, 0.75, 0.3, 0.35, 0.4];
    let log_odds: f64 = (0.3f64 / 0.7).ln() + signals.iter().map(|s: &f64| (s / (1.0 - s)).ln()).sum::<f64>();
    let expected = 1.0 / (1.0 + (-log_odds).exp());
    assert!((belief.posterior_default_prob - expected).abs() < 1e-12);
}

#[tokio::test]
async fn scripted_miss_names_the_tag() {
    let engine = Engine::default();
    let script = ScriptedBackend::new(vec![ScriptEntry::new("zero_shot", "good")]);
    let err = run_pipeline(
        &fixture_records()[0],
        &Topology::new(TopologyKind::Cot),
        &script,
        &engine,
    )
    .await
    .unwrap_err()
    .to_string();
    assert!(err.contains("cot"), "{err}");
}

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use mada::design::{
    run_study, Backend, Direction, PolicyKind, StopReason, Study, StudyConfig, SurrogateEvaluator, TraceKind, TraceLog,
    Verdict,
};
use mada::orchestrator::{
    analyze_context, is_legal_path, is_nominal_path, run_workflow, select_next, Agent, AgentDescriptor, AgentError,
    AgentName, ContextOptions, ContextSummary, ControlError, ControlHandle, ConversationHistory, ExpertCommand,
    GeometryTask, Orchestrator, OrchestratorError, Phase, RuleSelector, RunStatus, Selection, Selector, TurnContext,
    TurnOutput, WorkflowOptions,
};
use mada::scheduler::JobState;
use proptest::prelude::*;
use serde_json::json;

fn surrogate(direction: Direction, rounds: usize, per_round: usize, seed: u64, policy: PolicyKind) -> StudyConfig {
    let mut c = StudyConfig::new("wf", Backend::Surrogate, direction, rounds, per_round);
    c.seed = seed;
    c.policy = policy;
    c
}

fn direct(config: &StudyConfig) -> mada::design::StudyResult {
    let mut study = Study::new(config.clone(), TraceLog::in_memory()).unwrap();
    let mut eval = SurrogateEvaluator {
        config: config.surrogate.clone(),
        direction: config.direction,
    };
    run_study(&mut study, &mut eval, &mut |_| Verdict::Continue).unwrap()
}

/// Block until `cond` holds, failing after a generous wall limit.
fn wait_for(what: &str, mut cond: impl FnMut() -> bool) {
    let start = Instant::now();
    while !cond() {
        assert!(start.elapsed() < Duration::from_secs(60), "timed out waiting for {what}");
        thread::sleep(Duration::from_millis(5));
    }
}

fn caps() -> BTreeMap<String, Vec<String>> {
    BTreeMap::from([
        ("GA".to_string(), vec!["generate_geometry".to_string()]),
        ("JMA".to_string(), vec!["get_objective".to_string()]),
    ])
}

#[test]
fn empty_history_summary_has_only_config_and_capabilities() {
    let s = analyze_context(
        &ConversationHistory::new(),
        &caps(),
        &json!({"name": "x"}),
        None,
        &ContextOptions::default(),
    );
    assert!(s.messages.is_empty());
    assert!(s.incumbent.is_none());
    assert_eq!(s.dropped, 0);
    assert_eq!(s.config, json!({"name": "x"}));
    assert_eq!(s.capabilities, caps());
    let text = s.render();
    assert!(text.contains("incumbent: none"));
    assert!(text.contains("GA: generate_geometry"));
}

#[test]
fn window_keeps_the_twelve_most_recent_messages() {
    let mut h = ConversationHistory::new();
    for i in 1..=30 {
        h.push("IDA", &format!("message {i}"), None);
    }
    let s = analyze_context(&h, &caps(), &json!({}), None, &ContextOptions::default());
    let turns: Vec<usize> = s.messages.iter().map(|m| m.turn).collect();
    assert_eq!(turns, (19..=30).collect::<Vec<_>>());
    assert_eq!(s.dropped, 18);
}

#[test]
fn rule_selector_examples() {
    let s = analyze_context(&ConversationHistory::new(), &caps(), &json!({}), None, &ContextOptions::default());
    let all = [AgentName::GA, AgentName::JMA, AgentName::IDA];
    let pick = |p| select_next(&s, p, &all).unwrap();
    assert_eq!(pick(Phase::NeedMesh), Selection::Agent(AgentName::GA));
    assert_eq!(pick(Phase::NeedProposals), Selection::Agent(AgentName::IDA));
    assert_eq!(pick(Phase::RunsPending), Selection::Agent(AgentName::JMA));
    assert_eq!(pick(Phase::ResultsReady), Selection::Agent(AgentName::IDA));
    assert_eq!(pick(Phase::AwaitingExpert), Selection::Expert);
    assert_eq!(pick(Phase::Done), Selection::Terminate);
    let err = select_next(&s, Phase::RunsPending, &[AgentName::GA, AgentName::IDA]).unwrap_err();
    assert!(matches!(
        err,
        OrchestratorError::NoEligibleAgent {
            phase: Phase::RunsPending,
            agent: AgentName::JMA
        }
    ));
}

#[test]
fn surrogate_workflow_matches_direct_study() {
    for (direction, policy) in [
        (Direction::Minimize, PolicyKind::Scripted),
        (Direction::Maximize, PolicyKind::Scripted),
        (Direction::Minimize, PolicyKind::TrustRegion),
        (Direction::Maximize, PolicyKind::TrustRegion),
    ] {
        for seed in [0, 7, 42] {
            let cfg = surrogate(direction, 3, 10, seed, policy);
            let expected = direct(&cfg);
            let wf = run_workflow(cfg, &WorkflowOptions::default(), &ControlHandle::new()).unwrap();
            assert_eq!(wf.study.incumbent, expected.incumbent, "{direction:?} {policy:?} seed {seed}");
            assert_eq!(wf.study.evaluations, expected.evaluations);
            assert_eq!(wf.study.rounds, expected.rounds);
            assert_eq!(wf.study.stop_reason, expected.stop_reason);
            assert!(is_nominal_path(&wf.phases), "{:?}", wf.phases);
            assert_eq!(wf.phases.last(), Some(&Phase::Done));
        }
    }
}

#[test]
fn workflow_trace_matches_direct_trace_apart_from_agent_turns() {
    let cfg = surrogate(Direction::Maximize, 3, 10, 3, PolicyKind::Scripted);
    let mut study = Study::new(cfg.clone(), TraceLog::in_memory()).unwrap();
    let mut eval = SurrogateEvaluator {
        config: cfg.surrogate.clone(),
        direction: cfg.direction,
    };
    run_study(&mut study, &mut eval, &mut |_| Verdict::Continue).unwrap();
    let strip = |evs: &[mada::design::TraceEvent]| -> Vec<(usize, TraceKind, serde_json::Value)> {
        evs.iter()
            .filter(|e| e.kind != TraceKind::AgentTurn)
            .map(|e| (e.round, e.kind, e.payload.clone()))
            .collect()
    };
    let wf = run_workflow(cfg, &WorkflowOptions::default(), &ControlHandle::new()).unwrap();
    assert_eq!(strip(&wf.trace), strip(study.trace().events()));
    let turns = wf.trace.iter().filter(|e| e.kind == TraceKind::AgentTurn).count();
    assert_eq!(turns, wf.history.len());
    assert_eq!(mada::design::replay(&wf.trace).unwrap().incumbent, wf.study.incumbent);
}

/// Wraps the rule selector and keeps every summary it was shown.
struct Recording {
    seen: Arc<Mutex<Vec<(Phase, ContextSummary)>>>,
}

impl Selector for Recording {
    fn select(
        &mut self,
        summary: &ContextSummary,
        phase: Phase,
        registered: &[AgentName],
    ) -> Result<Selection, OrchestratorError> {
        self.seen.lock().unwrap().push((phase, summary.clone()));
        RuleSelector.select(summary, phase, registered)
    }
}

fn recorded_run(cfg: StudyConfig) -> (mada::orchestrator::WorkflowResult, Vec<(Phase, ContextSummary)>) {
    let opts = WorkflowOptions::default();
    let agents = mada::orchestrator::standard_agents(&cfg, &opts).unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let mut orch = Orchestrator::new(agents.agents, opts)
        .unwrap()
        .with_selector(Box::new(Recording { seen: seen.clone() }));
    let wf = orch.run(cfg).unwrap();
    let seen = seen.lock().unwrap().clone();
    (wf, seen)
}

#[test]
fn every_turn_reaches_the_next_summary() {
    let (wf, seen) = recorded_run(surrogate(Direction::Minimize, 4, 6, 1, PolicyKind::TrustRegion));
    let n = wf.history.len();
    assert!(n > 0);
    // The selector runs once per turn plus the final Terminate.
    assert_eq!(seen.len(), n + 1);
    for (i, (_, s)) in seen.iter().enumerate() {
        let turns: Vec<usize> = s.messages.iter().map(|m| m.turn).collect();
        let expected: Vec<usize> = (i.saturating_sub(12) + 1..=i).collect();
        assert_eq!(turns, expected, "summary {i}");
    }
    let union: BTreeSet<usize> = seen.iter().flat_map(|(_, s)| s.messages.iter().map(|m| m.turn)).collect();
    assert_eq!(union, (1..=n).collect());
    for s in seen.iter().map(|(_, s)| s) {
        for agent in ["GA", "JMA", "IDA"] {
            assert!(s.capabilities.contains_key(agent));
        }
    }
}

#[test]
fn incumbent_is_pinned_once_a_round_completes() {
    let (wf, seen) = recorded_run(surrogate(Direction::Maximize, 3, 8, 5, PolicyKind::Scripted));
    let mut completed = false;
    for (phase, s) in &seen {
        if completed {
            assert!(s.incumbent.is_some(), "phase {phase}");
        }
        if s.messages.last().is_some_and(|m| m.speaker == "IDA" && m.summary.contains("ranked")) {
            completed = true;
        }
    }
    assert!(completed);
    assert_eq!(seen.last().unwrap().1.incumbent, wf.study.incumbent);
}

#[test]
fn design_agent_declares_done_at_convergence() {
    let cfg = surrogate(Direction::Minimize, 8, 10, 0, PolicyKind::Scripted);
    let wf = run_workflow(cfg, &WorkflowOptions::default(), &ControlHandle::new()).unwrap();
    assert_eq!(wf.study.stop_reason, Some(StopReason::Converged));
    assert!(wf.study.rounds.len() < 8);
    let last = wf.history.messages().last().unwrap();
    assert_eq!(last.speaker, "IDA");
    assert!(last.summary.contains("Converged"), "{}", last.summary);
    assert_eq!(wf.phases[wf.phases.len() - 2..], [Phase::ResultsReady, Phase::Done]);
    assert!(is_nominal_path(&wf.phases));
}

#[test]
fn simulation_study_turn_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = StudyConfig::new("sim2x20", Backend::Simulation, Direction::Minimize, 2, 20);
    cfg.policy = PolicyKind::TrustRegion;
    cfg.seed = 11;
    cfg.output_dir = Some(dir.path().to_path_buf());
    let wf = run_workflow(cfg, &WorkflowOptions::default(), &ControlHandle::new()).unwrap();
    assert!(wf.turns_by(AgentName::JMA) >= 2);
    assert!(wf.turns_by(AgentName::IDA) >= 3);
    assert_eq!(wf.turns_by(AgentName::GA), 1);
    assert_eq!(wf.study.evaluations, 40);
    assert!(is_nominal_path(&wf.phases), "{:?}", wf.phases);
    for m in wf.history.messages().iter().filter(|m| m.speaker == "JMA") {
        assert!(m.summary.contains("20 runs: 20 completed"), "{}", m.summary);
        assert!(m.summary.chars().count() <= 500);
    }
    let hist = wf.study.incumbent_history();
    assert!(hist[1].unwrap() <= hist[0].unwrap());
    assert!(dir.path().join("sim2x20_runs").join("run_0039").join("tracers.json").exists());
    assert!(dir.path().join("sim2x20.trace.jsonl").exists());
}

#[test]
fn failed_verification_retries_then_escalates_and_stop_ends_the_study() {
    let opts = WorkflowOptions {
        geometry: GeometryTask {
            // Reference offset far beyond the tolerance.
            reference: Some(
                "create vertex 5 5\ncreate vertex 6 5\ncreate vertex 6 6\ncreate vertex 5 6\n\
                 create curve 1 2\ncreate curve 2 3\ncreate curve 3 4\ncreate curve 4 1\n\
                 create surface 1 2 3 4\nmesh surface 1 intervals 4\n"
                    .into(),
            ),
            ..GeometryTask::default()
        },
        ..WorkflowOptions::default()
    };
    let control = ControlHandle::new();
    let cfg = surrogate(Direction::Minimize, 3, 5, 0, PolicyKind::Scripted);
    let c2 = control.clone();
    let worker = thread::spawn(move || run_workflow(cfg, &opts, &c2));
    wait_for("expert gate", || control.approval_pending());
    let view = control.view().unwrap();
    assert_eq!(view.phase, Phase::AwaitingExpert);
    assert_eq!(view.status, RunStatus::AwaitingExpert);
    assert!(view.approval_pending);
    control.command(ExpertCommand::Stop).unwrap();
    let wf = worker.join().unwrap().unwrap();
    assert_eq!(
        wf.phases,
        vec![Phase::NeedMesh, Phase::NeedMesh, Phase::AwaitingExpert, Phase::Done]
    );
    assert!(is_legal_path(&wf.phases));
    assert!(!is_nominal_path(&wf.phases));
    let msgs = wf.history.messages();
    assert!(msgs[0].summary.contains("retrying"), "{}", msgs[0].summary);
    assert!(msgs[1].summary.contains("escalating"), "{}", msgs[1].summary);
    assert_eq!(msgs[2].speaker, "EXPERT");
    assert_eq!(wf.study.evaluations, 0);
    assert_eq!(wf.study.stop_reason, Some(StopReason::ExpertStop));
    assert!(!control.is_active());
    assert_eq!(control.command(ExpertCommand::Stop), Err(ControlError::NoActiveStudy));
}

#[test]
fn expert_stop_at_round_gate_returns_partial_result() {
    let mut cfg = surrogate(Direction::Maximize, 3, 10, 2, PolicyKind::Scripted);
    cfg.approval_required = true;
    let control = ControlHandle::new();
    let c2 = control.clone();
    let worker = thread::spawn(move || run_workflow(cfg, &WorkflowOptions::default(), &c2));
    wait_for("round gate", || control.approval_pending());
    assert_eq!(control.rounds().len(), 1);
    control.command(ExpertCommand::Stop).unwrap();
    let wf = worker.join().unwrap().unwrap();
    assert_eq!(wf.study.rounds.len(), 1);
    assert_eq!(wf.study.evaluations, 10);
    assert_eq!(wf.study.stop_reason, Some(StopReason::ExpertStop));
    assert!(wf.study.incumbent.is_some());
    assert_eq!(wf.phases[wf.phases.len() - 2..], [Phase::AwaitingExpert, Phase::Done]);
    assert!(is_legal_path(&wf.phases));
    assert_eq!(control.view().unwrap().status, RunStatus::Done);
}

#[test]
fn approving_every_gate_matches_the_ungated_study() {
    let mut cfg = surrogate(Direction::Maximize, 3, 10, 9, PolicyKind::Scripted);
    let expected = direct(&cfg);
    cfg.approval_required = true;
    let control = ControlHandle::new();
    let c2 = control.clone();
    let worker = thread::spawn(move || run_workflow(cfg, &WorkflowOptions::default(), &c2));
    let mut approvals = 0;
    while !worker.is_finished() {
        if control.approval_pending() {
            control.command(ExpertCommand::ApproveRound).unwrap();
            approvals += 1;
        }
        thread::sleep(Duration::from_millis(2));
    }
    let wf = worker.join().unwrap().unwrap();
    assert_eq!(approvals, 2);
    assert_eq!(wf.study.incumbent, expected.incumbent);
    assert_eq!(wf.study.evaluations, expected.evaluations);
    assert!(is_legal_path(&wf.phases));
}

#[test]
fn tightened_bounds_hold_for_later_proposals() {
    let mut cfg = surrogate(Direction::Maximize, 4, 10, 4, PolicyKind::TrustRegion);
    cfg.approval_required = true;
    let control = ControlHandle::new();
    let c2 = control.clone();
    let worker = thread::spawn(move || run_workflow(cfg, &WorkflowOptions::default(), &c2));
    wait_for("first gate", || control.approval_pending());
    let bad = control.command(ExpertCommand::SetBounds {
        lower: vec![0.1; 4],
        upper: vec![-0.1; 4],
    });
    assert!(matches!(bad, Err(ControlError::InvalidBounds(_))));
    let wide = control.command(ExpertCommand::SetBounds {
        lower: vec![-0.5; 4],
        upper: vec![0.5; 4],
    });
    assert!(matches!(wide, Err(ControlError::InvalidBounds(_))));
    control
        .command(ExpertCommand::SetBounds {
            lower: vec![-0.1; 4],
            upper: vec![0.1; 4],
        })
        .unwrap();
    control.command(ExpertCommand::ApproveRound).unwrap();
    while !worker.is_finished() {
        if control.approval_pending() {
            let _ = control.command(ExpertCommand::ApproveRound);
        }
        thread::sleep(Duration::from_millis(2));
    }
    let wf = worker.join().unwrap().unwrap();
    // The round-1 incumbent lies outside the new box, so the study may stop
    // early on convergence.
    assert!(wf.study.rounds.len() >= 3);
    for r in &wf.study.rounds[1..] {
        for c in &r.candidates {
            assert!(c.design.iter().all(|v| (-0.1..=0.1).contains(v)), "round {}: {:?}", r.index, c.design);
        }
    }
    assert!(wf.history.messages().iter().any(|m| m.speaker == "EXPERT" && m.summary.starts_with("bounds set")));
    assert_eq!(control.view().unwrap().space.upper, vec![0.1; 4]);
}

/// Geometry stand-in that blocks until released.
struct Gate {
    desc: AgentDescriptor,
    release: mpsc::Receiver<()>,
}

impl Gate {
    fn new() -> (Self, mpsc::Sender<()>) {
        let (tx, rx) = mpsc::channel();
        let desc = AgentDescriptor {
            name: AgentName::GA,
            role_text: "waits".into(),
            tools: Vec::new(),
            skills: Vec::new(),
        };
        (Self { desc, release: rx }, tx)
    }
}

impl Agent for Gate {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.desc
    }

    fn turn(&mut self, _phase: Phase, _ctx: &mut TurnContext<'_>) -> Result<TurnOutput, AgentError> {
        self.release.recv().map_err(|e| AgentError::Tool(e.to_string()))?;
        Ok(TurnOutput {
            summary: "mesh ready".into(),
            next: Phase::NeedProposals,
            payload: json!({}),
        })
    }
}

#[test]
fn approve_without_gate_and_pause_semantics() {
    let (gate, release) = Gate::new();
    let control = ControlHandle::new();
    assert_eq!(control.command(ExpertCommand::Pause), Err(ControlError::NoActiveStudy));
    let mut orch = Orchestrator::new(vec![Box::new(gate)], WorkflowOptions::default())
        .unwrap()
        .with_control(control.clone());
    let cfg = surrogate(Direction::Minimize, 2, 4, 0, PolicyKind::Scripted);
    let worker = thread::spawn(move || orch.run(cfg));
    wait_for("study start", || control.is_active());
    assert_eq!(control.command(ExpertCommand::ApproveRound), Err(ControlError::NoPendingApproval));
    control.command(ExpertCommand::Pause).unwrap();
    release.send(()).unwrap();
    wait_for("phase change", || control.view().is_some_and(|v| v.phase == Phase::NeedProposals));
    // Paused: no IDA is registered, so any further turn would end the run with an error.
    thread::sleep(Duration::from_millis(100));
    assert!(!worker.is_finished());
    assert_eq!(control.view().unwrap().status, RunStatus::Paused);
    control.command(ExpertCommand::Stop).unwrap();
    let wf = worker.join().unwrap().unwrap();
    assert_eq!(wf.phases, vec![Phase::NeedMesh, Phase::NeedProposals, Phase::Done]);
    assert_eq!(wf.turns, 1);
    assert_eq!(wf.study.stop_reason, Some(StopReason::ExpertStop));
}

#[test]
fn missing_agent_is_reported() {
    let (gate, release) = Gate::new();
    release.send(()).unwrap();
    let mut orch = Orchestrator::new(vec![Box::new(gate)], WorkflowOptions::default()).unwrap();
    let err = orch
        .run(surrogate(Direction::Minimize, 1, 2, 0, PolicyKind::Scripted))
        .unwrap_err();
    assert!(matches!(
        err,
        OrchestratorError::NoEligibleAgent {
            phase: Phase::NeedProposals,
            agent: AgentName::IDA
        }
    ));
}

#[test]
fn duplicate_agents_are_rejected() {
    let (a, _ta) = Gate::new();
    let (b, _tb) = Gate::new();
    let err = Orchestrator::new(vec![Box::new(a), Box::new(b)], WorkflowOptions::default()).unwrap_err();
    assert!(matches!(err, OrchestratorError::DuplicateAgent(AgentName::GA)));
}

#[test]
fn max_turns_cap_is_enforced() {
    let opts = WorkflowOptions {
        max_turns: 3,
        ..WorkflowOptions::default()
    };
    let err = run_workflow(surrogate(Direction::Minimize, 3, 5, 0, PolicyKind::Scripted), &opts, &ControlHandle::new())
        .unwrap_err();
    assert!(matches!(err, OrchestratorError::MaxTurnsExceeded(3)));
}

#[cfg(unix)]
#[test]
fn stop_during_runs_cancels_unfinished_jobs() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let slow = dir.path().join("slow-sim");
    std::fs::write(&slow, "#!/bin/sh\nexec sleep 30\n").unwrap();
    std::fs::set_permissions(&slow, std::fs::Permissions::from_mode(0o755)).unwrap();
    let mut cfg = StudyConfig::new("slow", Backend::Simulation, Direction::Minimize, 2, 8);
    cfg.output_dir = Some(dir.path().to_path_buf());
    cfg.simulation.spawn_process = true;
    cfg.simulation.mocksim_path = Some(slow);
    let opts = WorkflowOptions::default();
    let agents = mada::orchestrator::standard_agents(&cfg, &opts).unwrap();
    let sched = agents.scheduler.clone().unwrap();
    let control = ControlHandle::new();
    let mut orch = Orchestrator::new(agents.agents, opts)
        .unwrap()
        .with_control(control.clone())
        .with_scheduler(sched.clone());
    let worker = thread::spawn(move || orch.run(cfg));
    wait_for("running jobs", || {
        sched.status_all().iter().filter(|r| r.state == JobState::Running).count() == 4
    });
    assert_eq!(control.view().unwrap().phase, Phase::RunsPending);
    let started = Instant::now();
    control.command(ExpertCommand::Stop).unwrap();
    let wf = worker.join().unwrap().unwrap();
    assert!(started.elapsed() < Duration::from_secs(20));
    let all = sched.status_all();
    assert_eq!(all.len(), 8);
    assert!(all.iter().all(|r| r.state == JobState::Cancelled), "{all:?}");
    assert!(sched.illegal_transitions().is_empty());
    assert_eq!(sched.nodes_in_use(), 0);
    assert_eq!(wf.study.stop_reason, Some(StopReason::ExpertStop));
    assert_eq!(wf.phases.last(), Some(&Phase::Done));
    assert!(is_legal_path(&wf.phases), "{:?}", wf.phases);
}

#[test]
fn slow_turns_time_out_and_escalate() {
    let opts = WorkflowOptions {
        turn_timeout_s: Some(0.0),
        ..WorkflowOptions::default()
    };
    let control = ControlHandle::new();
    let c2 = control.clone();
    let cfg = surrogate(Direction::Minimize, 1, 2, 0, PolicyKind::Scripted);
    let worker = thread::spawn(move || run_workflow(cfg, &opts, &c2));
    wait_for("escalation", || control.approval_pending());
    control.command(ExpertCommand::Stop).unwrap();
    let wf = worker.join().unwrap().unwrap();
    assert!(wf.history.messages()[0].summary.contains("exceeded"), "{}", wf.history.messages()[0].summary);
    assert_eq!(wf.phases[..3], [Phase::NeedMesh, Phase::NeedMesh, Phase::AwaitingExpert]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nominal_runs_walk_legal_paths_and_terminate(
        seed in 0u64..1000,
        maximize in any::<bool>(),
        trust in any::<bool>(),
        rounds in 1usize..5,
        per_round in 1usize..9,
    ) {
        let direction = if maximize { Direction::Maximize } else { Direction::Minimize };
        let policy = if trust { PolicyKind::TrustRegion } else { PolicyKind::Scripted };
        let cfg = surrogate(direction, rounds, per_round, seed, policy);
        let wf = run_workflow(cfg, &WorkflowOptions::default(), &ControlHandle::new()).unwrap();
        prop_assert!(is_nominal_path(&wf.phases));
        prop_assert!(is_legal_path(&wf.phases));
        prop_assert_eq!(wf.phases.last(), Some(&Phase::Done));
        prop_assert!(wf.turns <= mada::orchestrator::workflow::DEFAULT_MAX_TURNS);
        prop_assert_eq!(wf.study.evaluations, wf.study.rounds.len() * per_round);
        for pair in wf.history.messages().windows(2) {
            prop_assert!(pair[0].turn < pair[1].turn);
        }
    }
}

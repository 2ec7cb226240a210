//! The driver loop: analyze context, select a speaker, run its turn,
//! broadcast the result, and honour expert commands between turns.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::agents::{Agent, AgentError, DesignAgent, GeometryAgent, GeometryTask, JobAgent, JobBackend, TurnContext};
use super::context::{analyze_context, ContextOptions, ConversationHistory};
use super::control::{ControlHandle, Decision, RoundSummary, StudyView};
use super::phase::Phase;
use super::selector::{AgentName, RuleSelector, Selection, Selector};
use super::OrchestratorError;
use crate::design::{Backend, Study, StudyConfig, StudyResult, TraceEvent, TraceKind, TraceLog, Verdict};
use crate::geometry::geometry_server;
use crate::mcp::McpClient;
use crate::scheduler::{scheduler_server, Scheduler, SchedulerConfig};
use crate::sim::{register_mock_sim, sim_server, MOCKSIM_COMMAND};
use crate::surrogate::tools::surrogate_server;

pub const DEFAULT_MAX_TURNS: usize = 200;
pub const EXPERT: &str = "EXPERT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkflowOptions {
    pub max_turns: usize,
    pub context: ContextOptions,
    /// Wall limit per agent turn; a slower turn counts as a failure.
    pub turn_timeout_s: Option<f64>,
    pub geometry: GeometryTask,
    /// Run directories for the simulation backend; defaults under the
    /// study's output directory.
    pub staging_dir: Option<PathBuf>,
}

impl Default for WorkflowOptions {
    fn default() -> Self {
        Self {
            max_turns: DEFAULT_MAX_TURNS,
            context: ContextOptions::default(),
            turn_timeout_s: None,
            geometry: GeometryTask::default(),
            staging_dir: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WorkflowResult {
    pub study: StudyResult,
    pub history: ConversationHistory,
    /// Every phase the workflow passed through, starting with NeedMesh.
    pub phases: Vec<Phase>,
    pub turns: usize,
    pub trace: Vec<TraceEvent>,
}

impl WorkflowResult {
    pub fn turns_by(&self, speaker: AgentName) -> usize {
        let name = speaker.to_string();
        self.history.messages().iter().filter(|m| m.speaker == name).count()
    }
}

pub struct Orchestrator {
    agents: BTreeMap<AgentName, Box<dyn Agent>>,
    capabilities: BTreeMap<String, Vec<String>>,
    selector: Box<dyn Selector>,
    control: ControlHandle,
    scheduler: Option<Scheduler>,
    opts: WorkflowOptions,
}

impl std::fmt::Debug for Orchestrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Orchestrator")
            .field("agents", &self.agents.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Orchestrator {
    /// Registers agents after checking names are unique and every declared
    /// tool is offered by one of the agent's sessions.
    pub fn new(agents: Vec<Box<dyn Agent>>, opts: WorkflowOptions) -> Result<Self, OrchestratorError> {
        let mut map = BTreeMap::new();
        let mut capabilities = BTreeMap::new();
        for mut a in agents {
            let desc = a.descriptor().clone();
            if map.contains_key(&desc.name) {
                return Err(OrchestratorError::DuplicateAgent(desc.name));
            }
            if !desc.tools.is_empty() {
                let offered = a.session_tools()?;
                if let Some(t) = desc.tools.iter().find(|t| !offered.contains(t)) {
                    return Err(OrchestratorError::UnresolvedCapability {
                        agent: desc.name,
                        tool: t.clone(),
                    });
                }
            }
            capabilities.insert(desc.name.to_string(), desc.capabilities());
            map.insert(desc.name, a);
        }
        Ok(Self {
            agents: map,
            capabilities,
            selector: Box::new(RuleSelector),
            control: ControlHandle::new(),
            scheduler: None,
            opts,
        })
    }

    pub fn with_selector(mut self, selector: Box<dyn Selector>) -> Self {
        self.selector = selector;
        self
    }

    pub fn with_control(mut self, control: ControlHandle) -> Self {
        self.control = control;
        self
    }

    /// Scheduler whose unfinished jobs an expert stop cancels.
    pub fn with_scheduler(mut self, scheduler: Scheduler) -> Self {
        self.scheduler = Some(scheduler);
        self
    }

    pub fn control(&self) -> &ControlHandle {
        &self.control
    }

    pub fn registered(&self) -> Vec<AgentName> {
        self.agents.keys().copied().collect()
    }

    pub fn run(&mut self, config: StudyConfig) -> Result<WorkflowResult, OrchestratorError> {
        let mut trace = if config.output_dir.is_some() {
            TraceLog::create(&config.trace_path()).map_err(|e| OrchestratorError::Setup(e.to_string()))?
        } else {
            TraceLog::in_memory()
        };
        let control = self.control.clone();
        trace.set_observer(Arc::new(move |ev: &TraceEvent| control.hub().push(ev.clone())));
        let mut study = Study::new(config.clone(), trace)?;
        let pinned = serde_json::to_value(&config).unwrap_or(Value::Null);
        let mut d = Driver {
            history: ConversationHistory::new(),
            phases: vec![Phase::NeedMesh],
            turns: 0,
            results: None,
        };
        self.control.attach(d.view(&study, self.opts.max_turns), self.scheduler.clone());
        let out = self.drive(&mut study, &mut d, &pinned);
        let result = study.finish();
        self.control.publish(d.view(&study, self.opts.max_turns), round_summaries(&study));
        self.control.detach();
        out?;
        Ok(WorkflowResult {
            study: result?,
            history: d.history,
            phases: d.phases,
            turns: d.turns,
            trace: study.trace().events().to_vec(),
        })
    }

    fn drive(&mut self, study: &mut Study, d: &mut Driver, pinned: &Value) -> Result<(), OrchestratorError> {
        let registered = self.registered();
        let mut failures = 0;
        let mut escalated_from: Option<Phase> = None;
        loop {
            self.control.publish(d.view(study, self.opts.max_turns), round_summaries(study));
            if self.control.wait_while_paused() && d.phase() != Phase::Done {
                d.expert_stop(study, "expert stop")?;
                continue;
            }
            if let Some(space) = self.control.take_bounds() {
                let msg = format!("bounds set to {:?} .. {:?}", space.lower, space.upper);
                match study.apply_verdict(Verdict::Adjust {
                    lower: space.lower,
                    upper: space.upper,
                }) {
                    Ok(()) => d.say(study, EXPERT, &msg, json!({ "set_bounds": study.space() }), None)?,
                    Err(e) => tracing::warn!("set_bounds ignored: {e}"),
                }
            }
            let summary = analyze_context(
                &d.history,
                &self.capabilities,
                pinned,
                study.incumbent(),
                &self.opts.context,
            );
            match self.selector.select(&summary, d.phase(), &registered)? {
                Selection::Terminate => return Ok(()),
                Selection::Expert => {
                    self.control.publish(d.view(study, self.opts.max_turns), round_summaries(study));
                    match self.control.wait_decision() {
                        Decision::Approve => {
                            if study.awaiting_verdict() {
                                study.apply_verdict(Verdict::Continue)?;
                            }
                            let next = escalated_from.take().unwrap_or(Phase::NeedProposals);
                            failures = 0;
                            d.say(study, EXPERT, &format!("approved; resuming at {next}"), json!({}), Some(next))?;
                        }
                        Decision::Stop => d.expert_stop(study, "expert stop while awaiting approval")?,
                    }
                }
                Selection::Agent(name) => {
                    if d.turns >= self.opts.max_turns {
                        return Err(OrchestratorError::MaxTurnsExceeded(self.opts.max_turns));
                    }
                    d.turns += 1;
                    let phase = d.phase();
                    let agent = self.agents.get_mut(&name).expect("selector returns registered agents");
                    let started = Instant::now();
                    let mut ctx = TurnContext {
                        study,
                        summary: &summary,
                        results: &mut d.results,
                    };
                    let mut res = agent.turn(phase, &mut ctx);
                    if let Some(limit) = self.opts.turn_timeout_s {
                        if res.is_ok() && started.elapsed() > Duration::from_secs_f64(limit) {
                            if name == AgentName::JMA {
                                d.results = None;
                            }
                            res = Err(AgentError::TurnTimeout { agent: name, limit_s: limit });
                        }
                    }
                    match res {
                        Ok(out) => {
                            failures = 0;
                            d.say(study, &name.to_string(), &out.summary, out.payload, Some(out.next))?;
                        }
                        Err(e) => {
                            failures += 1;
                            let (text, next) = if failures >= 2 {
                                escalated_from = Some(phase);
                                failures = 0;
                                (format!("failed again: {e}; escalating to expert"), Phase::AwaitingExpert)
                            } else {
                                (format!("failed: {e}; retrying"), phase)
                            };
                            d.say(study, &name.to_string(), &text, json!({ "error": e.to_string() }), Some(next))?;
                        }
                    }
                }
            }
        }
    }
}

struct Driver {
    history: ConversationHistory,
    phases: Vec<Phase>,
    turns: usize,
    results: Option<Vec<Result<f64, String>>>,
}

impl Driver {
    fn phase(&self) -> Phase {
        *self.phases.last().unwrap()
    }

    /// Trace the turn, broadcast its summary, and move to `next`.
    fn say(
        &mut self,
        study: &mut Study,
        speaker: &str,
        summary: &str,
        payload: Value,
        next: Option<Phase>,
    ) -> Result<(), OrchestratorError> {
        let from = self.phase();
        let to = next.unwrap_or(from);
        let round = study.pending().map_or(study.rounds().len(), |p| p.round);
        let index = study.trace().events().len();
        let turn = self.history.len() + 1;
        let msg = self.history.push(speaker, summary, Some(index)).clone();
        study
            .trace_mut()
            .write(
                round,
                TraceKind::AgentTurn,
                json!({
                    "turn": turn,
                    "speaker": speaker,
                    "summary": msg.summary,
                    "from": from,
                    "to": to,
                    "payload": payload,
                }),
            )
            .map_err(|e| OrchestratorError::Setup(e.to_string()))?;
        if next.is_some() {
            self.phases.push(to);
        }
        Ok(())
    }

    fn expert_stop(&mut self, study: &mut Study, why: &str) -> Result<(), OrchestratorError> {
        if !study.is_finished() {
            study.apply_verdict(Verdict::Stop)?;
        }
        self.results = None;
        self.say(study, EXPERT, why, json!({}), Some(Phase::Done))
    }

    fn view(&self, study: &Study, _max_turns: usize) -> StudyView {
        let cfg = study.config();
        StudyView {
            name: cfg.name.clone(),
            direction: cfg.direction,
            backend: cfg.backend,
            phase: self.phase(),
            status: super::control::RunStatus::Running,
            incumbent: study.incumbent().cloned(),
            evaluations: study.evaluations(),
            rounds: study.rounds().len(),
            turns: self.turns,
            approval_pending: false,
            space: study.space().clone(),
            surrogate: (cfg.backend == Backend::Surrogate).then(|| cfg.surrogate.clone()),
        }
    }
}

fn round_summaries(study: &Study) -> Vec<RoundSummary> {
    let dir = study.config().direction;
    study
        .rounds()
        .iter()
        .map(|r| RoundSummary {
            index: r.index,
            best: r
                .candidates
                .iter()
                .filter_map(|c| c.objective)
                .reduce(|a, b| if dir.better(b, a) { b } else { a }),
            incumbent: r.incumbent.as_ref().and_then(|c| c.objective),
            n_candidates: r.candidates.len(),
            failed: r.candidates.iter().filter(|c| c.objective.is_none()).count(),
            note: r.note.clone(),
        })
        .collect()
}

/// The default GA/JMA/IDA trio wired to in-process tool servers.
pub struct StandardAgents {
    pub agents: Vec<Box<dyn Agent>>,
    /// Present for the simulation backend.
    pub scheduler: Option<Scheduler>,
}

impl std::fmt::Debug for StandardAgents {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StandardAgents").field("agents", &self.agents.len()).finish()
    }
}

fn connect(server: crate::mcp::McpServer, who: AgentName) -> Result<McpClient, OrchestratorError> {
    McpClient::connect_local(Arc::new(server), &who.to_string()).map_err(|e| OrchestratorError::Setup(e.to_string()))
}

pub fn standard_agents(config: &StudyConfig, opts: &WorkflowOptions) -> Result<StandardAgents, OrchestratorError> {
    let ga = GeometryAgent::new(connect(geometry_server(), AgentName::GA)?, opts.geometry.clone());
    let (backend, scheduler) = match config.backend {
        Backend::Surrogate => (
            JobBackend::Surrogate {
                client: connect(surrogate_server(config.surrogate.clone()), AgentName::JMA)?,
                direction: config.direction,
            },
            None,
        ),
        Backend::Simulation => {
            let s = &config.simulation;
            let sched = Scheduler::new(SchedulerConfig::new(s.nodes, s.cores_per_node));
            let command = if s.spawn_process {
                Some(s.mocksim_path.clone().unwrap_or_else(|| PathBuf::from(MOCKSIM_COMMAND)))
            } else {
                register_mock_sim(&sched);
                None
            };
            let staging_dir = opts
                .staging_dir
                .clone()
                .unwrap_or_else(|| config.output_dir().join(format!("{}_runs", config.name)));
            (
                JobBackend::Simulation {
                    sim: connect(sim_server(), AgentName::JMA)?,
                    scheduler: connect(scheduler_server(sched.clone()), AgentName::JMA)?,
                    staging_dir,
                    time_limit_s: s.time_limit_s,
                    qoi: s.qoi.clone(),
                    command,
                },
                Some(sched),
            )
        }
    };
    Ok(StandardAgents {
        agents: vec![
            Box::new(ga),
            Box::new(JobAgent::new(backend)),
            Box::new(DesignAgent::default()),
        ],
        scheduler,
    })
}

/// Run a study through the standard agents with the rule selector.
pub fn run_workflow(
    config: StudyConfig,
    opts: &WorkflowOptions,
    control: &ControlHandle,
) -> Result<WorkflowResult, OrchestratorError> {
    let std_agents = standard_agents(&config, opts)?;
    let mut orch = Orchestrator::new(std_agents.agents, opts.clone())?.with_control(control.clone());
    if let Some(s) = std_agents.scheduler {
        orch = orch.with_scheduler(s);
    }
    orch.run(config)
}

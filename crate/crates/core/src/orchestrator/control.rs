//! Expert control surface shared by the workflow driver and the HTTP API:
//! a command inbox, the latest study snapshot, and the trace event fan-out.

use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::watch;

use super::phase::Phase;
use crate::design::{Backend, Candidate, DesignSpace, Direction, TraceEvent};
use crate::scheduler::Scheduler;
use crate::surrogate::SurrogateConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExpertCommand {
    Pause,
    Resume,
    Stop,
    ApproveRound,
    SetBounds { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("no active study")]
    NoActiveStudy,
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("no round is waiting for approval")]
    NoPendingApproval,
}

impl ControlError {
    pub fn code(&self) -> &'static str {
        match self {
            ControlError::NoActiveStudy => "no_active_study",
            ControlError::InvalidBounds(_) => "invalid_bounds",
            ControlError::NoPendingApproval => "no_pending_approval",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Paused,
    AwaitingExpert,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub index: usize,
    pub best: Option<f64>,
    pub incumbent: Option<f64>,
    pub n_candidates: usize,
    pub failed: usize,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyView {
    pub name: String,
    pub direction: Direction,
    pub backend: Backend,
    pub phase: Phase,
    pub status: RunStatus,
    pub incumbent: Option<Candidate>,
    pub evaluations: usize,
    pub rounds: usize,
    pub turns: usize,
    pub approval_pending: bool,
    pub space: DesignSpace,
    #[serde(skip)]
    pub surrogate: Option<SurrogateConfig>,
}

/// Expert decision at an AwaitingExpert boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Approve,
    Stop,
}

#[derive(Default)]
struct ControlState {
    active: bool,
    paused: bool,
    stop: bool,
    awaiting: bool,
    approved: bool,
    bounds: Option<DesignSpace>,
    base_space: Option<DesignSpace>,
    scheduler: Option<Scheduler>,
    view: Option<StudyView>,
    rounds: Vec<RoundSummary>,
}

/// Append-only trace mirror with a change counter subscribers can await.
pub struct EventHub {
    log: Mutex<Vec<TraceEvent>>,
    count: watch::Sender<usize>,
}

impl EventHub {
    fn new() -> Self {
        Self {
            log: Mutex::new(Vec::new()),
            count: watch::channel(0).0,
        }
    }

    pub fn push(&self, ev: TraceEvent) {
        let mut log = self.log.lock().unwrap();
        log.push(ev);
        self.count.send_replace(log.len());
    }

    pub fn get(&self, index: usize) -> Option<TraceEvent> {
        self.log.lock().unwrap().get(index).cloned()
    }

    pub fn len(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn page(&self, offset: usize, limit: usize) -> Vec<TraceEvent> {
        let log = self.log.lock().unwrap();
        log.iter().skip(offset).take(limit).cloned().collect()
    }

    pub fn subscribe(&self) -> watch::Receiver<usize> {
        self.count.subscribe()
    }

    fn clear(&self) {
        self.log.lock().unwrap().clear();
        self.count.send_replace(0);
    }
}

struct Shared {
    state: Mutex<ControlState>,
    cv: Condvar,
    hub: EventHub,
}

/// Cheap to clone; all clones address the same study.
#[derive(Clone)]
pub struct ControlHandle {
    inner: Arc<Shared>,
}

impl Default for ControlHandle {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for ControlHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let st = self.inner.state.lock().unwrap();
        f.debug_struct("ControlHandle")
            .field("active", &st.active)
            .field("paused", &st.paused)
            .field("stop", &st.stop)
            .finish()
    }
}

impl ControlHandle {
    pub fn new() -> Self {
        Self {
            inner: Arc::new(Shared {
                state: Mutex::new(ControlState::default()),
                cv: Condvar::new(),
                hub: EventHub::new(),
            }),
        }
    }

    pub fn hub(&self) -> &EventHub {
        &self.inner.hub
    }

    /// Latest snapshot; kept after the study ends.
    pub fn view(&self) -> Option<StudyView> {
        self.inner.state.lock().unwrap().view.clone()
    }

    pub fn rounds(&self) -> Vec<RoundSummary> {
        self.inner.state.lock().unwrap().rounds.clone()
    }

    pub fn is_active(&self) -> bool {
        self.inner.state.lock().unwrap().active
    }

    pub fn command(&self, cmd: ExpertCommand) -> Result<Value, ControlError> {
        let mut st = self.inner.state.lock().unwrap();
        if !st.active {
            return Err(ControlError::NoActiveStudy);
        }
        match &cmd {
            ExpertCommand::Pause => st.paused = true,
            ExpertCommand::Resume => st.paused = false,
            ExpertCommand::ApproveRound => {
                if !st.awaiting {
                    return Err(ControlError::NoPendingApproval);
                }
                st.approved = true;
            }
            ExpertCommand::SetBounds { lower, upper } => {
                let base = st.base_space.clone().ok_or(ControlError::NoActiveStudy)?;
                let space = DesignSpace {
                    names: base.names.clone(),
                    lower: lower.clone(),
                    upper: upper.clone(),
                };
                space.validate().map_err(ControlError::InvalidBounds)?;
                if (0..space.dim()).any(|i| space.lower[i] < base.lower[i] || space.upper[i] > base.upper[i]) {
                    return Err(ControlError::InvalidBounds(
                        "bounds must stay inside the original design space".into(),
                    ));
                }
                st.bounds = Some(space);
            }
            ExpertCommand::Stop => {
                st.stop = true;
                st.paused = false;
                let sched = st.scheduler.clone();
                drop(st);
                self.inner.cv.notify_all();
                if let Some(s) = sched {
                    cancel_unfinished(&s);
                }
                return Ok(ack(&cmd));
            }
        }
        let paused = st.paused;
        if let Some(v) = st.view.as_mut() {
            v.status = status_of(v.phase, paused);
        }
        drop(st);
        self.inner.cv.notify_all();
        Ok(ack(&cmd))
    }

    pub(crate) fn attach(&self, view: StudyView, scheduler: Option<Scheduler>) {
        self.inner.hub.clear();
        let mut st = self.inner.state.lock().unwrap();
        *st = ControlState {
            active: true,
            base_space: Some(view.space.clone()),
            view: Some(view),
            scheduler,
            ..ControlState::default()
        };
    }

    pub(crate) fn detach(&self) {
        let mut st = self.inner.state.lock().unwrap();
        st.active = false;
        st.awaiting = false;
        if let Some(v) = st.view.as_mut() {
            v.status = RunStatus::Done;
            v.approval_pending = false;
        }
        drop(st);
        self.inner.cv.notify_all();
    }

    pub(crate) fn publish(&self, mut view: StudyView, rounds: Vec<RoundSummary>) {
        let mut st = self.inner.state.lock().unwrap();
        view.status = status_of(view.phase, st.paused);
        view.approval_pending = st.awaiting;
        st.view = Some(view);
        st.rounds = rounds;
    }

    pub fn stop_requested(&self) -> bool {
        self.inner.state.lock().unwrap().stop
    }

    /// Blocks while paused. Returns true when a stop is pending.
    pub(crate) fn wait_while_paused(&self) -> bool {
        let mut st = self.inner.state.lock().unwrap();
        while st.paused && !st.stop {
            st = self.inner.cv.wait(st).unwrap();
        }
        st.stop
    }

    pub(crate) fn take_bounds(&self) -> Option<DesignSpace> {
        self.inner.state.lock().unwrap().bounds.take()
    }

    /// Blocks at an expert boundary until approve or stop arrives.
    pub(crate) fn wait_decision(&self) -> Decision {
        let mut st = self.inner.state.lock().unwrap();
        st.awaiting = true;
        st.approved = false;
        if let Some(v) = st.view.as_mut() {
            v.approval_pending = true;
            v.status = RunStatus::AwaitingExpert;
        }
        while !st.approved && !st.stop {
            st = self.inner.cv.wait(st).unwrap();
        }
        st.awaiting = false;
        if let Some(v) = st.view.as_mut() {
            v.approval_pending = false;
        }
        if st.stop {
            Decision::Stop
        } else {
            st.approved = false;
            Decision::Approve
        }
    }

    /// Whether the driver is blocked at an expert boundary.
    pub fn approval_pending(&self) -> bool {
        self.inner.state.lock().unwrap().awaiting
    }
}

fn status_of(phase: Phase, paused: bool) -> RunStatus {
    match phase {
        Phase::Done => RunStatus::Done,
        Phase::AwaitingExpert => RunStatus::AwaitingExpert,
        _ if paused => RunStatus::Paused,
        _ => RunStatus::Running,
    }
}

fn ack(cmd: &ExpertCommand) -> Value {
    json!({ "ack": true, "command": cmd })
}

fn cancel_unfinished(s: &Scheduler) {
    for rec in s.status_all() {
        if !rec.state.is_terminal() {
            if let Err(e) = s.cancel_job(rec.job_id) {
                tracing::warn!("cancel {}: {e}", rec.job_id);
            }
        }
    }
}

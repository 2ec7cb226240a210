//! The scheduler service: admission, FIFO-with-skip-over dispatch, payload
//! execution, and terminal-state bookkeeping.
//!
//! All state transitions happen under one mutex, so snapshots are always
//! point-in-time consistent. Each running job owns a runner thread that
//! supervises its payload and enforces the time limit against the injected
//! clock.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fs::{self, File};
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::clock::{Clock, SystemClock};
use super::model::{ClusterModel, JobId, JobRecord, JobState, ResourceSpec, RunDescription};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SchedulerError {
    #[error("job needs {requested} nodes but the cluster has {available}")]
    UnsatisfiableResources { requested: u32, available: u32 },
    #[error("invalid resource spec: {0}")]
    InvalidSpec(String),
    #[error("job {0} not found")]
    JobNotFound(JobId),
    #[error("timed out waiting for jobs")]
    WaitTimeout,
}

/// Execution context handed to in-process payloads.
pub struct JobContext {
    pub job_id: JobId,
    pub args: Vec<String>,
    pub working_dir: PathBuf,
    pub stdout: File,
    pub stderr: File,
    stop: Arc<AtomicBool>,
}

impl JobContext {
    /// Cooperative stop signal, raised on cancel or timeout.
    pub fn should_stop(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }
}

/// In-process payload; returns the exit code.
pub type Callable = Arc<dyn Fn(&mut JobContext) -> i32 + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub seq: u64,
    pub job_id: JobId,
    pub from: Option<JobState>,
    pub to: JobState,
    pub ts: f64,
}

/// Dispatch-time evidence for the FIFO property: the jobs still queued ahead
/// of a job when it started, and the free node count at that instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartEvent {
    pub job_id: JobId,
    pub nodes: u32,
    pub free_before: u32,
    pub ahead: Vec<(JobId, u32)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchSubmission {
    pub accepted: Vec<AcceptedRun>,
    pub rejected: Vec<RejectedRun>,
}

impl BatchSubmission {
    pub fn job_ids(&self) -> Vec<JobId> {
        self.accepted.iter().map(|a| a.job_id).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptedRun {
    pub run_id: String,
    pub job_id: JobId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedRun {
    pub run_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: String,
    pub job_id: JobId,
    pub state: JobState,
    pub duration_s: Option<f64>,
    pub exit_code: Option<i32>,
    pub stdout_path: PathBuf,
    pub stderr_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionSummary {
    pub runs: Vec<RunOutcome>,
    pub rejected: Vec<RejectedRun>,
    pub nonzero_exits: usize,
    pub text: String,
}

impl ExecutionSummary {
    pub fn count(&self, state: JobState) -> usize {
        self.runs.iter().filter(|r| r.state == state).count()
    }
}

#[derive(Clone, Debug)]
pub struct SchedulerConfig {
    pub cluster: ClusterModel,
    /// Used when a job spec leaves `working_dir` empty.
    pub default_workdir: PathBuf,
    /// Supervision poll period for running payloads.
    pub poll_interval: Duration,
}

impl SchedulerConfig {
    pub fn new(nodes: u32, cores_per_node: u32) -> Self {
        Self {
            cluster: ClusterModel {
                node_count: nodes,
                cores_per_node,
            },
            default_workdir: std::env::temp_dir().join("mada-jobs"),
            poll_interval: Duration::from_millis(2),
        }
    }
}

struct JobEntry {
    record: JobRecord,
    stop: Arc<AtomicBool>,
    cancel_requested: bool,
    nodes_held: Vec<usize>,
}

struct State {
    next_id: u64,
    jobs: BTreeMap<JobId, JobEntry>,
    queue: VecDeque<JobId>,
    node_owner: Vec<Option<JobId>>,
    peak_nodes: u32,
    transitions: Vec<Transition>,
    starts: Vec<StartEvent>,
    illegal: Vec<String>,
}

impl State {
    fn free_nodes(&self) -> u32 {
        self.node_owner.iter().filter(|o| o.is_none()).count() as u32
    }

    fn busy_nodes(&self) -> u32 {
        self.node_owner.len() as u32 - self.free_nodes()
    }

    fn transition(&mut self, id: JobId, to: JobState, ts: f64) {
        let seq = self.transitions.len() as u64;
        let entry = self.jobs.get_mut(&id).expect("job exists");
        let from = entry.record.state;
        if !from.can_transition_to(to) {
            self.illegal.push(format!("{id}: {from} -> {to}"));
            return;
        }
        entry.record.state = to;
        match to {
            JobState::Running => entry.record.start_ts = Some(ts),
            s if s.is_terminal() => entry.record.end_ts = Some(ts),
            _ => {}
        }
        self.transitions.push(Transition {
            seq,
            job_id: id,
            from: Some(from),
            to,
            ts,
        });
    }
}

struct Inner {
    config: SchedulerConfig,
    clock: Arc<dyn Clock>,
    callables: RwLock<HashMap<String, Callable>>,
    state: Mutex<State>,
    changed: Condvar,
}

/// Shared handle; clones refer to the same scheduler.
#[derive(Clone)]
pub struct Scheduler {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Scheduler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scheduler")
            .field("cluster", &self.inner.config.cluster)
            .finish()
    }
}

impl Scheduler {
    pub fn new(config: SchedulerConfig) -> Self {
        Self::with_clock(config, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(config: SchedulerConfig, clock: Arc<dyn Clock>) -> Self {
        let nodes = config.cluster.node_count as usize;
        Self {
            inner: Arc::new(Inner {
                config,
                clock,
                callables: RwLock::new(HashMap::new()),
                state: Mutex::new(State {
                    next_id: 1,
                    jobs: BTreeMap::new(),
                    queue: VecDeque::new(),
                    node_owner: vec![None; nodes],
                    peak_nodes: 0,
                    transitions: Vec::new(),
                    starts: Vec::new(),
                    illegal: Vec::new(),
                }),
                changed: Condvar::new(),
            }),
        }
    }

    pub fn cluster(&self) -> ClusterModel {
        self.inner.config.cluster
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        self.inner.clock.clone()
    }

    /// Payloads whose command equals `name` run in-process instead of spawning.
    pub fn register_callable<F>(&self, name: &str, f: F)
    where
        F: Fn(&mut JobContext) -> i32 + Send + Sync + 'static,
    {
        self.inner
            .callables
            .write()
            .unwrap()
            .insert(name.to_string(), Arc::new(f));
    }

    pub fn submit_job(&self, mut spec: ResourceSpec, payload: Vec<String>) -> Result<JobId, SchedulerError> {
        spec.validate().map_err(SchedulerError::InvalidSpec)?;
        if payload.is_empty() || payload[0].is_empty() {
            return Err(SchedulerError::InvalidSpec("payload command is empty".into()));
        }
        let available = self.inner.config.cluster.node_count;
        if spec.nodes > available {
            return Err(SchedulerError::UnsatisfiableResources {
                requested: spec.nodes,
                available,
            });
        }
        if spec.working_dir.as_os_str().is_empty() {
            spec.working_dir = self.inner.config.default_workdir.clone();
        }

        let mut st = self.inner.state.lock().unwrap();
        let id = JobId(st.next_id);
        st.next_id += 1;
        let now = self.inner.clock.now();
        let record = JobRecord {
            job_id: id,
            stdout_path: spec.working_dir.join(format!("{id}.out")),
            stderr_path: spec.working_dir.join(format!("{id}.err")),
            spec,
            payload,
            state: JobState::Submitted,
            submit_ts: now,
            start_ts: None,
            end_ts: None,
            exit_code: None,
        };
        st.jobs.insert(
            id,
            JobEntry {
                record,
                stop: Arc::new(AtomicBool::new(false)),
                cancel_requested: false,
                nodes_held: Vec::new(),
            },
        );
        let seq = st.transitions.len() as u64;
        st.transitions.push(Transition {
            seq,
            job_id: id,
            from: None,
            to: JobState::Submitted,
            ts: now,
        });
        st.transition(id, JobState::Pending, now);
        st.queue.push_back(id);
        self.dispatch(&mut st);
        drop(st);
        self.inner.changed.notify_all();
        Ok(id)
    }

    /// Submit every feasible run without waiting; infeasible runs are reported.
    pub fn submit_jobs_async(&self, runs: &[RunDescription]) -> BatchSubmission {
        let mut out = BatchSubmission::default();
        let mut seen = HashSet::new();
        for run in runs {
            if !seen.insert(run.run_id.as_str()) {
                out.rejected.push(RejectedRun {
                    run_id: run.run_id.clone(),
                    reason: "duplicate run_id in batch".into(),
                });
                continue;
            }
            if !run.deck_path.as_os_str().is_empty() && !run.deck_path.exists() {
                out.rejected.push(RejectedRun {
                    run_id: run.run_id.clone(),
                    reason: format!("deck {} does not exist", run.deck_path.display()),
                });
                continue;
            }
            let mut spec = run.resource.clone();
            if spec.working_dir.as_os_str().is_empty() {
                spec.working_dir = run.working_dir.clone();
            }
            match self.submit_job(spec, run.command.clone()) {
                Ok(job_id) => out.accepted.push(AcceptedRun {
                    run_id: run.run_id.clone(),
                    job_id,
                }),
                Err(e) => out.rejected.push(RejectedRun {
                    run_id: run.run_id.clone(),
                    reason: e.to_string(),
                }),
            }
        }
        out
    }

    /// Submit a batch and block until every accepted run is terminal.
    pub fn execute_generated_runs(&self, runs: &[RunDescription]) -> ExecutionSummary {
        let batch = self.submit_jobs_async(runs);
        let ids = batch.job_ids();
        self.wait_all(&ids, None).expect("unbounded wait cannot time out");
        let st = self.inner.state.lock().unwrap();
        let outcomes: Vec<RunOutcome> = batch
            .accepted
            .iter()
            .map(|a| {
                let r = &st.jobs[&a.job_id].record;
                RunOutcome {
                    run_id: a.run_id.clone(),
                    job_id: a.job_id,
                    state: r.state,
                    duration_s: r.start_ts.zip(r.end_ts).map(|(s, e)| e - s),
                    exit_code: r.exit_code,
                    stdout_path: r.stdout_path.clone(),
                    stderr_path: r.stderr_path.clone(),
                }
            })
            .collect();
        drop(st);
        let nonzero_exits = outcomes
            .iter()
            .filter(|o| o.exit_code.is_some_and(|c| c != 0))
            .count();
        let text = render_summary(&outcomes, &batch.rejected, nonzero_exits);
        ExecutionSummary {
            runs: outcomes,
            rejected: batch.rejected,
            nonzero_exits,
            text,
        }
    }

    pub fn status(&self, id: JobId) -> Result<JobRecord, SchedulerError> {
        let st = self.inner.state.lock().unwrap();
        st.jobs
            .get(&id)
            .map(|e| e.record.clone())
            .ok_or(SchedulerError::JobNotFound(id))
    }

    /// Point-in-time snapshot of every managed job, in id order.
    pub fn status_all(&self) -> Vec<JobRecord> {
        let st = self.inner.state.lock().unwrap();
        st.jobs.values().map(|e| e.record.clone()).collect()
    }

    /// Pending jobs are cancelled at once; running jobs after their payload
    /// stops (this call blocks until then); terminal jobs are left unchanged.
    pub fn cancel_job(&self, id: JobId) -> Result<JobState, SchedulerError> {
        let mut st = self.inner.state.lock().unwrap();
        let entry = st.jobs.get_mut(&id).ok_or(SchedulerError::JobNotFound(id))?;
        match entry.record.state {
            JobState::Pending | JobState::Submitted => {
                st.queue.retain(|q| *q != id);
                let now = self.inner.clock.now();
                st.transition(id, JobState::Cancelled, now);
                drop(st);
                self.inner.changed.notify_all();
                Ok(JobState::Cancelled)
            }
            JobState::Running => {
                entry.cancel_requested = true;
                entry.stop.store(true, Ordering::SeqCst);
                let st = self
                    .inner
                    .changed
                    .wait_while(st, |s| !s.jobs[&id].record.state.is_terminal())
                    .unwrap();
                Ok(st.jobs[&id].record.state)
            }
            terminal => Ok(terminal),
        }
    }

    /// Wait until all `ids` are terminal. `None` waits indefinitely.
    pub fn wait_all(&self, ids: &[JobId], timeout: Option<Duration>) -> Result<(), SchedulerError> {
        let st = self.inner.state.lock().unwrap();
        for id in ids {
            if !st.jobs.contains_key(id) {
                return Err(SchedulerError::JobNotFound(*id));
            }
        }
        let done = |s: &mut State| ids.iter().all(|id| s.jobs[id].record.state.is_terminal());
        match timeout {
            None => {
                let _g = self.inner.changed.wait_while(st, |s| !done(s)).unwrap();
                Ok(())
            }
            Some(t) => {
                let (_g, res) = self
                    .inner
                    .changed
                    .wait_timeout_while(st, t, |s| !done(s))
                    .unwrap();
                if res.timed_out() {
                    Err(SchedulerError::WaitTimeout)
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Every state change so far, in linearization order.
    pub fn transitions(&self) -> Vec<Transition> {
        self.inner.state.lock().unwrap().transitions.clone()
    }

    pub fn start_events(&self) -> Vec<StartEvent> {
        self.inner.state.lock().unwrap().starts.clone()
    }

    /// Transitions that were refused as illegal; expected to stay empty.
    pub fn illegal_transitions(&self) -> Vec<String> {
        self.inner.state.lock().unwrap().illegal.clone()
    }

    /// Highest number of simultaneously allocated nodes observed.
    pub fn peak_nodes_in_use(&self) -> u32 {
        self.inner.state.lock().unwrap().peak_nodes
    }

    pub fn nodes_in_use(&self) -> u32 {
        self.inner.state.lock().unwrap().busy_nodes()
    }

    /// Start every queued job that fits, in queue order. A job that does not
    /// fit is skipped over but keeps its place.
    fn dispatch(&self, st: &mut State) {
        let mut i = 0;
        while i < st.queue.len() {
            let id = st.queue[i];
            let need = st.jobs[&id].record.spec.nodes;
            let free = st.free_nodes();
            if need > free {
                i += 1;
                continue;
            }
            let ahead: Vec<(JobId, u32)> = st
                .queue
                .iter()
                .take(i)
                .map(|q| (*q, st.jobs[q].record.spec.nodes))
                .collect();
            st.queue.remove(i);
            let mut held = Vec::with_capacity(need as usize);
            for (n, owner) in st.node_owner.iter_mut().enumerate() {
                if held.len() == need as usize {
                    break;
                }
                if owner.is_none() {
                    *owner = Some(id);
                    held.push(n);
                }
            }
            st.starts.push(StartEvent {
                job_id: id,
                nodes: need,
                free_before: free,
                ahead,
            });
            let now = self.inner.clock.now();
            st.transition(id, JobState::Running, now);
            st.peak_nodes = st.peak_nodes.max(st.busy_nodes());
            let entry = st.jobs.get_mut(&id).unwrap();
            entry.nodes_held = held;
            let record = entry.record.clone();
            let stop = entry.stop.clone();
            let sched = self.clone();
            std::thread::Builder::new()
                .name(format!("{id}"))
                .spawn(move || sched.run_job(record, stop))
                .expect("spawn job runner");
        }
    }

    fn run_job(&self, record: JobRecord, stop: Arc<AtomicBool>) {
        let (exit_code, timed_out) = match self.execute_payload(&record, &stop) {
            Ok(r) => r,
            Err(msg) => {
                if let Ok(mut f) = File::create(&record.stderr_path) {
                    let _ = writeln!(f, "{msg}");
                }
                (-1, false)
            }
        };
        let mut st = self.inner.state.lock().unwrap();
        let entry = st.jobs.get_mut(&record.job_id).unwrap();
        let cancelled = entry.cancel_requested;
        entry.record.exit_code = Some(exit_code);
        let held = std::mem::take(&mut entry.nodes_held);
        for n in held {
            st.node_owner[n] = None;
        }
        let to = if cancelled {
            JobState::Cancelled
        } else if timed_out {
            JobState::Timeout
        } else if exit_code == 0 {
            JobState::Completed
        } else {
            JobState::Failed
        };
        let now = self.inner.clock.now();
        st.transition(record.job_id, to, now);
        self.dispatch(&mut st);
        drop(st);
        self.inner.changed.notify_all();
    }

    /// Returns (exit code, whether the time limit fired).
    fn execute_payload(&self, record: &JobRecord, stop: &Arc<AtomicBool>) -> Result<(i32, bool), String> {
        let wd = &record.spec.working_dir;
        fs::create_dir_all(wd).map_err(|e| format!("cannot create {}: {e}", wd.display()))?;
        let stdout = File::create(&record.stdout_path).map_err(|e| e.to_string())?;
        let stderr = File::create(&record.stderr_path).map_err(|e| e.to_string())?;
        let start = record.start_ts.unwrap_or_else(|| self.inner.clock.now());
        let limit = record.spec.time_limit_s;
        let poll = self.inner.config.poll_interval;
        let clock = self.inner.clock.clone();
        let expired = move || clock.now() - start >= limit;

        let callable = self.inner.callables.read().unwrap().get(&record.payload[0]).cloned();
        if let Some(callable) = callable {
            let mut ctx = JobContext {
                job_id: record.job_id,
                args: record.payload[1..].to_vec(),
                working_dir: wd.clone(),
                stdout,
                stderr,
                stop: stop.clone(),
            };
            let (tx, rx) = mpsc::channel();
            std::thread::spawn(move || {
                let code = callable(&mut ctx);
                let _ = tx.send(code);
            });
            let mut timed_out = false;
            loop {
                match rx.recv_timeout(poll) {
                    Ok(code) => return Ok((code, timed_out)),
                    Err(mpsc::RecvTimeoutError::Disconnected) => {
                        return Ok((-1, timed_out));
                    }
                    Err(mpsc::RecvTimeoutError::Timeout) => {
                        if !timed_out && !stop.load(Ordering::SeqCst) && expired() {
                            timed_out = true;
                            stop.store(true, Ordering::SeqCst);
                        }
                    }
                }
            }
        }

        let mut child = Command::new(&record.payload[0])
            .args(&record.payload[1..])
            .current_dir(wd)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .spawn()
            .map_err(|e| format!("cannot spawn '{}': {e}", record.payload[0]))?;
        loop {
            if let Some(status) = child.try_wait().map_err(|e| e.to_string())? {
                return Ok((status.code().unwrap_or(-1), false));
            }
            let timed_out = expired();
            if timed_out || stop.load(Ordering::SeqCst) {
                let _ = child.kill();
                let status = child.wait().map_err(|e| e.to_string())?;
                return Ok((status.code().unwrap_or(-1), timed_out));
            }
            std::thread::sleep(poll);
        }
    }
}

fn render_summary(outcomes: &[RunOutcome], rejected: &[RejectedRun], nonzero: usize) -> String {
    let mut text = String::new();
    for o in outcomes {
        let dur = o.duration_s.map_or("-".to_string(), |d| format!("{d:.3}s"));
        text.push_str(&format!(
            "{} {} {} duration={} exit={} out={} err={}\n",
            o.run_id,
            o.job_id,
            o.state,
            dur,
            o.exit_code.map_or("-".to_string(), |c| c.to_string()),
            o.stdout_path.display(),
            o.stderr_path.display(),
        ));
    }
    for r in rejected {
        text.push_str(&format!("{} rejected: {}\n", r.run_id, r.reason));
    }
    let count = |s: JobState| outcomes.iter().filter(|o| o.state == s).count();
    text.push_str(&format!(
        "{} runs: {} completed, {} failed, {} timeout, {} cancelled, {} rejected; nonzero exits: {}",
        outcomes.len() + rejected.len(),
        count(JobState::Completed),
        count(JobState::Failed),
        count(JobState::Timeout),
        count(JobState::Cancelled),
        rejected.len(),
        nonzero,
    ));
    text
}

/// Writes `text` into the job's stdout, ignoring I/O errors.
pub fn log_line(ctx: &mut JobContext, text: &str) {
    let _ = writeln!(ctx.stdout, "{text}");
}

//! Append-only reasoning trace and its replay.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::model::{Candidate, Round};
use super::space::Direction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    RoundStart,
    CandidateEvaluated,
    RoundComplete,
    ExpertAction,
    /// One orchestrated agent turn; ignored by replay.
    AgentTurn,
    StudyEnd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub ts: f64,
    pub round: usize,
    pub kind: TraceKind,
    pub payload: Value,
}

pub type TraceObserver = Arc<dyn Fn(&TraceEvent) + Send + Sync>;

/// Trace sink: keeps every event in memory and optionally appends each one
/// to a JSONL file as it happens.
#[derive(Default)]
pub struct TraceLog {
    file: Option<File>,
    events: Vec<TraceEvent>,
    observer: Option<TraceObserver>,
}

impl std::fmt::Debug for TraceLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceLog").field("events", &self.events.len()).finish()
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl TraceLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Truncates any existing file at `path`.
    pub fn create(path: &Path) -> io::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        Ok(Self {
            file: Some(file),
            ..Self::default()
        })
    }

    pub fn set_observer(&mut self, obs: TraceObserver) {
        self.observer = Some(obs);
    }

    pub fn write(&mut self, round: usize, kind: TraceKind, payload: Value) -> io::Result<()> {
        let ev = TraceEvent {
            ts: now(),
            round,
            kind,
            payload,
        };
        if let Some(f) = self.file.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&ev)?)?;
            f.flush()?;
        }
        if let Some(obs) = &self.observer {
            obs(&ev);
        }
        self.events.push(ev);
        Ok(())
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }
}

pub fn read_trace(path: &Path) -> io::Result<Vec<TraceEvent>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(ev);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RoundsExhausted,
    Converged,
    ExpertStop,
    PolicyFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub name: String,
    pub direction: Direction,
    pub rounds: Vec<Round>,
    pub incumbent: Option<Candidate>,
    pub evaluations: usize,
    pub stop_reason: Option<StopReason>,
}

impl StudyResult {
    /// Incumbent objective after each round.
    pub fn incumbent_history(&self) -> Vec<Option<f64>> {
        self.rounds
            .iter()
            .map(|r| r.incumbent.as_ref().and_then(|c| c.objective))
            .collect()
    }

    /// `(eval_index, best objective so far)` over successful evaluations.
    pub fn convergence(&self) -> Vec<(usize, f64)> {
        let mut best: Option<f64> = None;
        let mut out = Vec::new();
        let mut all: Vec<&Candidate> = self.rounds.iter().flat_map(|r| &r.candidates).collect();
        all.sort_by_key(|c| c.eval_index);
        for c in all {
            if let Some(v) = c.objective {
                if best.is_none_or(|b| self.direction.better(v, b)) {
                    best = Some(v);
                }
            }
            if let Some(b) = best {
                out.push((c.eval_index, b));
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("trace event {index}: {reason}")]
    Malformed { index: usize, reason: String },
}

/// Rebuild a study result from its trace events alone.
pub fn replay(events: &[TraceEvent]) -> Result<StudyResult, ReplayError> {
    let bad = |index: usize, reason: String| ReplayError::Malformed { index, reason };
    let mut result = StudyResult {
        name: String::new(),
        direction: Direction::Minimize,
        rounds: Vec::new(),
        incumbent: None,
        evaluations: 0,
        stop_reason: None,
    };
    for (i, ev) in events.iter().enumerate() {
        match ev.kind {
            TraceKind::RoundStart => {
                if let Some(n) = ev.payload.get("study").and_then(Value::as_str) {
                    result.name = n.to_string();
                }
                if let Some(d) = ev.payload.get("direction") {
                    result.direction = serde_json::from_value(d.clone()).map_err(|e| bad(i, e.to_string()))?;
                }
                result.rounds.push(Round {
                    index: ev.round,
                    candidates: Vec::new(),
                    incumbent: result.incumbent.clone(),
                    note: ev.payload.get("note").and_then(Value::as_str).unwrap_or("").to_string(),
                });
            }
            TraceKind::CandidateEvaluated => {
                let c: Candidate = serde_json::from_value(ev.payload.clone()).map_err(|e| bad(i, e.to_string()))?;
                let round = result
                    .rounds
                    .last_mut()
                    .filter(|r| r.index == ev.round)
                    .ok_or_else(|| bad(i, "candidate outside its round".into()))?;
                round.candidates.push(c);
                result.evaluations += 1;
            }
            TraceKind::RoundComplete => {
                let inc: Option<Candidate> = serde_json::from_value(ev.payload.get("incumbent").cloned().unwrap_or(Value::Null))
                    .map_err(|e| bad(i, e.to_string()))?;
                let round = result
                    .rounds
                    .last_mut()
                    .filter(|r| r.index == ev.round)
                    .ok_or_else(|| bad(i, "round_complete without round_start".into()))?;
                round.incumbent = inc.clone();
                result.incumbent = inc;
            }
            TraceKind::ExpertAction | TraceKind::AgentTurn => {}
            TraceKind::StudyEnd => {
                result.stop_reason = ev
                    .payload
                    .get("stop_reason")
                    .cloned()
                    .map(serde_json::from_value)
                    .transpose()
                    .map_err(|e| bad(i, e.to_string()))?;
            }
        }
    }
    Ok(result)
}

/// Writes `run_id,eval_index,best_objective` rows.
pub fn write_convergence_csv<W: io::Write>(out: W, runs: &[(String, Vec<(usize, f64)>)]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "eval_index", "best_objective"])?;
    for (run_id, points) in runs {
        for (idx, best) in points {
            w.write_record([run_id.clone(), idx.to_string(), best.to_string()])?;
        }
    }
    w.flush()
}

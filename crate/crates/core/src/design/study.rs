//! Round-based study driver: propose, evaluate, rank, refine.
//!
//! The driver is stepwise so that an orchestrator can interleave other work
//! between proposing a round and recording its results; [`run_study`] wires
//! the steps together for standalone use.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::model::{rank_candidates, Candidate, Provenance, Round, StudyConfig};
use super::policy::{build_policy, Policy, PolicyError, ProposalContext};
use super::space::DesignSpace;
use super::trace::{StopReason, StudyResult, TraceKind, TraceLog};

/// Incumbent changes smaller than this count as no change.
pub const CONVERGENCE_TOL: f64 = 1e-9;
/// Consecutive unchanged rounds that end a study.
pub const CONVERGENCE_ROUNDS: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("invalid study config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("trace i/o: {0}")]
    Trace(#[from] std::io::Error),
    #[error("study is finished")]
    Finished,
    #[error("study is waiting for an expert verdict")]
    AwaitingVerdict,
    #[error("round {0} is still pending")]
    RoundPending(usize),
    #[error("no round is pending")]
    NoPendingRound,
    #[error("expected {expected} results, got {got}")]
    ResultCount { expected: usize, got: usize },
    #[error("bad verdict: {0}")]
    BadVerdict(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Verdict {
    Continue,
    Adjust { lower: Vec<f64>, upper: Vec<f64> },
    Inject { designs: Vec<Vec<f64>> },
    Stop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingRound {
    pub round: usize,
    pub note: String,
    /// `(eval_index, design, provenance)` for each slot in the round.
    pub batch: Vec<(usize, Vec<f64>, Provenance)>,
}

impl PendingRound {
    pub fn designs(&self) -> Vec<(usize, Vec<f64>)> {
        self.batch.iter().map(|(i, d, _)| (*i, d.clone())).collect()
    }
}

pub struct Study {
    config: StudyConfig,
    space: DesignSpace,
    policy: Box<dyn Policy>,
    trace: TraceLog,
    rounds: Vec<Round>,
    next_eval: usize,
    incumbent: Option<Candidate>,
    stable_rounds: usize,
    injected: Vec<Vec<f64>>,
    pending: Option<PendingRound>,
    awaiting: bool,
    stop: Option<StopReason>,
    ended: bool,
}

impl std::fmt::Debug for Study {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Study")
            .field("name", &self.config.name)
            .field("rounds", &self.rounds.len())
            .field("stop", &self.stop)
            .finish()
    }
}

impl Study {
    pub fn new(config: StudyConfig, trace: TraceLog) -> Result<Self, StudyError> {
        config.validate().map_err(StudyError::InvalidConfig)?;
        let policy = build_policy(&config)?;
        Self::with_policy(config, policy, trace)
    }

    pub fn with_policy(config: StudyConfig, policy: Box<dyn Policy>, trace: TraceLog) -> Result<Self, StudyError> {
        config.validate().map_err(StudyError::InvalidConfig)?;
        Ok(Self {
            space: config.resolved_space(),
            config,
            policy,
            trace,
            rounds: Vec::new(),
            next_eval: 0,
            incumbent: None,
            stable_rounds: 0,
            injected: Vec::new(),
            pending: None,
            awaiting: false,
            stop: None,
            ended: false,
        })
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn incumbent(&self) -> Option<&Candidate> {
        self.incumbent.as_ref()
    }

    pub fn evaluations(&self) -> usize {
        self.next_eval
    }

    pub fn trace(&self) -> &TraceLog {
        &self.trace
    }

    pub fn trace_mut(&mut self) -> &mut TraceLog {
        &mut self.trace
    }

    pub fn pending(&self) -> Option<&PendingRound> {
        self.pending.as_ref()
    }

    pub fn awaiting_verdict(&self) -> bool {
        self.awaiting
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn is_finished(&self) -> bool {
        self.stop.is_some()
    }

    pub fn propose(&mut self) -> Result<PendingRound, StudyError> {
        if self.stop.is_some() {
            return Err(StudyError::Finished);
        }
        if self.awaiting {
            return Err(StudyError::AwaitingVerdict);
        }
        if let Some(p) = &self.pending {
            return Err(StudyError::RoundPending(p.round));
        }
        let round = self.rounds.len() + 1;
        let n = self.config.samples_per_round;
        let mut injected: Vec<Vec<f64>> = std::mem::take(&mut self.injected);
        injected.truncate(n);
        let proposal = if injected.len() < n {
            let ctx = ProposalContext {
                round,
                n: n - injected.len(),
                space: &self.space,
                direction: self.config.direction,
                history: &self.rounds,
                incumbent: self.incumbent.as_ref(),
                seed: self.config.seed,
            };
            match self.policy.propose(&ctx) {
                Ok(p) => Some(p),
                Err(e) => {
                    self.stop = Some(StopReason::PolicyFailure);
                    return Err(e.into());
                }
            }
        } else {
            None
        };
        let mut batch = Vec::with_capacity(n);
        for d in &injected {
            batch.push((self.next_eval + batch.len(), self.space.clip(d), Provenance::Expert));
        }
        let mut note = String::new();
        if let Some(p) = proposal {
            note = p.note;
            for d in p.designs.into_iter().take(n - injected.len()) {
                batch.push((self.next_eval + batch.len(), self.space.clip(&d), p.provenance));
            }
        }
        if !injected.is_empty() {
            note = format!("{} expert design(s); {note}", injected.len());
        }
        let pending = PendingRound { round, note, batch };
        self.trace.write(
            round,
            TraceKind::RoundStart,
            json!({
                "study": self.config.name,
                "direction": self.config.direction,
                "policy": self.policy.name(),
                "note": pending.note,
                "space": self.space,
                "designs": pending.batch.iter().map(|b| &b.1).collect::<Vec<_>>(),
            }),
        )?;
        self.next_eval += pending.batch.len();
        self.pending = Some(pending.clone());
        Ok(pending)
    }

    /// Record one result per slot of the pending round, in slot order.
    pub fn record(&mut self, results: Vec<Result<f64, String>>) -> Result<&Round, StudyError> {
        let pending = self.pending.take().ok_or(StudyError::NoPendingRound)?;
        if results.len() != pending.batch.len() {
            let err = StudyError::ResultCount {
                expected: pending.batch.len(),
                got: results.len(),
            };
            self.pending = Some(pending);
            return Err(err);
        }
        let mut candidates = Vec::with_capacity(results.len());
        for ((eval_index, design, provenance), res) in pending.batch.into_iter().zip(results) {
            let (objective, error) = match res {
                Ok(v) if v.is_finite() => (Some(v), None),
                Ok(v) => (None, Some(format!("non-finite objective {v}"))),
                Err(e) => (None, Some(e)),
            };
            let c = Candidate {
                design,
                objective,
                round: pending.round,
                eval_index,
                provenance,
                error,
            };
            self.trace
                .write(pending.round, TraceKind::CandidateEvaluated, serde_json::to_value(&c).unwrap())?;
            candidates.push(c);
        }

        let previous = self.incumbent.as_ref().and_then(|c| c.objective);
        let mut pool: Vec<Candidate> = candidates.clone();
        if let Some(inc) = &self.incumbent {
            pool.push(inc.clone());
        }
        let ranked = rank_candidates(&pool, self.config.direction).expect("objectives filtered to finite");
        self.incumbent = ranked.into_iter().next();
        let current = self.incumbent.as_ref().and_then(|c| c.objective);
        match (previous, current) {
            (Some(a), Some(b)) if (a - b).abs() < CONVERGENCE_TOL => self.stable_rounds += 1,
            _ => self.stable_rounds = 0,
        }

        let best_in_round = rank_candidates(&candidates, self.config.direction)
            .expect("finite")
            .into_iter()
            .next();
        self.trace.write(
            pending.round,
            TraceKind::RoundComplete,
            json!({
                "incumbent": self.incumbent,
                "best_in_round": best_in_round,
                "failed": candidates.iter().filter(|c| c.objective.is_none()).count(),
                "note": pending.note,
            }),
        )?;
        self.rounds.push(Round {
            index: pending.round,
            candidates,
            incumbent: self.incumbent.clone(),
            note: pending.note,
        });

        if self.stable_rounds >= CONVERGENCE_ROUNDS {
            self.stop = Some(StopReason::Converged);
        } else if self.rounds.len() >= self.config.rounds {
            self.stop = Some(StopReason::RoundsExhausted);
        } else if self.config.approval_required {
            self.awaiting = true;
        }
        Ok(self.rounds.last().unwrap())
    }

    /// Apply an expert decision. `Continue` releases an approval gate;
    /// `Adjust` and `Inject` take effect from the next proposal.
    pub fn apply_verdict(&mut self, v: Verdict) -> Result<(), StudyError> {
        if self.stop.is_some() {
            return Err(StudyError::Finished);
        }
        match &v {
            Verdict::Continue => self.awaiting = false,
            Verdict::Stop => {
                self.stop = Some(StopReason::ExpertStop);
                self.awaiting = false;
            }
            Verdict::Adjust { lower, upper } => {
                let space = DesignSpace {
                    names: self.space.names.clone(),
                    lower: lower.clone(),
                    upper: upper.clone(),
                };
                space.validate().map_err(StudyError::BadVerdict)?;
                let orig = self.config.resolved_space();
                if (0..space.dim()).any(|i| space.lower[i] < orig.lower[i] || space.upper[i] > orig.upper[i]) {
                    return Err(StudyError::BadVerdict("bounds must stay inside the design space".into()));
                }
                self.space = space;
            }
            Verdict::Inject { designs } => {
                if let Some(d) = designs.iter().find(|d| d.len() != self.space.dim()) {
                    return Err(StudyError::BadVerdict(format!(
                        "design has {} values, expected {}",
                        d.len(),
                        self.space.dim()
                    )));
                }
                self.injected.extend(designs.iter().cloned());
            }
        }
        let round = self.rounds.len();
        self.trace
            .write(round, TraceKind::ExpertAction, serde_json::to_value(&v).unwrap())?;
        Ok(())
    }

    /// Emits the final trace event (once) and returns the result.
    pub fn finish(&mut self) -> Result<StudyResult, StudyError> {
        if !self.ended {
            self.stop.get_or_insert(StopReason::ExpertStop);
            self.ended = true;
            self.trace.write(
                self.rounds.len(),
                TraceKind::StudyEnd,
                json!({
                    "stop_reason": self.stop,
                    "incumbent": self.incumbent,
                    "evaluations": self.next_eval,
                }),
            )?;
        }
        Ok(self.result())
    }

    pub fn result(&self) -> StudyResult {
        StudyResult {
            name: self.config.name.clone(),
            direction: self.config.direction,
            rounds: self.rounds.clone(),
            incumbent: self.incumbent.clone(),
            evaluations: self.next_eval,
            stop_reason: self.stop,
        }
    }
}

/// Maps a batch of `(eval_index, design)` to objectives, one per entry.
pub trait Evaluator {
    fn evaluate(&mut self, batch: &[(usize, Vec<f64>)]) -> Vec<Result<f64, String>>;
}

impl<F> Evaluator for F
where
    F: FnMut(&[f64]) -> Result<f64, String>,
{
    fn evaluate(&mut self, batch: &[(usize, Vec<f64>)]) -> Vec<Result<f64, String>> {
        batch.iter().map(|(_, d)| self(d)).collect()
    }
}

/// Drive a study to completion. `verdicts` is consulted whenever the study
/// waits for approval, until it answers `Continue` or `Stop`.
pub fn run_study(
    study: &mut Study,
    evaluator: &mut dyn Evaluator,
    verdicts: &mut dyn FnMut(&Study) -> Verdict,
) -> Result<StudyResult, StudyError> {
    while !study.is_finished() {
        if study.awaiting_verdict() {
            let v = verdicts(study);
            study.apply_verdict(v)?;
            continue;
        }
        let pending = match study.propose() {
            Ok(p) => p,
            Err(StudyError::Policy(e)) => {
                tracing::warn!("study {} stopped: {e}", study.config().name);
                break;
            }
            Err(e) => return Err(e),
        };
        let results = evaluator.evaluate(&pending.designs());
        study.record(results)?;
    }
    study.finish()
}

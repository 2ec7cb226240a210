use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NeedMesh,
    NeedProposals,
    RunsPending,
    ResultsReady,
    AwaitingExpert,
    Done,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::NeedMesh,
        Phase::NeedProposals,
        Phase::RunsPending,
        Phase::ResultsReady,
        Phase::AwaitingExpert,
        Phase::Done,
    ];

    /// Phases in which an agent does work.
    pub fn is_active(self) -> bool {
        matches!(
            self,
            Phase::NeedMesh | Phase::NeedProposals | Phase::RunsPending | Phase::ResultsReady
        )
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::NeedMesh => "need_mesh",
            Phase::NeedProposals => "need_proposals",
            Phase::RunsPending => "runs_pending",
            Phase::ResultsReady => "results_ready",
            Phase::AwaitingExpert => "awaiting_expert",
            Phase::Done => "done",
        };
        f.write_str(s)
    }
}

/// Edges taken by a study that runs without failures or expert stops.
pub fn is_nominal_transition(from: Phase, to: Phase) -> bool {
    use Phase::*;
    matches!(
        (from, to),
        (NeedMesh, NeedProposals)
            | (NeedProposals, RunsPending)
            | (RunsPending, ResultsReady)
            | (ResultsReady, NeedProposals)
            | (ResultsReady, AwaitingExpert)
            | (ResultsReady, Done)
            | (AwaitingExpert, NeedProposals)
            | (AwaitingExpert, Done)
    )
}

/// Nominal edges plus the failure and stop paths: a failed turn keeps its
/// phase, a second failure escalates to the expert, the expert may resume
/// the escalated phase, and a stop ends the study from any phase.
pub fn is_legal_transition(from: Phase, to: Phase) -> bool {
    if is_nominal_transition(from, to) {
        return true;
    }
    match (from, to) {
        (Phase::Done, _) => false,
        (f, t) if f == t => f.is_active(),
        (f, Phase::AwaitingExpert) => f.is_active(),
        (_, Phase::Done) => true,
        (Phase::AwaitingExpert, t) => t.is_active(),
        _ => false,
    }
}

pub fn is_legal_path(phases: &[Phase]) -> bool {
    phases.windows(2).all(|w| is_legal_transition(w[0], w[1]))
}

pub fn is_nominal_path(phases: &[Phase]) -> bool {
    phases.windows(2).all(|w| is_nominal_transition(w[0], w[1]))
}

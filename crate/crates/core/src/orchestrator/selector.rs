use serde::{Deserialize, Serialize};

use super::context::ContextSummary;
use super::phase::Phase;
use super::OrchestratorError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentName {
    /// Geometry agent.
    GA,
    /// Job management agent.
    JMA,
    /// Inverse design agent.
    IDA,
}

impl std::fmt::Display for AgentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentName::GA => "GA",
            AgentName::JMA => "JMA",
            AgentName::IDA => "IDA",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    Agent(AgentName),
    /// The workflow waits for an expert decision.
    Expert,
    Terminate,
}

/// Chooses the next speaker. Model-driven choosers plug in here.
pub trait Selector: Send {
    fn select(
        &mut self,
        summary: &ContextSummary,
        phase: Phase,
        registered: &[AgentName],
    ) -> Result<Selection, OrchestratorError>;
}

/// Fixed phase-to-agent map.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleSelector;

impl Selector for RuleSelector {
    fn select(
        &mut self,
        summary: &ContextSummary,
        phase: Phase,
        registered: &[AgentName],
    ) -> Result<Selection, OrchestratorError> {
        select_next(summary, phase, registered)
    }
}

pub fn select_next(
    _summary: &ContextSummary,
    phase: Phase,
    registered: &[AgentName],
) -> Result<Selection, OrchestratorError> {
    let want = match phase {
        Phase::NeedMesh => AgentName::GA,
        Phase::NeedProposals | Phase::ResultsReady => AgentName::IDA,
        Phase::RunsPending => AgentName::JMA,
        Phase::AwaitingExpert => return Ok(Selection::Expert),
        Phase::Done => return Ok(Selection::Terminate),
    };
    if registered.contains(&want) {
        Ok(Selection::Agent(want))
    } else {
        Err(OrchestratorError::NoEligibleAgent { phase, agent: want })
    }
}

//! Coordination layer: agent registry, context analyzer, next-speaker
//! selection, broadcast of turn summaries, expert control, and the HTTP
//! control API.

pub mod agents;
pub mod api;
pub mod context;
pub mod control;
pub mod phase;
pub mod selector;
pub mod workflow;

pub use agents::{
    Agent, AgentDescriptor, AgentError, DesignAgent, GeometryAgent, GeometryTask, JobAgent, JobBackend, TurnContext,
    TurnOutput,
};
pub use api::{control_router, serve_control_api};
pub use context::{analyze_context, ContextOptions, ContextSummary, ConversationHistory, Message, MAX_SUMMARY_CHARS};
pub use control::{ControlError, ControlHandle, ExpertCommand, RoundSummary, RunStatus, StudyView};
pub use phase::{is_legal_path, is_legal_transition, is_nominal_path, is_nominal_transition, Phase};
pub use selector::{select_next, AgentName, RuleSelector, Selection, Selector};
pub use workflow::{run_workflow, standard_agents, Orchestrator, StandardAgents, WorkflowOptions, WorkflowResult};

use crate::design::StudyError;

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("no registered agent can act in phase {phase} (needs {agent})")]
    NoEligibleAgent { phase: Phase, agent: AgentName },
    #[error("workflow exceeded {0} turns")]
    MaxTurnsExceeded(usize),
    #[error("agent {0} registered twice")]
    DuplicateAgent(AgentName),
    #[error("agent {agent} declares tool {tool}, which none of its sessions offer")]
    UnresolvedCapability { agent: AgentName, tool: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("setup: {0}")]
    Setup(String),
}

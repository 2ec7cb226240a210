//! Design-exploration engine: sampling, round-based refinement with
//! pluggable proposers, reasoning traces, and a gradient baseline.

pub mod baseline;
pub mod evaluator;
pub mod lhs;
pub mod model;
pub mod policy;
pub mod space;
pub mod study;
pub mod trace;

pub use baseline::{baseline_multistart, minimize_projected, BaselineOptions, BaselineRun};
pub use evaluator::{SimulationEvaluator, SurrogateEvaluator};
pub use lhs::lhs_sample;
pub use model::{rank_candidates, Backend, Candidate, PolicyKind, Provenance, RankError, Round, SimulationSettings, StudyConfig};
pub use policy::{build_policy, ExternalPolicy, Policy, PolicyError, Proposal, ProposalContext, ScriptedPolicy, TrustRegionPolicy};
pub use space::{DesignSpace, Direction};
pub use study::{run_study, Evaluator, PendingRound, Study, StudyError, Verdict};
pub use trace::{read_trace, replay, write_convergence_csv, StopReason, StudyResult, TraceEvent, TraceKind, TraceLog};

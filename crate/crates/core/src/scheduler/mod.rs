//! Simulated batch scheduler: resource model, job state machine, and the
//! job-management tools served over MCP.
//!
//! Dispatch is FIFO with skip-over: a later job may start only when every
//! earlier queued job does not currently fit and the later one does.

pub mod clock;
pub mod engine;
pub mod model;
pub mod tools;

pub use clock::{Clock, SimClock, SystemClock};
pub use engine::{
    log_line, AcceptedRun, BatchSubmission, Callable, ExecutionSummary, JobContext, RejectedRun, RunOutcome, Scheduler,
    SchedulerConfig, SchedulerError, StartEvent, Transition,
};
pub use model::{ClusterModel, JobId, JobRecord, JobState, JobStatus, ResourceSpec, RunDescription};
pub use tools::scheduler_server;

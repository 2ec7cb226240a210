//! Desk-scale multi-agent design exploration.

pub mod mcp;
pub mod scheduler;
pub mod sim;
pub mod surrogate;
pub mod design;
pub mod geometry;
pub mod orchestrator;

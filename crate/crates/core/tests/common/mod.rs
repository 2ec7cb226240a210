//! Oracles and harnesses shared by the integration suites.
#![allow(dead_code)]

pub mod geometry;
pub mod lhs;
pub mod mcp;
pub mod sched;
pub mod sim;
pub mod surrogate;

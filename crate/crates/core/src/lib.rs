//! A deterministic SD-WAN control-plane laboratory.
//!
//! A fluid-level overlay simulator with class-based queuing (strict priority
//! plus weighted fair queuing with shapers) is driven by a central controller
//! that re-optimizes routing splits on a slow loop and per-link rate
//! allocations on a fast loop.

// `!(x > 0.0)` is how the validators reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod delay;
pub mod error;
pub mod experiment;
pub mod model;
pub mod qos;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod solver;
pub mod spr;

pub use error::{DelayError, ExperimentError, ModelError, QosError, ScenarioError, SolverError, SprError};

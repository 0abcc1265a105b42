//! Core building blocks for hybrid CPU/GPU serverless acceleration.
//!
//! The crate is organized around the lifecycle of an adaptive function:
//!
//! - [`analyzer`] inspects function source at deploy time and assigns an
//!   execution mode (`cpu`, `cpu_preferred`, `gpu_preferred`, `gpu`).
//! - [`telemetry`] keeps per-function sliding-window request metrics and the
//!   saved per-backend latencies the controller compares against.
//! - [`controller`] is the periodic reevaluation loop that promotes or
//!   demotes preferred-mode functions between CPU and GPU backends.
//! - [`sim`] is a deterministic discrete-event cluster simulator that stands
//!   in for a real orchestrator, so decisions are testable at desk scale.
//! - [`cost`] turns busy-time accounting into pay-per-use money totals.
//! - [`scenario`] parses the scenario file format the CLI consumes.

pub mod analyzer;
pub mod controller;
pub mod cost;
pub mod scenario;
pub mod sim;
pub mod telemetry;

pub use analyzer::ExecutionMode;
pub use telemetry::Backend;

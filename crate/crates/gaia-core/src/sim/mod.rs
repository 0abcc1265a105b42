//! Deterministic discrete-event simulation of a heterogeneous serverless
//! cluster: nodes, single-instance function deployments, request queues,
//! cold starts, and revision rollouts on mode switches.
//!
//! Time is simulated milliseconds; wall clock is never consulted. Identical
//! inputs (trace, configs, seed) produce a bit-identical result. The event
//! loop is single-threaded per scenario; independent scenarios may run in
//! parallel freely.

mod engine;

pub use engine::{run_trace, SimInputs};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::ExecutionMode;
use crate::telemetry::Backend;

/// GPU fitted to a node. At most one per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuSpec {
    pub model: String,
    pub vram_gb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub node_id: String,
    pub vcpus: u32,
    pub ram_gb: f64,
    pub gpu: Option<GpuSpec>,
}

impl NodeSpec {
    pub fn supports(&self, backend: Backend) -> bool {
        match backend {
            Backend::Cpu => true,
            Backend::Gpu => self.gpu.is_some(),
        }
    }
}

/// Service time as a function of the request parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServiceModel {
    /// Fixed duration.
    Constant { ms: f64 },
    /// `base_ms + per_unit_ms * parameter`.
    Linear { base_ms: f64, per_unit_ms: f64 },
    /// `coeff_ms * parameter^3 + intercept_ms` — the matrix-multiply shape.
    Cubic { coeff_ms: f64, intercept_ms: f64 },
}

impl ServiceModel {
    pub fn eval(&self, parameter: i64) -> f64 {
        let p = parameter as f64;
        match self {
            ServiceModel::Constant { ms } => *ms,
            ServiceModel::Linear {
                base_ms,
                per_unit_ms,
            } => base_ms + per_unit_ms * p,
            ServiceModel::Cubic {
                coeff_ms,
                intercept_ms,
            } => coeff_ms * p * p * p + intercept_ms,
        }
    }
}

/// Per-workload timing and resource profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadModel {
    pub cpu_service: ServiceModel,
    pub gpu_service: ServiceModel,
    #[serde(default = "default_cpu_cold_start_ms")]
    pub cpu_cold_start_ms: f64,
    #[serde(default = "default_gpu_cold_start_ms")]
    pub gpu_cold_start_ms: f64,
    pub cpu_cores_used: f64,
    pub ram_gb_used: f64,
    /// GPU utilization while serving on the GPU backend, percent.
    pub gpu_util_pct: f64,
    /// Seeded uniform service-time jitter, ± percent. Zero disables it.
    #[serde(default = "default_jitter_pct")]
    pub jitter_pct: f64,
    /// One request at a time (the default) or unbounded in-instance
    /// concurrency, matching serverless runtimes that do not cap requests.
    #[serde(default)]
    pub unbounded_concurrency: bool,
}

fn default_cpu_cold_start_ms() -> f64 {
    500.0
}

fn default_gpu_cold_start_ms() -> f64 {
    4000.0
}

fn default_jitter_pct() -> f64 {
    5.0
}

impl WorkloadModel {
    pub fn service(&self, backend: Backend) -> &ServiceModel {
        match backend {
            Backend::Cpu => &self.cpu_service,
            Backend::Gpu => &self.gpu_service,
        }
    }

    pub fn cold_start_ms(&self, backend: Backend) -> f64 {
        match backend {
            Backend::Cpu => self.cpu_cold_start_ms,
            Backend::Gpu => self.gpu_cold_start_ms,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cpu_cold_start_ms < 0.0 || self.gpu_cold_start_ms < 0.0 {
            return Err("cold start durations must be non-negative".into());
        }
        if self.gpu_cold_start_ms < self.cpu_cold_start_ms {
            return Err("gpu_cold_start_ms must be at least cpu_cold_start_ms".into());
        }
        if !(0.0..=100.0).contains(&self.gpu_util_pct) {
            return Err("gpu_util_pct must be within 0..=100".into());
        }
        if !(0.0..=100.0).contains(&self.jitter_pct) {
            return Err("jitter_pct must be within 0..=100".into());
        }
        Ok(())
    }
}

/// One request arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub at_ms: f64,
    pub function_id: String,
    pub parameter: i64,
}

/// Arrival-sorted request trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequestTrace(Vec<TraceEntry>);

impl RequestTrace {
    pub fn new(entries: Vec<TraceEntry>) -> Result<Self, SimError> {
        if entries.windows(2).any(|w| w[0].at_ms > w[1].at_ms) {
            return Err(SimError::UnsortedTrace);
        }
        Ok(RequestTrace(entries))
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A function's placement on the cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub function_id: String,
    pub mode: ExecutionMode,
    pub active_backend: Backend,
    /// `(node_id, warm)` — the active instance plus any draining one.
    pub instances: Vec<(String, bool)>,
    pub revision: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("no eligible node for {0} backend")]
    NoEligibleNode(Backend),
    #[error("trace arrivals are not sorted by time")]
    UnsortedTrace,
    #[error("function `{0}` has no deployment")]
    UndeployedFunction(String),
    #[error("function `{0}` has no workload model")]
    MissingWorkload(String),
    #[error("invalid workload for `{function_id}`: {message}")]
    InvalidWorkload {
        function_id: String,
        message: String,
    },
}

/// Pick the least-loaded node that can host `backend`; ties break on node id.
/// `load` counts instances currently placed per node.
pub fn place(
    cluster: &[NodeSpec],
    backend: Backend,
    load: &BTreeMap<String, usize>,
) -> Result<String, SimError> {
    cluster
        .iter()
        .filter(|n| n.supports(backend))
        .map(|n| (load.get(&n.node_id).copied().unwrap_or(0), &n.node_id))
        .min()
        .map(|(_, id)| id.clone())
        .ok_or(SimError::NoEligibleNode(backend))
}

/// Initial placement of one cold instance; revision 1.
pub fn deploy(
    function_id: &str,
    mode: ExecutionMode,
    cluster: &[NodeSpec],
    load: &BTreeMap<String, usize>,
) -> Result<Deployment, SimError> {
    let backend = match mode {
        ExecutionMode::Cpu | ExecutionMode::CpuPreferred => Backend::Cpu,
        ExecutionMode::Gpu | ExecutionMode::GpuPreferred => Backend::Gpu,
    };
    let node = place(cluster, backend, load)?;
    Ok(Deployment {
        function_id: function_id.to_string(),
        mode,
        active_backend: backend,
        instances: vec![(node, false)],
        revision: 1,
    })
}

/// Outcome of one simulated request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    /// Global arrival order, starting at 0.
    pub index: u64,
    pub function_id: String,
    pub parameter: i64,
    pub arrival_ms: f64,
    pub completion_ms: f64,
    pub latency_ms: f64,
    pub backend: Backend,
    pub node_id: String,
    pub cold_start: bool,
}

/// One controller decision as logged during the run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub at_ms: f64,
    pub function_id: String,
    /// `keep_mode`, `switch_to_cpu`, `switch_to_gpu`, or `failed_switch`.
    pub verdict: String,
    pub rationale: String,
    pub request_rate: f64,
    pub latency_ms: Option<f64>,
    pub saved_cpu_latency: Option<f64>,
    pub saved_gpu_latency: Option<f64>,
}

/// A successful mode switch (revision rollout) or a refused one.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeEvent {
    Switched {
        at_ms: f64,
        function_id: String,
        from: Backend,
        to: Backend,
        revision: u32,
    },
    Failed {
        at_ms: f64,
        function_id: String,
        target: Backend,
        reason: String,
    },
}

impl ModeEvent {
    pub fn at_ms(&self) -> f64 {
        match self {
            ModeEvent::Switched { at_ms, .. } | ModeEvent::Failed { at_ms, .. } => *at_ms,
        }
    }
}

/// A maximal busy interval of one instance, with the resources it held.
#[derive(Debug, Clone, PartialEq)]
pub struct BusySpan {
    pub function_id: String,
    pub backend: Backend,
    pub node_id: String,
    pub start_ms: f64,
    pub end_ms: f64,
    pub cpu_cores: f64,
    pub ram_gb: f64,
    pub gpu_util_pct: f64,
}

/// Per-second utilization series over the whole run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UtilSeries {
    pub cpu_cores: Vec<f64>,
    pub ram_gb: Vec<f64>,
    pub gpu_pct: Vec<f64>,
}

/// Everything a scenario run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub requests: Vec<RequestRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub mode_events: Vec<ModeEvent>,
    pub busy: Vec<BusySpan>,
    pub series: UtilSeries,
    pub arrivals: usize,
    pub end_ms: f64,
    /// Final deployments keyed by function id.
    pub deployments: BTreeMap<String, Deployment>,
}

impl ScenarioResult {
    /// Switch events only, in time order.
    pub fn switches(&self) -> Vec<&ModeEvent> {
        self.mode_events
            .iter()
            .filter(|e| matches!(e, ModeEvent::Switched { .. }))
            .collect()
    }
}

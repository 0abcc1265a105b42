//! Pay-per-use cost accounting over simulated busy time.
//!
//! Billing integrates the simulator's busy intervals exactly: an instance is
//! charged for CPU cores and RAM whenever it is serving (or cold-starting),
//! plus the GPU rate while it holds a GPU backend. Idle time costs nothing.
//! The default rate sheet shipped with the scenario presets is calibrated
//! against published end-to-end totals, not provider list prices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::ScenarioResult;
use crate::telemetry::Backend;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSheet {
    pub cpu_rate_per_core_s: f64,
    pub ram_rate_per_gb_s: f64,
    pub gpu_rate_per_s: f64,
    pub currency: String,
}

impl PriceSheet {
    pub fn validate(&self) -> Result<(), String> {
        if self.cpu_rate_per_core_s < 0.0
            || self.ram_rate_per_gb_s < 0.0
            || self.gpu_rate_per_s < 0.0
        {
            return Err("rates must be non-negative".into());
        }
        if self.gpu_rate_per_s > 0.0 && self.gpu_rate_per_s <= self.cpu_rate_per_core_s {
            return Err("gpu_rate_per_s must exceed cpu_rate_per_core_s".into());
        }
        Ok(())
    }
}

/// Busy seconds and money spent on one (function, backend) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BackendCost {
    pub busy_seconds: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub currency: String,
    pub total: f64,
    pub per_function: BTreeMap<String, f64>,
    pub per_backend: BTreeMap<(String, Backend), BackendCost>,
    /// Cumulative cost at each busy-interval end, non-decreasing.
    pub timeline: Vec<(f64, f64)>,
    pub request_count: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("utilization series is missing or incomplete: {0}")]
    MissingSeries(String),
    #[error("trace mismatch: {0}")]
    TraceMismatch(String),
}

/// Cost of one scenario run under the given rates.
pub fn cost_of(result: &ScenarioResult, prices: &PriceSheet) -> Result<CostReport, CostError> {
    let expected_seconds = (result.end_ms / 1000.0).ceil() as usize;
    for (name, len) in [
        ("cpu", result.series.cpu_cores.len()),
        ("ram", result.series.ram_gb.len()),
        ("gpu", result.series.gpu_pct.len()),
    ] {
        if len != expected_seconds {
            return Err(CostError::MissingSeries(format!(
                "{name} series has {len} points, expected {expected_seconds}"
            )));
        }
    }

    let mut per_function: BTreeMap<String, f64> = BTreeMap::new();
    let mut per_backend: BTreeMap<(String, Backend), BackendCost> = BTreeMap::new();
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(result.busy.len());
    for span in &result.busy {
        let seconds = (span.end_ms - span.start_ms) / 1000.0;
        let rate_per_s = span.cpu_cores * prices.cpu_rate_per_core_s
            + span.ram_gb * prices.ram_rate_per_gb_s
            + if span.backend == Backend::Gpu {
                prices.gpu_rate_per_s
            } else {
                0.0
            };
        let cost = seconds * rate_per_s;
        *per_function.entry(span.function_id.clone()).or_insert(0.0) += cost;
        let entry = per_backend
            .entry((span.function_id.clone(), span.backend))
            .or_default();
        entry.busy_seconds += seconds;
        entry.cost += cost;
        events.push((span.end_ms, cost));
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
    let mut cumulative = 0.0;
    let timeline: Vec<(f64, f64)> = events
        .into_iter()
        .map(|(t, c)| {
            cumulative += c;
            (t, cumulative)
        })
        .collect();

    Ok(CostReport {
        currency: prices.currency.clone(),
        total: per_function.values().sum(),
        per_function,
        per_backend,
        timeline,
        request_count: result.requests.len(),
    })
}

/// Side-by-side verdict over the three deployment modes of one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub cpu_total: f64,
    pub gpu_total: f64,
    pub adaptive_total: f64,
    /// Label of the cheapest mode: "cpu", "gpu", or "auto".
    pub cheapest: &'static str,
    pub adaptive_savings_vs_cpu_pct: f64,
    pub adaptive_savings_vs_gpu_pct: f64,
    pub gpu_savings_vs_cpu_pct: f64,
}

fn savings_pct(baseline: f64, candidate: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (1.0 - candidate / baseline) * 100.0
    }
}

/// Compare runs of the same trace pinned to CPU, pinned to GPU, and adaptive.
pub fn compare(
    cpu: &CostReport,
    gpu: &CostReport,
    adaptive: &CostReport,
) -> Result<ComparisonSummary, CostError> {
    if cpu.request_count != gpu.request_count || cpu.request_count != adaptive.request_count {
        return Err(CostError::TraceMismatch(format!(
            "request counts differ: cpu={}, gpu={}, auto={}",
            cpu.request_count, gpu.request_count, adaptive.request_count
        )));
    }
    let totals = [
        ("cpu", cpu.total),
        ("gpu", gpu.total),
        ("auto", adaptive.total),
    ];
    let cheapest = totals
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite totals"))
        .expect("three candidates")
        .0;
    Ok(ComparisonSummary {
        cpu_total: cpu.total,
        gpu_total: gpu.total,
        adaptive_total: adaptive.total,
        cheapest,
        adaptive_savings_vs_cpu_pct: savings_pct(cpu.total, adaptive.total),
        adaptive_savings_vs_gpu_pct: savings_pct(gpu.total, adaptive.total),
        gpu_savings_vs_cpu_pct: savings_pct(cpu.total, gpu.total),
    })
}

//! Per-function sliding-window metrics and saved per-backend latencies.
//!
//! Samples are recorded at request completion. Window statistics cover the
//! interval `(at - window_ms, at]`; cold-start samples count toward the
//! request rate but are excluded from the latency aggregate by default so a
//! startup outlier cannot masquerade as steady-state performance.
//!
//! Concurrency: one writer per function, any number of readers. Methods take
//! `&mut self` for writes and `&self` for reads, so the borrow checker
//! enforces the single-writer rule; readers always observe the state as of
//! the last completed `record` call.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which hardware backend served a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Cpu,
    Gpu,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Cpu => "cpu",
            Backend::Gpu => "gpu",
        }
    }

    pub fn other(self) -> Backend {
        match self {
            Backend::Cpu => Backend::Gpu,
            Backend::Gpu => Backend::Cpu,
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One completed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub function_id: String,
    /// Milliseconds since scenario start.
    pub timestamp_ms: f64,
    pub latency_ms: f64,
    pub backend: Backend,
    pub cold_start: bool,
}

/// Latency aggregate computed over a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Mean,
    #[default]
    P50,
    P95,
}

impl Aggregate {
    /// Aggregate over the given latencies; `None` for an empty set. The
    /// percentiles use the nearest-rank rule on the ascending sort.
    pub fn apply(self, latencies: &[f64]) -> Option<f64> {
        if latencies.is_empty() {
            return None;
        }
        match self {
            Aggregate::Mean => Some(latencies.iter().sum::<f64>() / latencies.len() as f64),
            Aggregate::P50 => Some(nearest_rank(latencies, 0.50)),
            Aggregate::P95 => Some(nearest_rank(latencies, 0.95)),
        }
    }
}

fn nearest_rank(latencies: &[f64], q: f64) -> f64 {
    let mut sorted = latencies.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("latencies are finite"));
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryConfig {
    pub window_ms: u64,
    pub aggregate: Aggregate,
    pub exclude_cold_from_latency: bool,
    pub min_samples_for_save: usize,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        TelemetryConfig {
            window_ms: 60_000,
            aggregate: Aggregate::P50,
            exclude_cold_from_latency: true,
            min_samples_for_save: 3,
        }
    }
}

/// Windowed statistics for one function at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryWindow {
    pub function_id: String,
    pub window_ms: u64,
    /// `sample_count / (window_ms / 1000)`, exactly.
    pub request_rate: f64,
    /// Absent when no eligible samples fall inside the window; never zero.
    pub latency_stat: Option<f64>,
    pub sample_count: usize,
}

/// Latency baselines recorded when a function leaves a backend. A backend
/// never visited has an absent entry; values are never invented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SavedLatencies {
    pub saved_cpu_latency: Option<f64>,
    pub saved_gpu_latency: Option<f64>,
    pub cpu_recorded_at: Option<f64>,
    pub gpu_recorded_at: Option<f64>,
}

impl SavedLatencies {
    pub fn for_backend(&self, backend: Backend) -> Option<f64> {
        match backend {
            Backend::Cpu => self.saved_cpu_latency,
            Backend::Gpu => self.saved_gpu_latency,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TelemetryError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("insufficient samples to save {backend} latency for `{function_id}`: {have} warm in window, need {need}")]
    InsufficientSamples {
        function_id: String,
        backend: Backend,
        have: usize,
        need: usize,
    },
}

#[derive(Debug, Default)]
struct FunctionTelemetry {
    samples: Vec<Sample>,
    saved: SavedLatencies,
}

/// Store of samples and saved latencies for all registered functions.
#[derive(Debug)]
pub struct TelemetryStore {
    cfg: TelemetryConfig,
    functions: BTreeMap<String, FunctionTelemetry>,
}

impl TelemetryStore {
    pub fn new(cfg: TelemetryConfig) -> Self {
        TelemetryStore {
            cfg,
            functions: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &TelemetryConfig {
        &self.cfg
    }

    pub fn register(&mut self, function_id: impl Into<String>) {
        self.functions.entry(function_id.into()).or_default();
    }

    pub fn function_ids(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(|s| s.as_str())
    }

    /// Append one sample. Timestamps must be monotone non-decreasing per
    /// function; the simulator guarantees this by construction.
    pub fn record(&mut self, sample: Sample) -> Result<(), TelemetryError> {
        let entry = self
            .functions
            .get_mut(&sample.function_id)
            .ok_or_else(|| TelemetryError::UnknownFunction(sample.function_id.clone()))?;
        debug_assert!(
            entry
                .samples
                .last()
                .is_none_or(|prev| prev.timestamp_ms <= sample.timestamp_ms),
            "sample timestamps must be monotone per function"
        );
        entry.samples.push(sample);
        Ok(())
    }

    fn in_window(samples: &[Sample], at_ms: f64, window_ms: u64) -> impl Iterator<Item = &Sample> {
        let lo = at_ms - window_ms as f64;
        samples
            .iter()
            .filter(move |s| s.timestamp_ms > lo && s.timestamp_ms <= at_ms)
    }

    /// Statistics over `(at - window, at]`.
    pub fn window_stats(
        &self,
        function_id: &str,
        at_ms: f64,
    ) -> Result<TelemetryWindow, TelemetryError> {
        let entry = self
            .functions
            .get(function_id)
            .ok_or_else(|| TelemetryError::UnknownFunction(function_id.to_string()))?;
        let mut count = 0usize;
        let mut latencies = Vec::new();
        for s in Self::in_window(&entry.samples, at_ms, self.cfg.window_ms) {
            count += 1;
            if !(self.cfg.exclude_cold_from_latency && s.cold_start) {
                latencies.push(s.latency_ms);
            }
        }
        Ok(TelemetryWindow {
            function_id: function_id.to_string(),
            window_ms: self.cfg.window_ms,
            request_rate: count as f64 / (self.cfg.window_ms as f64 / 1000.0),
            latency_stat: self.cfg.aggregate.apply(&latencies),
            sample_count: count,
        })
    }

    /// Persist the current latency aggregate of `backend` as its saved
    /// baseline. Requires at least `min_samples_for_save` warm samples on
    /// that backend inside the window ending at `at_ms`; overwrites any
    /// prior value.
    pub fn save_backend_latency(
        &mut self,
        function_id: &str,
        backend: Backend,
        at_ms: f64,
    ) -> Result<SavedLatencies, TelemetryError> {
        let aggregate = self.cfg.aggregate;
        let (window_ms, need) = (self.cfg.window_ms, self.cfg.min_samples_for_save);
        let entry = self
            .functions
            .get_mut(function_id)
            .ok_or_else(|| TelemetryError::UnknownFunction(function_id.to_string()))?;
        let warm: Vec<f64> = Self::in_window(&entry.samples, at_ms, window_ms)
            .filter(|s| s.backend == backend && !s.cold_start)
            .map(|s| s.latency_ms)
            .collect();
        if warm.len() < need {
            return Err(TelemetryError::InsufficientSamples {
                function_id: function_id.to_string(),
                backend,
                have: warm.len(),
                need,
            });
        }
        let stat = aggregate.apply(&warm).expect("warm set is non-empty");
        match backend {
            Backend::Cpu => {
                entry.saved.saved_cpu_latency = Some(stat);
                entry.saved.cpu_recorded_at = Some(at_ms);
            }
            Backend::Gpu => {
                entry.saved.saved_gpu_latency = Some(stat);
                entry.saved.gpu_recorded_at = Some(at_ms);
            }
        }
        Ok(entry.saved)
    }

    pub fn saved(&self, function_id: &str) -> Result<SavedLatencies, TelemetryError> {
        self.functions
            .get(function_id)
            .map(|f| f.saved)
            .ok_or_else(|| TelemetryError::UnknownFunction(function_id.to_string()))
    }

    /// Append-only CSV export of raw samples.
    pub fn export_csv(&self) -> String {
        let mut out = String::from("function_id,timestamp,latency_ms,backend,cold_start\n");
        for (fid, entry) in &self.functions {
            for s in &entry.samples {
                out.push_str(&format!(
                    "{},{:.3},{:.3},{},{}\n",
                    fid, s.timestamp_ms, s.latency_ms, s.backend, s.cold_start
                ));
            }
        }
        out
    }
}

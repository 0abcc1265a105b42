//! Scenario files: cluster, functions, workload models, trace generators,
//! controller/telemetry configs, and prices in one human-editable TOML
//! document. A resolved scenario has every default materialized and all
//! function sources inlined, so writing it back out yields a manifest that
//! reproduces the run exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{
    analyze_lenient, AnalyzerConfig, ExecutionMode, LenientAnalysis, SourceUnit,
};
use crate::controller::ControllerConfig;
use crate::cost::PriceSheet;
use crate::sim::{NodeSpec, RequestTrace, SimInputs, TraceEntry, WorkloadModel};
use crate::telemetry::TelemetryConfig;

/// The calibrated default rate sheet. Derived from published end-to-end cost
/// totals and the presets' busy-time profiles; documented as calibration,
/// not provider list prices.
pub fn default_price_sheet() -> PriceSheet {
    PriceSheet {
        cpu_rate_per_core_s: 3.2e-5,
        ram_rate_per_gb_s: 2.5e-6,
        gpu_rate_per_s: 2.3e-4,
        currency: "USD".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentMode {
    /// Run the execution-mode analyzer on the function source.
    Auto,
    /// Pin to CPU; the analyzer is bypassed and the mode never changes.
    Cpu,
    /// Pin to GPU.
    Gpu,
}

impl std::str::FromStr for DeploymentMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(DeploymentMode::Auto),
            "cpu" => Ok(DeploymentMode::Cpu),
            "gpu" => Ok(DeploymentMode::Gpu),
            other => Err(format!(
                "unknown deployment mode `{other}` (want auto|cpu|gpu)"
            )),
        }
    }
}

/// How the parameter of generated requests evolves within a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterSpec {
    Fixed {
        value: i64,
    },
    /// Linear ramp from `from` to `to` across the segment's arrivals.
    Ramp {
        from: i64,
        to: i64,
    },
    /// `base` everywhere except every `period`-th request, which gets
    /// `spike`. Periods count from 1, so the first spike is request
    /// `period - 1` (0-based) of the segment.
    PeriodicSpike {
        base: i64,
        spike: i64,
        period: u64,
    },
}

impl ParameterSpec {
    fn value_at(&self, idx: u64, count: u64) -> i64 {
        match self {
            ParameterSpec::Fixed { value } => *value,
            ParameterSpec::Ramp { from, to } => {
                if count <= 1 {
                    *from
                } else {
                    let t = idx as f64 / (count - 1) as f64;
                    (*from as f64 + (*to - *from) as f64 * t).round() as i64
                }
            }
            ParameterSpec::PeriodicSpike {
                base,
                spike,
                period,
            } => {
                if *period > 0 && (idx + 1).is_multiple_of(*period) {
                    *spike
                } else {
                    *base
                }
            }
        }
    }
}

/// One constant-rate phase of a generated trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSegment {
    pub rate_per_s: f64,
    pub duration_ms: f64,
    pub parameter: ParameterSpec,
}

/// Trace source for one function: generated segments or explicit arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceSource {
    Segments {
        segments: Vec<TraceSegment>,
    },
    /// `[at_ms, parameter]` pairs.
    Explicit {
        entries: Vec<(f64, i64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub function_id: String,
    #[serde(flatten)]
    pub source: TraceSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub function_id: String,
    pub deployment_mode: DeploymentMode,
    /// Path to the function source, relative to the scenario file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_path: Option<String>,
    /// Inlined source text; takes precedence over `source_path`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_inline: Option<String>,
    pub workload: WorkloadModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
}

fn default_repetitions() -> u32 {
    5
}

/// The on-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: ScenarioMeta,
    pub nodes: Vec<NodeSpec>,
    pub functions: Vec<FunctionSpec>,
    pub trace: Vec<TraceSpec>,
    #[serde(default)]
    pub controller: Option<ControllerConfig>,
    #[serde(default)]
    pub telemetry: Option<TelemetryConfig>,
    #[serde(default)]
    pub prices: Option<PriceSheet>,
    #[serde(default)]
    pub analyzer: Option<AnalyzerConfig>,
}

/// A scenario with every default materialized and sources inlined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub scenario: ScenarioMeta,
    pub nodes: Vec<NodeSpec>,
    pub functions: Vec<FunctionSpec>,
    pub trace: Vec<TraceSpec>,
    pub controller: ControllerConfig,
    pub telemetry: TelemetryConfig,
    pub prices: PriceSheet,
    pub analyzer: AnalyzerConfig,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario at `{path}`: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<ScenarioSpec, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    /// Load from disk and resolve relative source paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<ResolvedScenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let spec = ScenarioSpec::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        spec.resolve(base)
    }

    /// Validate, inline sources, and materialize defaults.
    pub fn resolve(mut self, base_dir: &Path) -> Result<ResolvedScenario, ScenarioError> {
        if self.nodes.is_empty() {
            return Err(invalid("nodes", "at least one node is required"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.vcpus < 1 {
                return Err(invalid(format!("nodes[{i}].vcpus"), "must be at least 1"));
            }
        }
        if self.functions.is_empty() {
            return Err(invalid("functions", "at least one function is required"));
        }

        let mut seen = BTreeMap::new();
        for (i, f) in self.functions.iter_mut().enumerate() {
            if seen.insert(f.function_id.clone(), i).is_some() {
                return Err(invalid(
                    format!("functions[{i}].function_id"),
                    format!("duplicate function id `{}`", f.function_id),
                ));
            }
            f.workload
                .validate()
                .map_err(|m| invalid(format!("functions[{i}].workload"), m))?;
            // Inline the source so the resolved manifest is self-contained.
            if f.source_inline.is_none() {
                if let Some(rel) = &f.source_path {
                    let full = base_dir.join(rel);
                    let text =
                        std::fs::read_to_string(&full).map_err(|source| ScenarioError::Io {
                            path: full.display().to_string(),
                            source,
                        })?;
                    f.source_inline = Some(text);
                }
            }
            if f.deployment_mode == DeploymentMode::Auto && f.source_inline.is_none() {
                return Err(invalid(
                    format!("functions[{i}].source_path"),
                    "deployment_mode = \"auto\" requires a function source",
                ));
            }
        }

        for (i, t) in self.trace.iter().enumerate() {
            if !seen.contains_key(&t.function_id) {
                return Err(invalid(
                    format!("trace[{i}].function_id"),
                    format!("`{}` has no function entry", t.function_id),
                ));
            }
            match &t.source {
                TraceSource::Segments { segments } => {
                    for (j, s) in segments.iter().enumerate() {
                        if s.rate_per_s <= 0.0 || s.rate_per_s.is_nan() {
                            return Err(invalid(
                                format!("trace[{i}].segments[{j}].rate_per_s"),
                                "must be strictly positive",
                            ));
                        }
                        if s.duration_ms <= 0.0 || s.duration_ms.is_nan() {
                            return Err(invalid(
                                format!("trace[{i}].segments[{j}].duration_ms"),
                                "must be strictly positive",
                            ));
                        }
                    }
                }
                TraceSource::Explicit { entries } => {
                    if entries.windows(2).any(|w| w[0].0 > w[1].0) {
                        return Err(invalid(
                            format!("trace[{i}].entries"),
                            "arrivals must be sorted by time",
                        ));
                    }
                }
            }
        }

        let controller = self.controller.unwrap_or_default();
        controller
            .validate()
            .map_err(|m| invalid("controller", m))?;
        let prices = self.prices.unwrap_or_else(default_price_sheet);
        prices.validate().map_err(|m| invalid("prices", m))?;

        Ok(ResolvedScenario {
            scenario: self.scenario,
            nodes: self.nodes,
            functions: self.functions,
            trace: self.trace,
            controller,
            telemetry: self.telemetry.unwrap_or_default(),
            prices,
            analyzer: self.analyzer.unwrap_or_default(),
        })
    }
}

/// Initial execution mode of one function plus the analysis that produced
/// it (pinned modes carry no analysis).
#[derive(Debug, Clone)]
pub struct ResolvedMode {
    pub mode: ExecutionMode,
    pub analysis: Option<LenientAnalysis>,
}

impl ResolvedScenario {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("resolved scenario serializes")
    }

    /// Deterministic request trace: per-function generators merged into one
    /// arrival-sorted stream (stable on ties, trace order first).
    pub fn build_trace(&self) -> RequestTrace {
        let mut entries: Vec<TraceEntry> = Vec::new();
        for t in &self.trace {
            match &t.source {
                TraceSource::Segments { segments } => {
                    let mut offset = 0.0f64;
                    for s in segments {
                        let interval = 1000.0 / s.rate_per_s;
                        let count = (s.duration_ms / interval).ceil() as u64;
                        for k in 0..count {
                            let at = offset + k as f64 * interval;
                            if at >= offset + s.duration_ms {
                                break;
                            }
                            entries.push(TraceEntry {
                                at_ms: at,
                                function_id: t.function_id.clone(),
                                parameter: s.parameter.value_at(k, count),
                            });
                        }
                        offset += s.duration_ms;
                    }
                }
                TraceSource::Explicit { entries: list } => {
                    for (at_ms, parameter) in list {
                        entries.push(TraceEntry {
                            at_ms: *at_ms,
                            function_id: t.function_id.clone(),
                            parameter: *parameter,
                        });
                    }
                }
            }
        }
        entries.sort_by(|a, b| a.at_ms.partial_cmp(&b.at_ms).expect("finite times"));
        RequestTrace::new(entries).expect("sorted by construction")
    }

    /// Initial mode per function under an optional global override.
    pub fn resolve_modes(
        &self,
        override_mode: Option<DeploymentMode>,
    ) -> BTreeMap<String, ResolvedMode> {
        let mut out = BTreeMap::new();
        for f in &self.functions {
            let effective = override_mode.unwrap_or(f.deployment_mode);
            let resolved = match effective {
                DeploymentMode::Cpu => ResolvedMode {
                    mode: ExecutionMode::Cpu,
                    analysis: None,
                },
                DeploymentMode::Gpu => ResolvedMode {
                    mode: ExecutionMode::Gpu,
                    analysis: None,
                },
                DeploymentMode::Auto => {
                    let source = f
                        .source_inline
                        .clone()
                        .expect("resolve() guarantees a source for auto mode");
                    let unit = SourceUnit::new(f.function_id.replace('-', "_"), source)
                        .unwrap_or_else(|_| {
                            SourceUnit::new("function", "pass").expect("valid fallback")
                        });
                    let analysis = analyze_lenient(&unit, &self.analyzer);
                    ResolvedMode {
                        mode: analysis.report.mode,
                        analysis: Some(analysis),
                    }
                }
            };
            out.insert(f.function_id.clone(), resolved);
        }
        out
    }

    /// Assemble simulator inputs for one repetition.
    pub fn sim_inputs(
        &self,
        override_mode: Option<DeploymentMode>,
        seed: u64,
    ) -> (SimInputs, BTreeMap<String, ResolvedMode>) {
        let modes = self.resolve_modes(override_mode);
        let functions = self
            .functions
            .iter()
            .map(|f| {
                (
                    f.function_id.clone(),
                    (modes[&f.function_id].mode, f.workload.clone()),
                )
            })
            .collect();
        (
            SimInputs {
                cluster: self.nodes.clone(),
                functions,
                trace: self.build_trace(),
                controller: self.controller.clone(),
                telemetry: self.telemetry.clone(),
                seed,
            },
            modes,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
name = "mini"
seed = 42

[[nodes]]
node_id = "a"
vcpus = 4
ram_gb = 8.0

[[nodes]]
node_id = "g"
vcpus = 16
ram_gb = 64.0
gpu = { model = "RTX 3090", vram_gb = 24.0 }

[[functions]]
function_id = "fn-a"
deployment_mode = "auto"
source_inline = "import torch\ndef handler(req):\n    return req\n"

[functions.workload]
cpu_service = { kind = "constant", ms = 100.0 }
gpu_service = { kind = "constant", ms = 50.0 }
cpu_cold_start_ms = 500.0
gpu_cold_start_ms = 4000.0
cpu_cores_used = 1.0
ram_gb_used = 2.0
gpu_util_pct = 50.0

[[trace]]
function_id = "fn-a"
kind = "segments"

[[trace.segments]]
rate_per_s = 2.0
duration_ms = 10000.0
parameter = { kind = "fixed", value = 1 }
"#;

    #[test]
    fn minimal_scenario_parses_and_resolves_defaults() {
        let spec = ScenarioSpec::from_toml(MINIMAL).unwrap();
        let resolved = spec.resolve(Path::new(".")).unwrap();
        assert_eq!(resolved.scenario.repetitions, 5);
        assert_eq!(resolved.controller.latency_threshold_ms, 500.0);
        assert_eq!(resolved.telemetry.window_ms, 60_000);
        assert!(resolved.prices.validate().is_ok());
    }

    #[test]
    fn trace_generation_is_deterministic_and_sorted() {
        let resolved = ScenarioSpec::from_toml(MINIMAL)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        let a = resolved.build_trace();
        let b = resolved.build_trace();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert_eq!(a.entries()[0].at_ms, 0.0);
        assert_eq!(a.entries()[1].at_ms, 500.0);
    }

    #[test]
    fn auto_mode_runs_the_analyzer() {
        let resolved = ScenarioSpec::from_toml(MINIMAL)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        let modes = resolved.resolve_modes(None);
        // imports torch, no ops: prefers CPU but stays adaptive
        assert_eq!(modes["fn-a"].mode, ExecutionMode::CpuPreferred);
        assert!(modes["fn-a"].analysis.is_some());
    }

    #[test]
    fn override_pins_every_function() {
        let resolved = ScenarioSpec::from_toml(MINIMAL)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        let modes = resolved.resolve_modes(Some(DeploymentMode::Gpu));
        assert_eq!(modes["fn-a"].mode, ExecutionMode::Gpu);
        assert!(modes["fn-a"].analysis.is_none());
    }

    #[test]
    fn validation_reports_field_paths() {
        let bad = MINIMAL.replace("rate_per_s = 2.0", "rate_per_s = 0.0");
        let err = ScenarioSpec::from_toml(&bad)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("trace[0].segments[0].rate_per_s"), "{msg}");
    }

    #[test]
    fn resolved_manifest_round_trips() {
        let resolved = ScenarioSpec::from_toml(MINIMAL)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        let manifest = resolved.to_toml();
        let back = ScenarioSpec::from_toml(&manifest)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        assert_eq!(resolved, back);
        assert_eq!(resolved.build_trace(), back.build_trace());
    }

    #[test]
    fn ramp_parameters_cover_the_range() {
        let spec = ParameterSpec::Ramp {
            from: 200,
            to: 1400,
        };
        assert_eq!(spec.value_at(0, 301), 200);
        assert_eq!(spec.value_at(300, 301), 1400);
        assert_eq!(spec.value_at(150, 301), 800);
    }

    #[test]
    fn periodic_spike_hits_every_period() {
        let spec = ParameterSpec::PeriodicSpike {
            base: 0,
            spike: 1,
            period: 125,
        };
        let spikes: Vec<u64> = (0..600).filter(|i| spec.value_at(*i, 600) == 1).collect();
        assert_eq!(spikes, vec![124, 249, 374, 499]);
    }

    #[test]
    fn auto_without_source_is_invalid() {
        let bad = MINIMAL.replace(
            "source_inline = \"import torch\\ndef handler(req):\\n    return req\\n\"",
            "",
        );
        let err = ScenarioSpec::from_toml(&bad)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap_err();
        assert!(err.to_string().contains("requires a function source"));
    }
}

//! SLO-driven promote/demote decisions and the periodic reevaluation loop.
//!
//! `decide` is a pure function over one function's telemetry window. A
//! `cpu_preferred` function is promoted when sustained traffic violates the
//! latency SLO (or regressed against the saved GPU baseline right after a
//! switch); a `gpu_preferred` function is demoted when the GPU shows no
//! advantage over the saved CPU baseline, or when traffic is too sparse to
//! justify the accelerator. A request-rate gate keeps cold-start artifacts
//! from triggering switches, and the gap margin plus saved baselines damp
//! oscillation.
//!
//! `reevaluate_all` must be externally serialized (one reevaluation at a
//! time); telemetry recording may proceed concurrently with readers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::ExecutionMode;
use crate::telemetry::{Backend, SavedLatencies, TelemetryStore, TelemetryWindow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// The latency SLO.
    pub latency_threshold_ms: f64,
    /// Minimum request rate before any switch is considered.
    pub cold_start_mitigation_threshold: f64,
    /// Rate below which an idle GPU function may fall back to CPU.
    pub low_rate_threshold: f64,
    /// Performance-gap margin for comparisons against saved baselines.
    pub gap_ms: f64,
    /// How long after a switch the function counts as recently changed.
    pub recent_change_window_ms: u64,
    pub reevaluation_period_ms: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            latency_threshold_ms: 500.0,
            cold_start_mitigation_threshold: 1.0,
            low_rate_threshold: 0.5,
            gap_ms: 50.0,
            recent_change_window_ms: 120_000,
            reevaluation_period_ms: 15_000,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("latency_threshold_ms", self.latency_threshold_ms),
            (
                "cold_start_mitigation_threshold",
                self.cold_start_mitigation_threshold,
            ),
            ("low_rate_threshold", self.low_rate_threshold),
            ("gap_ms", self.gap_ms),
            (
                "recent_change_window_ms",
                self.recent_change_window_ms as f64,
            ),
            ("reevaluation_period_ms", self.reevaluation_period_ms as f64),
        ];
        for (name, v) in positive {
            if v <= 0.0 || v.is_nan() {
                return Err(format!("{name} must be strictly positive"));
            }
        }
        if self.low_rate_threshold > self.cold_start_mitigation_threshold {
            return Err(
                "low_rate_threshold must not exceed cold_start_mitigation_threshold".into(),
            );
        }
        Ok(())
    }
}

/// Controller-side view of one deployed function.
#[derive(Debug, Clone)]
pub struct FunctionState {
    pub function_id: String,
    pub mode: ExecutionMode,
    pub last_change_at: Option<f64>,
    pub saved: SavedLatencies,
}

impl FunctionState {
    pub fn new(function_id: impl Into<String>, mode: ExecutionMode) -> Self {
        FunctionState {
            function_id: function_id.into(),
            mode,
            last_change_at: None,
            saved: SavedLatencies::default(),
        }
    }

    /// Backend the mode currently runs on.
    pub fn active_backend(&self) -> Backend {
        match self.mode {
            ExecutionMode::Cpu | ExecutionMode::CpuPreferred => Backend::Cpu,
            ExecutionMode::Gpu | ExecutionMode::GpuPreferred => Backend::Gpu,
        }
    }

    fn recent_change(&self, now_ms: f64, cfg: &ControllerConfig) -> bool {
        self.last_change_at
            .is_some_and(|t| now_ms - t < cfg.recent_change_window_ms as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SwitchToCpu,
    SwitchToGpu,
    KeepMode,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::SwitchToCpu => "switch_to_cpu",
            Verdict::SwitchToGpu => "switch_to_gpu",
            Verdict::KeepMode => "keep_mode",
        }
    }
}

/// The exact telemetry values a decision consumed, kept for auditability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputsSnapshot {
    pub request_rate: f64,
    pub latency_ms: Option<f64>,
    pub saved_cpu_latency: Option<f64>,
    pub saved_gpu_latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationAction {
    pub verdict: Verdict,
    pub rationale: String,
    pub inputs: InputsSnapshot,
    /// False when the verdict was a switch but redeployment was refused.
    pub applied: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("function `{0}` is pinned to {1} and never adapts")]
    PinnedMode(String, ExecutionMode),
}

/// Why a redeploy could not be applied.
#[derive(Debug, Error, PartialEq)]
pub enum SwitchError {
    #[error("no eligible node for {0} backend")]
    NoEligibleNode(Backend),
    #[error("{0}")]
    Other(String),
}

/// Receiver of switch actions; the cluster simulator implements this with
/// its redeploy operation.
pub trait SwitchTarget {
    fn redeploy(
        &mut self,
        function_id: &str,
        target: Backend,
        now_ms: f64,
    ) -> Result<(), SwitchError>;
}

/// One adaptation decision, exactly the published decision procedure.
///
/// Comparisons against an absent saved latency evaluate to false (except the
/// explicit absence check in the low-rate branch), and an absent latency
/// aggregate always keeps the current mode.
pub fn decide(
    state: &FunctionState,
    window: &TelemetryWindow,
    cfg: &ControllerConfig,
    now_ms: f64,
) -> Result<AdaptationAction, ControllerError> {
    if state.mode.is_pinned() {
        return Err(ControllerError::PinnedMode(
            state.function_id.clone(),
            state.mode,
        ));
    }
    let inputs = InputsSnapshot {
        request_rate: window.request_rate,
        latency_ms: window.latency_stat,
        saved_cpu_latency: state.saved.saved_cpu_latency,
        saved_gpu_latency: state.saved.saved_gpu_latency,
    };
    let action = |verdict: Verdict, rationale: String| AdaptationAction {
        verdict,
        rationale,
        inputs,
        applied: verdict == Verdict::KeepMode,
    };

    let rate = window.request_rate;
    let recent = state.recent_change(now_ms, cfg);

    let Some(latency) = window.latency_stat else {
        return Ok(action(
            Verdict::KeepMode,
            "no latency data in window".into(),
        ));
    };

    match state.mode {
        ExecutionMode::CpuPreferred => {
            if rate > cfg.cold_start_mitigation_threshold {
                if latency > cfg.latency_threshold_ms {
                    return Ok(action(
                        Verdict::SwitchToGpu,
                        format!(
                            "latency {latency:.1}ms exceeds threshold {:.1}ms at rate {rate:.2}/s",
                            cfg.latency_threshold_ms
                        ),
                    ));
                }
                if recent {
                    if let Some(saved_gpu) = state.saved.saved_gpu_latency {
                        if latency > saved_gpu + cfg.gap_ms {
                            return Ok(action(
                                Verdict::SwitchToGpu,
                                format!(
                                    "cpu latency {latency:.1}ms regressed past saved gpu latency {saved_gpu:.1}ms + gap {:.1}ms",
                                    cfg.gap_ms
                                ),
                            ));
                        }
                    }
                }
            }
            Ok(action(
                Verdict::KeepMode,
                "cpu_preferred within slo or below rate gate".into(),
            ))
        }
        ExecutionMode::GpuPreferred => {
            if rate > cfg.cold_start_mitigation_threshold
                && recent
                && state
                    .saved
                    .saved_cpu_latency
                    .is_some_and(|saved_cpu| latency + cfg.gap_ms > saved_cpu)
            {
                let saved_cpu = state.saved.saved_cpu_latency.expect("checked above");
                return Ok(action(
                    Verdict::SwitchToCpu,
                    format!(
                        "gpu latency {latency:.1}ms + gap {:.1}ms is no better than saved cpu latency {saved_cpu:.1}ms",
                        cfg.gap_ms
                    ),
                ));
            }
            if rate < cfg.low_rate_threshold {
                match state.saved.saved_cpu_latency {
                    None => {
                        return Ok(action(
                            Verdict::SwitchToCpu,
                            format!(
                                "rate {rate:.2}/s below low-rate threshold {:.2}/s and no saved cpu latency",
                                cfg.low_rate_threshold
                            ),
                        ));
                    }
                    Some(saved_cpu) if saved_cpu < cfg.latency_threshold_ms => {
                        return Ok(action(
                            Verdict::SwitchToCpu,
                            format!(
                                "rate {rate:.2}/s below low-rate threshold {:.2}/s and saved cpu latency {saved_cpu:.1}ms meets the slo",
                                cfg.low_rate_threshold
                            ),
                        ));
                    }
                    Some(_) => {}
                }
            }
            Ok(action(
                Verdict::KeepMode,
                "gpu_preferred justified by current telemetry".into(),
            ))
        }
        ExecutionMode::Cpu | ExecutionMode::Gpu => unreachable!("pinned handled above"),
    }
}

/// Registry of adaptive and pinned function states, keyed by function id.
#[derive(Debug, Default)]
pub struct Registry {
    states: BTreeMap<String, FunctionState>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn insert(&mut self, state: FunctionState) {
        self.states.insert(state.function_id.clone(), state);
    }

    pub fn get(&self, function_id: &str) -> Option<&FunctionState> {
        self.states.get(function_id)
    }

    pub fn get_mut(&mut self, function_id: &str) -> Option<&mut FunctionState> {
        self.states.get_mut(function_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FunctionState> {
        self.states.values()
    }
}

/// Apply `decide` to every non-pinned function in ascending id order.
///
/// Switch verdicts are forwarded to the target's redeploy; on success the
/// departing backend's latency is saved (when enough warm samples exist),
/// the mode flips, and `last_change_at` is set. A refused redeploy keeps the
/// mode and is reported through the action's `applied` flag and rationale.
pub fn reevaluate_all(
    registry: &mut Registry,
    telemetry: &mut TelemetryStore,
    cfg: &ControllerConfig,
    now_ms: f64,
    target: &mut dyn SwitchTarget,
) -> Vec<(String, AdaptationAction)> {
    let ids: Vec<String> = registry.states.keys().cloned().collect();
    let mut out = Vec::with_capacity(ids.len());
    for fid in ids {
        let state = registry.states.get_mut(&fid).expect("id came from the map");
        if state.mode.is_pinned() {
            out.push((
                fid,
                AdaptationAction {
                    verdict: Verdict::KeepMode,
                    rationale: format!("pinned mode {}", state.mode),
                    inputs: InputsSnapshot {
                        request_rate: 0.0,
                        latency_ms: None,
                        saved_cpu_latency: None,
                        saved_gpu_latency: None,
                    },
                    applied: true,
                },
            ));
            continue;
        }
        // Refresh the saved-latency snapshot before deciding.
        match telemetry.saved(&fid) {
            Ok(saved) => state.saved = saved,
            Err(e) => {
                out.push((fid, keep_with_error(e.to_string())));
                continue;
            }
        }
        let window = match telemetry.window_stats(&fid, now_ms) {
            Ok(w) => w,
            Err(e) => {
                out.push((fid, keep_with_error(e.to_string())));
                continue;
            }
        };
        let mut action = match decide(state, &window, cfg, now_ms) {
            Ok(a) => a,
            Err(e) => {
                out.push((fid, keep_with_error(e.to_string())));
                continue;
            }
        };
        if let Some((departing, new_mode)) = match action.verdict {
            Verdict::SwitchToGpu => Some((Backend::Cpu, ExecutionMode::GpuPreferred)),
            Verdict::SwitchToCpu => Some((Backend::Gpu, ExecutionMode::CpuPreferred)),
            Verdict::KeepMode => None,
        } {
            match target.redeploy(&fid, departing.other(), now_ms) {
                Ok(()) => {
                    // Record the departing backend's baseline when eligible;
                    // too few warm samples simply leaves it unset.
                    if let Ok(saved) = telemetry.save_backend_latency(&fid, departing, now_ms) {
                        state.saved = saved;
                    }
                    state.mode = new_mode;
                    state.last_change_at = Some(now_ms);
                    action.applied = true;
                }
                Err(err) => {
                    action.applied = false;
                    action.rationale = format!("{}; redeploy refused: {err}", action.rationale);
                }
            }
        }
        out.push((fid, action));
    }
    out
}

fn keep_with_error(message: String) -> AdaptationAction {
    AdaptationAction {
        verdict: Verdict::KeepMode,
        rationale: format!("telemetry unavailable: {message}"),
        inputs: InputsSnapshot {
            request_rate: 0.0,
            latency_ms: None,
            saved_cpu_latency: None,
            saved_gpu_latency: None,
        },
        applied: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{Sample, TelemetryConfig};

    fn window(rate: f64, latency: Option<f64>) -> TelemetryWindow {
        TelemetryWindow {
            function_id: "f".into(),
            window_ms: 60_000,
            request_rate: rate,
            latency_stat: latency,
            sample_count: (rate * 60.0) as usize,
        }
    }

    fn state(mode: ExecutionMode) -> FunctionState {
        FunctionState::new("f", mode)
    }

    #[test]
    fn slo_violation_promotes_under_traffic() {
        let cfg = ControllerConfig::default();
        let a = decide(
            &state(ExecutionMode::CpuPreferred),
            &window(5.0, Some(1400.0)),
            &cfg,
            0.0,
        )
        .unwrap();
        assert_eq!(a.verdict, Verdict::SwitchToGpu);
        assert_eq!(a.inputs.request_rate, 5.0);
        assert_eq!(a.inputs.latency_ms, Some(1400.0));
    }

    #[test]
    fn low_rate_with_no_saved_cpu_demotes() {
        let cfg = ControllerConfig::default();
        let a = decide(
            &state(ExecutionMode::GpuPreferred),
            &window(0.2, Some(800.0)),
            &cfg,
            0.0,
        )
        .unwrap();
        assert_eq!(a.verdict, Verdict::SwitchToCpu);
    }

    #[test]
    fn gap_margin_demotes_when_gpu_is_no_better() {
        // 2090 + 50 > 2091, hand-evaluated.
        let cfg = ControllerConfig::default();
        let mut s = state(ExecutionMode::GpuPreferred);
        s.last_change_at = Some(0.0);
        s.saved.saved_cpu_latency = Some(2091.0);
        let a = decide(&s, &window(5.0, Some(2090.0)), &cfg, 15_000.0).unwrap();
        assert_eq!(a.verdict, Verdict::SwitchToCpu);
    }

    #[test]
    fn rate_below_gate_never_promotes() {
        let cfg = ControllerConfig::default();
        let a = decide(
            &state(ExecutionMode::CpuPreferred),
            &window(0.1, Some(9999.0)),
            &cfg,
            0.0,
        )
        .unwrap();
        assert_eq!(a.verdict, Verdict::KeepMode);
    }

    #[test]
    fn empty_window_always_keeps() {
        let cfg = ControllerConfig::default();
        for mode in [ExecutionMode::CpuPreferred, ExecutionMode::GpuPreferred] {
            let a = decide(&state(mode), &window(0.0, None), &cfg, 0.0).unwrap();
            assert_eq!(a.verdict, Verdict::KeepMode);
        }
    }

    #[test]
    fn pinned_modes_are_a_caller_bug() {
        let cfg = ControllerConfig::default();
        for mode in [ExecutionMode::Cpu, ExecutionMode::Gpu] {
            assert!(matches!(
                decide(&state(mode), &window(1.0, Some(1.0)), &cfg, 0.0),
                Err(ControllerError::PinnedMode(..))
            ));
        }
    }

    #[test]
    fn absent_saved_gpu_comparison_is_false() {
        let cfg = ControllerConfig::default();
        let mut s = state(ExecutionMode::CpuPreferred);
        s.last_change_at = Some(0.0);
        // latency below threshold, recent change, no saved gpu baseline:
        // the regression clause cannot fire.
        let a = decide(&s, &window(5.0, Some(400.0)), &cfg, 10_000.0).unwrap();
        assert_eq!(a.verdict, Verdict::KeepMode);
    }

    #[test]
    fn high_rate_blocks_low_rate_demotion() {
        let cfg = ControllerConfig::default();
        let mut s = state(ExecutionMode::GpuPreferred);
        s.saved.saved_cpu_latency = Some(100.0);
        let a = decide(&s, &window(5.0, Some(100.0)), &cfg, 0.0).unwrap();
        assert_eq!(a.verdict, Verdict::KeepMode);
    }

    #[test]
    fn config_validation_rejects_inverted_thresholds() {
        let cfg = ControllerConfig {
            low_rate_threshold: 2.0,
            ..ControllerConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(ControllerConfig::default().validate().is_ok());
    }

    struct RecordingTarget {
        calls: Vec<(String, Backend)>,
        refuse: bool,
    }

    impl SwitchTarget for RecordingTarget {
        fn redeploy(
            &mut self,
            function_id: &str,
            target: Backend,
            _now_ms: f64,
        ) -> Result<(), SwitchError> {
            if self.refuse {
                return Err(SwitchError::NoEligibleNode(target));
            }
            self.calls.push((function_id.to_string(), target));
            Ok(())
        }
    }

    fn telemetry_with_load(fid: &str, latency: f64) -> TelemetryStore {
        let mut t = TelemetryStore::new(TelemetryConfig::default());
        t.register(fid);
        for i in 0..120 {
            t.record(Sample {
                function_id: fid.into(),
                timestamp_ms: i as f64 * 500.0,
                latency_ms: latency,
                backend: Backend::Cpu,
                cold_start: i == 0,
            })
            .unwrap();
        }
        t
    }

    #[test]
    fn reevaluate_skips_pinned_and_switches_violators() {
        let cfg = ControllerConfig::default();
        let mut registry = Registry::new();
        registry.insert(state(ExecutionMode::CpuPreferred));
        registry.insert(FunctionState::new("pinned", ExecutionMode::Gpu));
        registry.insert(FunctionState::new("quiet", ExecutionMode::CpuPreferred));

        let mut telemetry = telemetry_with_load("f", 1400.0);
        telemetry.register("pinned");
        telemetry.register("quiet");

        let mut target = RecordingTarget {
            calls: vec![],
            refuse: false,
        };
        let actions = reevaluate_all(&mut registry, &mut telemetry, &cfg, 60_000.0, &mut target);

        assert_eq!(actions.len(), 3);
        // deterministic ascending order
        assert_eq!(actions[0].0, "f");
        assert_eq!(actions[1].0, "pinned");
        assert_eq!(actions[2].0, "quiet");
        assert_eq!(actions[0].1.verdict, Verdict::SwitchToGpu);
        assert_eq!(actions[1].1.verdict, Verdict::KeepMode);
        assert_eq!(actions[2].1.verdict, Verdict::KeepMode);
        assert_eq!(target.calls, vec![("f".to_string(), Backend::Gpu)]);

        let f = registry.get("f").unwrap();
        assert_eq!(f.mode, ExecutionMode::GpuPreferred);
        assert_eq!(f.last_change_at, Some(60_000.0));
        // departing CPU latency was saved
        assert_eq!(f.saved.saved_cpu_latency, Some(1400.0));
    }

    #[test]
    fn refused_redeploy_keeps_mode() {
        let cfg = ControllerConfig::default();
        let mut registry = Registry::new();
        registry.insert(state(ExecutionMode::CpuPreferred));
        let mut telemetry = telemetry_with_load("f", 1400.0);
        let mut target = RecordingTarget {
            calls: vec![],
            refuse: true,
        };
        let actions = reevaluate_all(&mut registry, &mut telemetry, &cfg, 60_000.0, &mut target);
        assert_eq!(actions[0].1.verdict, Verdict::SwitchToGpu);
        assert!(!actions[0].1.applied);
        assert!(actions[0].1.rationale.contains("redeploy refused"));
        let f = registry.get("f").unwrap();
        assert_eq!(f.mode, ExecutionMode::CpuPreferred);
        assert_eq!(f.last_change_at, None);
    }

    #[test]
    fn replay_is_deterministic() {
        let cfg = ControllerConfig::default();
        let run = || {
            let mut registry = Registry::new();
            registry.insert(state(ExecutionMode::CpuPreferred));
            let mut telemetry = telemetry_with_load("f", 1400.0);
            let mut target = RecordingTarget {
                calls: vec![],
                refuse: false,
            };
            reevaluate_all(&mut registry, &mut telemetry, &cfg, 60_000.0, &mut target)
                .into_iter()
                .map(|(fid, a)| (fid, a.verdict, a.rationale))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}

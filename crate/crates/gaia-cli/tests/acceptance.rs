//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS line with the measured values. Tolerances are pinned here, in code.
//!
//! Criteria 3-7 run the shipped scenario presets through the simulator and
//! check the reproduced trajectories, latency distributions, and cost
//! totals; 1, 2, 8, and 9 are the analyzer table, the controller oracle
//! grid, the anti-oscillation property, and byte-level determinism.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gaia_core::analyzer::{
    analyze_source, AnalyzerConfig, DetectionFlags, ExecutionMode, SourceUnit,
};
use gaia_core::controller::{decide, ControllerConfig, FunctionState, Verdict};
use gaia_core::cost::{compare, cost_of, CostReport};
use gaia_core::scenario::{DeploymentMode, ResolvedScenario, ScenarioSpec};
use gaia_core::sim::{run_trace, ModeEvent, ScenarioResult};
use gaia_core::telemetry::{Backend, TelemetryWindow};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn load(name: &str) -> ResolvedScenario {
    ScenarioSpec::load(&scenario_path(name)).expect("preset loads")
}

/// Run one repetition of a preset under a deployment-mode override.
fn run_mode(
    scenario: &ResolvedScenario,
    mode: Option<DeploymentMode>,
) -> (ScenarioResult, CostReport) {
    let (inputs, _) = scenario.sim_inputs(mode, scenario.scenario.seed);
    let result = run_trace(&inputs).expect("scenario runs");
    let report = cost_of(&result, &scenario.prices).expect("series complete");
    (result, report)
}

fn p50(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted[sorted.len().div_ceil(2) - 1]
}

fn latencies(result: &ScenarioResult) -> Vec<f64> {
    result.requests.iter().map(|r| r.latency_ms).collect()
}

fn switch_sequence(result: &ScenarioResult) -> Vec<(&'static str, f64)> {
    result
        .mode_events
        .iter()
        .filter_map(|e| match e {
            ModeEvent::Switched {
                to: Backend::Gpu,
                at_ms,
                ..
            } => Some(("switch_to_gpu", *at_ms)),
            ModeEvent::Switched {
                to: Backend::Cpu,
                at_ms,
                ..
            } => Some(("switch_to_cpu", *at_ms)),
            ModeEvent::Failed { .. } => None,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// 1. Analyzer decision table
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_analyzer_decision_table() {
    let started = Instant::now();

    // Sixteen generated sources covering every flag combination, plus the
    // guard fixture, literal big/small shapes, and plain code.
    fn fixture(dl: bool, gpu: bool, big: bool, small: bool, guarded: bool) -> String {
        let module = if dl { "torch" } else { "numpy" };
        let mut body = String::new();
        if big {
            body.push_str(&format!(
                "    a = {module}.zeros(2048, 2048)\n    r = {module}.matmul(a, a)\n"
            ));
        }
        if small {
            body.push_str(&format!(
                "    b = {module}.zeros(10, 10)\n    s = {module}.matmul(b, b)\n"
            ));
        }
        if gpu {
            if guarded {
                body.push_str("    if torch.cuda.is_available():\n        x = x.to(\"cuda\")\n");
            } else {
                body.push_str("    x = x.to(\"cuda\")\n");
            }
        }
        format!("import {module}\ndef handler(x):\n{body}    return x\n")
    }

    let cfg = AnalyzerConfig::default();
    let mut corpus = 0;
    for bits in 0u8..16 {
        let (dl, gpu, big, small) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0, bits & 8 != 0);
        let unit = SourceUnit::new("handler", fixture(dl, gpu, big, small, false)).unwrap();
        let report = analyze_source(&unit, &cfg).unwrap();
        assert_eq!(
            report.flags,
            DetectionFlags {
                dl_import: dl,
                gpu_explicit: gpu,
                big_ops: big,
                small_ops: small
            }
        );
        let (mode, reason) = if gpu {
            (ExecutionMode::Gpu, "explicit GPU usage")
        } else if dl && big {
            (ExecutionMode::GpuPreferred, "large tensor ops")
        } else if dl && small {
            (ExecutionMode::CpuPreferred, "small tensor ops")
        } else if dl {
            (ExecutionMode::CpuPreferred, "imports only")
        } else {
            (ExecutionMode::Cpu, "no GPU-related activity")
        };
        assert_eq!(report.mode, mode);
        assert_eq!(
            report.reason.as_bytes(),
            reason.as_bytes(),
            "reason must byte-match"
        );
        corpus += 1;
    }

    // guard fixture: the explicit flag flips off, everything else holds
    let guarded = SourceUnit::new("handler", fixture(true, true, true, false, true)).unwrap();
    let report = analyze_source(&guarded, &cfg).unwrap();
    assert!(!report.flags.gpu_explicit);
    assert_eq!(report.mode, ExecutionMode::GpuPreferred);
    corpus += 1;

    // literal shapes resolve exactly: 4096*4096 and 10*10
    let big = SourceUnit::new(
        "handler",
        "import torch\ndef handler():\n    a = torch.rand(4096, 4096)\n    return torch.matmul(a, a)\n",
    )
    .unwrap();
    let report = analyze_source(&big, &cfg).unwrap();
    assert_eq!(report.op_census[0].elements, Some(16_777_216));
    assert_eq!(report.mode, ExecutionMode::GpuPreferred);
    corpus += 1;

    let plain = SourceUnit::new("handler", "def add(a, b):\n    return a + b\n").unwrap();
    let report = analyze_source(&plain, &cfg).unwrap();
    assert_eq!(report.mode, ExecutionMode::Cpu);
    assert_eq!(report.reason, "no GPU-related activity");
    corpus += 1;

    let elapsed = started.elapsed();
    assert!(corpus >= 16);
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("[PASS] criterion 1: {corpus} fixture sources classified per the decision table in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// 2. Controller oracle equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_controller_oracle_equivalence() {
    let started = Instant::now();
    let cfg = ControllerConfig::default();
    let now = 300_000.0;

    // independent straight-line transcription of the decision procedure
    let oracle = |mode: ExecutionMode,
                  rate: f64,
                  latency: Option<f64>,
                  recent: bool,
                  saved_cpu: Option<f64>,
                  saved_gpu: Option<f64>|
     -> Verdict {
        let Some(lat) = latency else {
            return Verdict::KeepMode;
        };
        if mode == ExecutionMode::CpuPreferred {
            if rate > cfg.cold_start_mitigation_threshold
                && (lat > cfg.latency_threshold_ms
                    || (recent && saved_gpu.is_some_and(|g| lat > g + cfg.gap_ms)))
            {
                return Verdict::SwitchToGpu;
            }
        } else {
            if rate > cfg.cold_start_mitigation_threshold
                && recent
                && saved_cpu.is_some_and(|c| lat + cfg.gap_ms > c)
            {
                return Verdict::SwitchToCpu;
            }
            if rate < cfg.low_rate_threshold
                && (saved_cpu.is_none() || saved_cpu.unwrap() < cfg.latency_threshold_ms)
            {
                return Verdict::SwitchToCpu;
            }
        }
        Verdict::KeepMode
    };

    let saved_grid = [None, Some(100.0), Some(1500.0), Some(2091.0)];
    let mut points = 0u64;
    for mode in [ExecutionMode::CpuPreferred, ExecutionMode::GpuPreferred] {
        for rate_step in 0..=40 {
            let rate = rate_step as f64 * 0.25;
            for lat_step in 0..=60 {
                let latency = if lat_step == 0 {
                    None
                } else {
                    Some(lat_step as f64 * 50.0)
                };
                for recent in [false, true] {
                    for saved_cpu in saved_grid {
                        for saved_gpu in saved_grid {
                            let mut state = FunctionState::new("f", mode);
                            state.last_change_at = if recent { Some(now - 1_000.0) } else { None };
                            state.saved.saved_cpu_latency = saved_cpu;
                            state.saved.saved_gpu_latency = saved_gpu;
                            let window = TelemetryWindow {
                                function_id: "f".into(),
                                window_ms: 60_000,
                                request_rate: rate,
                                latency_stat: latency,
                                sample_count: 0,
                            };
                            let got = decide(&state, &window, &cfg, now).unwrap().verdict;
                            let want = oracle(mode, rate, latency, recent, saved_cpu, saved_gpu);
                            assert_eq!(got, want, "mode={mode:?} rate={rate} lat={latency:?} recent={recent} saved_cpu={saved_cpu:?} saved_gpu={saved_gpu:?}");
                            points += 1;
                        }
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert_eq!(points, 2 * 41 * 61 * 2 * 16);
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("[PASS] criterion 2: decide matched the transcription oracle on all {points} grid points in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// 3. LLM scenario reproduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_llm_latency_reproduction() {
    let started = Instant::now();
    let scenario = load("llm.toml");
    assert_eq!(
        toml::to_string(&scenario.controller).unwrap(),
        toml::to_string(&ControllerConfig::default()).unwrap(),
        "the llm preset must run the default controller config"
    );
    let (auto, _) = run_mode(&scenario, None);
    let (cpu, _) = run_mode(&scenario, Some(DeploymentMode::Cpu));

    let switches = switch_sequence(&auto);
    assert_eq!(
        switches.len(),
        1,
        "exactly one switch expected: {switches:?}"
    );
    assert_eq!(switches[0].0, "switch_to_gpu");
    let switch_at = switches[0].1;

    let post: Vec<f64> = auto
        .requests
        .iter()
        .filter(|r| r.arrival_ms > switch_at)
        .map(|r| r.latency_ms)
        .collect();
    let post_p50 = p50(&post);
    assert!(
        (post_p50 - 157.0).abs() / 157.0 <= 0.10,
        "post-switch p50 {post_p50:.2} outside 157ms +/-10%"
    );

    let cpu_p50 = p50(&latencies(&cpu));
    let auto_p50 = p50(&latencies(&auto));
    let reduction = (cpu_p50 - auto_p50) / cpu_p50;
    assert!(
        reduction >= 0.88,
        "end-to-end p50 reduction {:.2}% below 88% (cpu {cpu_p50:.2}, auto {auto_p50:.2})",
        reduction * 100.0
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 3: one promotion at {switch_at:.0}ms, post-switch p50 {post_p50:.2}ms, p50 reduction {:.1}% in {elapsed:?}",
        reduction * 100.0
    );
}

// ---------------------------------------------------------------------------
// 4. Idle scenario reproduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_idle_detour_and_cost_ordering() {
    let scenario = load("idle.toml");
    let (auto, auto_cost) = run_mode(&scenario, None);
    let (cpu, cpu_cost) = run_mode(&scenario, Some(DeploymentMode::Cpu));
    let (gpu, gpu_cost) = run_mode(&scenario, Some(DeploymentMode::Gpu));

    // every mode holds the published median band
    for (name, result) in [("cpu", &cpu), ("gpu", &gpu), ("auto", &auto)] {
        let median = p50(&latencies(result));
        assert!(
            (2074.0..=2141.0).contains(&median),
            "{name} median {median:.2} outside the 2074..2141 band"
        );
    }

    let switches = switch_sequence(&auto);
    let verdicts: Vec<&str> = switches.iter().map(|(v, _)| *v).collect();
    assert_eq!(
        verdicts,
        vec!["switch_to_gpu", "switch_to_cpu"],
        "expected exactly the promotion-then-demotion detour: {switches:?}"
    );

    assert!(
        cpu_cost.total < auto_cost.total && auto_cost.total < gpu_cost.total,
        "cost ordering violated: cpu {:.5} / auto {:.5} / gpu {:.5}",
        cpu_cost.total,
        auto_cost.total,
        gpu_cost.total
    );
    for (name, got, want) in [
        ("cpu", cpu_cost.total, 0.017),
        ("auto", auto_cost.total, 0.03),
        ("gpu", gpu_cost.total, 0.060),
    ] {
        assert!(
            (got - want).abs() / want <= 0.20,
            "{name} total {got:.5} outside {want} +/-20%"
        );
    }
    println!(
        "[PASS] criterion 4: detour [switch_to_gpu@{:.0}ms, switch_to_cpu@{:.0}ms], costs cpu {:.4} < auto {:.4} < gpu {:.4}",
        switches[0].1, switches[1].1, cpu_cost.total, auto_cost.total, gpu_cost.total
    );
}

// ---------------------------------------------------------------------------
// 5. LLM cost reproduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_llm_cost_reproduction() {
    let scenario = load("llm.toml");
    let (_, auto_cost) = run_mode(&scenario, None);
    let (_, cpu_cost) = run_mode(&scenario, Some(DeploymentMode::Cpu));
    let (_, gpu_cost) = run_mode(&scenario, Some(DeploymentMode::Gpu));

    assert!(
        (cpu_cost.total - 0.032).abs() / 0.032 <= 0.05,
        "cpu total {:.5} outside 0.032 +/-5%",
        cpu_cost.total
    );
    assert!(
        (gpu_cost.total - 0.019).abs() / 0.019 <= 0.05,
        "gpu total {:.5} outside 0.019 +/-5%",
        gpu_cost.total
    );
    assert!(
        (auto_cost.total - gpu_cost.total).abs() / gpu_cost.total <= 0.05,
        "adaptive total {:.5} not within 5% of gpu {:.5}",
        auto_cost.total,
        gpu_cost.total
    );
    let summary = compare(&cpu_cost, &gpu_cost, &auto_cost).unwrap();
    assert!(
        (summary.adaptive_savings_vs_cpu_pct - 40.0).abs() <= 5.0,
        "savings vs cpu {:.1}% outside 40 +/-5 points",
        summary.adaptive_savings_vs_cpu_pct
    );
    println!(
        "[PASS] criterion 5: costs cpu {:.5} / gpu {:.5} / adaptive {:.5}, savings {:.1}%",
        cpu_cost.total, gpu_cost.total, auto_cost.total, summary.adaptive_savings_vs_cpu_pct
    );
}

// ---------------------------------------------------------------------------
// 6. Image classification stays on the CPU
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_image_classification_never_switches() {
    let scenario = load("image.toml");
    let (auto, _) = run_mode(&scenario, None);

    assert!(
        auto.switches().is_empty(),
        "image run must never switch: {:?}",
        auto.mode_events
    );
    assert!(auto.requests.iter().all(|r| r.backend == Backend::Cpu));

    let lat = latencies(&auto);
    let median = p50(&lat);
    assert!(
        (median - 145.0).abs() / 145.0 <= 0.10,
        "median {median:.2} far from 145ms"
    );
    let spikes = auto.requests.iter().filter(|r| r.parameter == 1).count();
    let spike_share = spikes as f64 / auto.requests.len() as f64;
    assert!(
        spike_share < 0.01,
        "spikes are {:.2}% of traffic",
        spike_share * 100.0
    );

    println!(
        "[PASS] criterion 6: zero switches, median {median:.2}ms, spikes {:.2}% of {} requests",
        spike_share * 100.0,
        auto.requests.len()
    );
}

// ---------------------------------------------------------------------------
// 7. Matrix sweep
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_matrix_sweep_promotion() {
    let scenario = load("matrix.toml");
    let (auto, _) = run_mode(&scenario, None);
    let (gpu, _) = run_mode(&scenario, Some(DeploymentMode::Gpu));

    let switches = switch_sequence(&auto);
    assert_eq!(
        switches.len(),
        1,
        "exactly one promotion expected: {switches:?}"
    );
    assert_eq!(switches[0].0, "switch_to_gpu");
    let switch_at = switches[0].1;

    // the promotion lands on the first reevaluation whose windowed latency
    // violates the SLO
    let threshold = scenario.controller.latency_threshold_ms;
    let first_violation = auto
        .decisions
        .iter()
        .find(|d| d.latency_ms.is_some_and(|l| l > threshold))
        .expect("a violating tick exists");
    assert_eq!(
        first_violation.at_ms, switch_at,
        "promotion must land on the first violating reevaluation"
    );
    assert_eq!(first_violation.verdict, "switch_to_gpu");

    // GPU utilization is identically zero before the promotion
    let switch_sec = (switch_at / 1000.0).floor() as usize;
    for (sec, v) in auto.series.gpu_pct.iter().enumerate().take(switch_sec) {
        assert_eq!(*v, 0.0, "gpu busy at second {sec} before the promotion");
    }

    // post-promotion latencies track the gpu-pinned run; both runs draw the
    // same per-request jitter, so past the settling window they coincide
    let switch_idx = auto
        .requests
        .iter()
        .position(|r| r.arrival_ms > switch_at)
        .expect("requests after the switch");
    let mut compared = 0;
    for (a, g) in auto
        .requests
        .iter()
        .zip(gpu.requests.iter())
        .skip(switch_idx + 10)
    {
        assert!(
            (a.latency_ms - g.latency_ms).abs() <= 0.01,
            "index {}: adaptive {:.3} vs gpu {:.3}",
            a.index,
            a.latency_ms,
            g.latency_ms
        );
        compared += 1;
    }
    assert!(
        compared > 50,
        "not enough post-promotion samples ({compared})"
    );

    println!(
        "[PASS] criterion 7: one promotion at {switch_at:.0}ms on the first violating tick, gpu series zero before it, {compared} post-switch latencies track the gpu run"
    );
}

// ---------------------------------------------------------------------------
// 8. Hysteresis over stationary traces
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_hysteresis_on_stationary_traces() {
    use gaia_core::sim::{
        GpuSpec, NodeSpec, RequestTrace, ServiceModel, SimInputs, TraceEntry, WorkloadModel,
    };
    use gaia_core::telemetry::{Aggregate, TelemetryConfig};
    use rand_core::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    let cluster = vec![
        NodeSpec {
            node_id: "worker-cpu".into(),
            vcpus: 8,
            ram_gb: 32.0,
            gpu: None,
        },
        NodeSpec {
            node_id: "worker-gpu".into(),
            vcpus: 16,
            ram_gb: 64.0,
            gpu: Some(GpuSpec {
                model: "RTX 3090".into(),
                vram_gb: 24.0,
            }),
        },
    ];
    let mut rng = Pcg64::seed_from_u64(0x6a1a_2024);
    let mut uniform = |lo: f64, hi: f64| {
        let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * unit
    };
    let mut worst = 0usize;
    for case_no in 0u64..200 {
        // five stationary families: SLO-satisfied, GPU-accelerable,
        // equal-backends under sparse traffic, idle GPU deployments, and
        // serial overload held back by the completion-rate gate
        let (mode, cpu_ms, gpu_ms, rate, unbounded) = match case_no % 5 {
            0 => {
                let cpu = uniform(30.0, 450.0);
                let unbounded = case_no % 2 == 0;
                let max_rate = if unbounded {
                    4.0
                } else {
                    (850.0 / cpu).min(4.0)
                };
                (
                    ExecutionMode::CpuPreferred,
                    cpu,
                    uniform(20.0, 450.0),
                    uniform(0.05, max_rate),
                    unbounded,
                )
            }
            1 => {
                let cpu = uniform(950.0, 2500.0);
                (
                    ExecutionMode::CpuPreferred,
                    cpu,
                    uniform(30.0, cpu - 850.0),
                    uniform(1.2, 3.0),
                    true,
                )
            }
            2 => {
                let base = uniform(600.0, 2500.0);
                let mode = if case_no % 2 == 0 {
                    ExecutionMode::CpuPreferred
                } else {
                    ExecutionMode::GpuPreferred
                };
                (
                    mode,
                    base,
                    base + uniform(-20.0, 20.0),
                    uniform(0.05, 0.9),
                    case_no % 3 == 0,
                )
            }
            3 => (
                ExecutionMode::GpuPreferred,
                uniform(50.0, 2000.0),
                uniform(50.0, 2000.0),
                uniform(0.05, 0.45),
                case_no % 2 == 0,
            ),
            _ => (
                ExecutionMode::CpuPreferred,
                uniform(1100.0, 3000.0),
                uniform(1100.0, 3000.0),
                uniform(1.5, 4.0),
                false,
            ),
        };
        let workload = WorkloadModel {
            cpu_service: ServiceModel::Constant { ms: cpu_ms },
            gpu_service: ServiceModel::Constant { ms: gpu_ms },
            cpu_cold_start_ms: 500.0,
            gpu_cold_start_ms: 4000.0,
            cpu_cores_used: 2.0,
            ram_gb_used: 4.0,
            gpu_util_pct: 80.0,
            jitter_pct: 3.0,
            unbounded_concurrency: unbounded,
        };
        let interval = 1000.0 / rate;
        let entries: Vec<TraceEntry> = (0..(420_000.0 / interval) as usize)
            .map(|i| TraceEntry {
                at_ms: i as f64 * interval,
                function_id: "f".into(),
                parameter: 0,
            })
            .collect();
        let mut functions = BTreeMap::new();
        functions.insert("f".to_string(), (mode, workload));
        let inputs = SimInputs {
            cluster: cluster.clone(),
            functions,
            trace: RequestTrace::new(entries).unwrap(),
            controller: ControllerConfig::default(),
            telemetry: TelemetryConfig {
                aggregate: Aggregate::Mean,
                ..TelemetryConfig::default()
            },
            seed: 0x5eed ^ case_no,
        };
        let result = run_trace(&inputs).unwrap();
        let switches = result.switches().len();
        worst = worst.max(switches);
        assert!(
            switches <= 2,
            "case {case_no}: {switches} switches (mode={mode:?} cpu={cpu_ms:.0} gpu={gpu_ms:.0} rate={rate:.2} unbounded={unbounded}): {:?}",
            result.mode_events
        );
    }
    println!("[PASS] criterion 8: 200 stationary traces, at most {worst} switches per trace");
}

// ---------------------------------------------------------------------------
// 9. Determinism at the byte level
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_gaia"))
            .arg("run")
            .arg(scenario_path("idle.toml"))
            .arg("--reps")
            .arg("2")
            .arg("--out")
            .arg(dir.path().join(name))
            .output()
            .expect("gaia run executes");
        assert!(status.status.success());
    }
    let mut checked = 0;
    for sub in ["", "rep_01", "rep_02"] {
        for file in [
            "response_time.csv",
            "cpu.csv",
            "ram.csv",
            "gpu.csv",
            "events.csv",
            "cost.csv",
        ] {
            let a = std::fs::read(dir.path().join("a").join(sub).join(file)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(sub).join(file)).unwrap();
            assert_eq!(a, b, "{sub}/{file} differs between identically seeded runs");
            checked += 1;
        }
    }
    println!("[PASS] criterion 9: {checked} CSV files byte-identical across reruns");
}

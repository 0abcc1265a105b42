//! `gaia run <scenario>`: execute a scenario `repetitions` times with seeds
//! `seed..seed+reps-1`, writing per-run CSVs, mean-aggregated CSVs, and the
//! resolved manifest. Partial outputs are removed on failure.

use std::path::{Path, PathBuf};

use gaia_core::cost::{cost_of, CostReport};
use gaia_core::scenario::{DeploymentMode, ResolvedScenario, ScenarioError, ScenarioSpec};
use gaia_core::sim::{run_trace, ScenarioResult};
use gaia_core::telemetry::Backend;

use crate::output::{cost_csv, events_csv, mean_rows, percentile, response_time_csv, series_csv};
use crate::CliError;

pub fn run(
    scenario_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    reps: Option<u32>,
    mode_override: Option<DeploymentMode>,
) -> Result<(), CliError> {
    let mut scenario = load(scenario_path)?;
    if let Some(seed) = seed {
        scenario.scenario.seed = seed;
    }
    if let Some(reps) = reps {
        if reps == 0 {
            return Err(CliError::Validation("reps must be at least 1".into()));
        }
        scenario.scenario.repetitions = reps;
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(&scenario.scenario.name));
    std::fs::create_dir_all(&out_dir)?;

    match execute(&scenario, &out_dir, mode_override) {
        Ok(()) => Ok(()),
        Err(e) => {
            // no partial results on disk
            let _ = std::fs::remove_dir_all(&out_dir);
            Err(e)
        }
    }
}

fn load(path: &Path) -> Result<ResolvedScenario, CliError> {
    ScenarioSpec::load(path).map_err(|e| match e {
        ScenarioError::Io { .. } => CliError::Runtime(e.to_string()),
        ScenarioError::Parse(_) | ScenarioError::Invalid { .. } => {
            CliError::Validation(e.to_string())
        }
    })
}

fn execute(
    scenario: &ResolvedScenario,
    out_dir: &Path,
    mode_override: Option<DeploymentMode>,
) -> Result<(), CliError> {
    let reps = scenario.scenario.repetitions;
    let base_seed = scenario.scenario.seed;

    println!(
        "scenario `{}`: {} repetitions, seeds {}..={}",
        scenario.scenario.name,
        reps,
        base_seed,
        base_seed + reps as u64 - 1
    );
    for (fid, resolved) in scenario.resolve_modes(mode_override) {
        match &resolved.analysis {
            Some(analysis) => {
                if let Some(warning) = &analysis.parse_warning {
                    eprintln!("warning: {fid}: {warning}; classified as cpu");
                }
                println!(
                    "function {fid}: analyzed -> {} ({})",
                    resolved.mode, analysis.report.reason
                );
            }
            None => println!("function {fid}: pinned -> {}", resolved.mode),
        }
    }

    let mut results: Vec<ScenarioResult> = Vec::with_capacity(reps as usize);
    let mut reports: Vec<CostReport> = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let (inputs, _) = scenario.sim_inputs(mode_override, base_seed + rep as u64);
        let result = run_trace(&inputs).map_err(|e| CliError::Validation(e.to_string()))?;
        let report =
            cost_of(&result, &scenario.prices).map_err(|e| CliError::Runtime(e.to_string()))?;
        let rep_dir = out_dir.join(format!("rep_{:02}", rep + 1));
        std::fs::create_dir_all(&rep_dir)?;
        write_result_csvs(&rep_dir, &result, &report)?;
        summarize(rep + 1, &result, &report);
        results.push(result);
        reports.push(report);
    }

    write_mean_csvs(out_dir, &results, &reports)?;
    std::fs::write(out_dir.join("manifest.toml"), scenario.to_toml())?;
    println!("results written to {}", out_dir.display());
    Ok(())
}

fn write_result_csvs(
    dir: &Path,
    result: &ScenarioResult,
    report: &CostReport,
) -> Result<(), CliError> {
    std::fs::write(dir.join("response_time.csv"), response_time_csv(result))?;
    std::fs::write(
        dir.join("cpu.csv"),
        series_csv("cpu_cores", &result.series.cpu_cores),
    )?;
    std::fs::write(
        dir.join("ram.csv"),
        series_csv("ram_gb", &result.series.ram_gb),
    )?;
    std::fs::write(
        dir.join("gpu.csv"),
        series_csv("gpu_pct", &result.series.gpu_pct),
    )?;
    std::fs::write(dir.join("events.csv"), events_csv(result))?;
    std::fs::write(dir.join("cost.csv"), cost_csv(report))?;
    Ok(())
}

/// Mean-aggregated CSVs at the top of the output directory. Latency and
/// utilization series average per index; events come from the first
/// repetition (decisions are seed-stable for the shipped presets); cost rows
/// average per (function, backend).
fn write_mean_csvs(
    out_dir: &Path,
    results: &[ScenarioResult],
    reports: &[CostReport],
) -> Result<(), CliError> {
    let first = &results[0];

    let latencies: Vec<Vec<f64>> = results
        .iter()
        .map(|r| r.requests.iter().map(|q| q.latency_ms).collect())
        .collect();
    let mean_latency = mean_rows(&latencies);
    let mut response = String::from("Index,response_time,backend\n");
    for (i, latency) in mean_latency.iter().enumerate() {
        let backend = first
            .requests
            .get(i)
            .map(|r| r.backend.as_str())
            .unwrap_or("cpu");
        response.push_str(&format!("{i},{latency:.3},{backend}\n"));
    }
    std::fs::write(out_dir.join("response_time.csv"), response)?;

    for (name, pick) in [("cpu.csv", 0usize), ("ram.csv", 1), ("gpu.csv", 2)] {
        let series: Vec<Vec<f64>> = results
            .iter()
            .map(|r| match pick {
                0 => r.series.cpu_cores.clone(),
                1 => r.series.ram_gb.clone(),
                _ => r.series.gpu_pct.clone(),
            })
            .collect();
        let header = match pick {
            0 => "cpu_cores",
            1 => "ram_gb",
            _ => "gpu_pct",
        };
        std::fs::write(out_dir.join(name), series_csv(header, &mean_rows(&series)))?;
    }

    std::fs::write(out_dir.join("events.csv"), events_csv(first))?;

    let mut keys: Vec<(String, Backend)> = Vec::new();
    for report in reports {
        for key in report.per_backend.keys() {
            if !keys.contains(key) {
                keys.push(key.clone());
            }
        }
    }
    keys.sort();
    let mut cost = String::from("function_id,backend,seconds,cost\n");
    for key in keys {
        let entries: Vec<_> = reports
            .iter()
            .filter_map(|r| r.per_backend.get(&key))
            .collect();
        let seconds = entries.iter().map(|e| e.busy_seconds).sum::<f64>() / entries.len() as f64;
        let money = entries.iter().map(|e| e.cost).sum::<f64>() / entries.len() as f64;
        cost.push_str(&format!("{},{},{seconds:.3},{money:.8}\n", key.0, key.1));
    }
    std::fs::write(out_dir.join("cost.csv"), cost)?;
    Ok(())
}

fn summarize(rep: u32, result: &ScenarioResult, report: &CostReport) {
    let latencies: Vec<f64> = result.requests.iter().map(|r| r.latency_ms).collect();
    let p50 = if latencies.is_empty() {
        0.0
    } else {
        percentile(&latencies, 0.5)
    };
    let switches: Vec<String> = result
        .mode_events
        .iter()
        .map(|e| match e {
            gaia_core::sim::ModeEvent::Switched { at_ms, to, .. } => {
                format!("switch_to_{to}@{at_ms:.0}ms")
            }
            gaia_core::sim::ModeEvent::Failed { at_ms, target, .. } => {
                format!("failed_switch_to_{target}@{at_ms:.0}ms")
            }
        })
        .collect();
    println!(
        "rep {rep}: {} requests, p50 {:.2}ms, cost {:.5} {}, switches: [{}]",
        result.requests.len(),
        p50,
        report.total,
        report.currency,
        switches.join(", ")
    );
}

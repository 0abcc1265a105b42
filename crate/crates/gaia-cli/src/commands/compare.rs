//! `gaia compare`: side-by-side latency distributions and cost totals for
//! cpu-pinned, gpu-pinned, and adaptive runs of the same trace.

use std::collections::BTreeMap;
use std::path::Path;

use gaia_core::cost::{compare as compare_costs, CostReport};

use crate::output::{percentile, read_column, read_cost_total};
use crate::plot;
use crate::CliError;

struct ModeData {
    label: &'static str,
    latencies: Vec<f64>,
    cost_total: f64,
}

fn load(label: &'static str, dir: &Path) -> Result<ModeData, CliError> {
    let latencies = read_column(&dir.join("response_time.csv"), 1)?;
    let cost_total = read_cost_total(&dir.join("cost.csv"))?;
    Ok(ModeData {
        label,
        latencies,
        cost_total,
    })
}

fn report_stub(data: &ModeData) -> CostReport {
    CostReport {
        currency: "USD".into(),
        total: data.cost_total,
        per_function: BTreeMap::new(),
        per_backend: BTreeMap::new(),
        timeline: Vec::new(),
        request_count: data.latencies.len(),
    }
}

pub fn run(
    cpu_dir: &Path,
    gpu_dir: &Path,
    auto_dir: &Path,
    plot_path: Option<&Path>,
) -> Result<(), CliError> {
    let modes = [
        load("CPU", cpu_dir)?,
        load("GPU", gpu_dir)?,
        load("Gaia", auto_dir)?,
    ];

    let summary = compare_costs(
        &report_stub(&modes[0]),
        &report_stub(&modes[1]),
        &report_stub(&modes[2]),
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;

    println!("latency (ms)        min       p25       p50       p75       max");
    for m in &modes {
        if m.latencies.is_empty() {
            return Err(CliError::Validation(format!(
                "{} run has no requests",
                m.label
            )));
        }
        let min = m.latencies.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = m.latencies.iter().cloned().fold(0.0f64, f64::max);
        println!(
            "{:<10} {:>12.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
            m.label,
            min,
            percentile(&m.latencies, 0.25),
            percentile(&m.latencies, 0.50),
            percentile(&m.latencies, 0.75),
            max
        );
    }

    println!();
    println!("cost (USD)");
    println!("CPU        {:>12.5}", summary.cpu_total);
    println!("GPU        {:>12.5}", summary.gpu_total);
    println!("Gaia       {:>12.5}", summary.adaptive_total);
    println!("cheapest: {}", summary.cheapest);
    println!(
        "Gaia vs CPU: {:+.1}% | Gaia vs GPU: {:+.1}% | GPU vs CPU: {:+.1}%",
        summary.adaptive_savings_vs_cpu_pct,
        summary.adaptive_savings_vs_gpu_pct,
        summary.gpu_savings_vs_cpu_pct
    );

    if let Some(path) = plot_path {
        let series: Vec<(&str, &[f64])> = modes
            .iter()
            .map(|m| (m.label, m.latencies.as_slice()))
            .collect();
        std::fs::write(path, plot::latency_svg(&series))?;
        println!("plot written to {}", path.display());
    }
    Ok(())
}

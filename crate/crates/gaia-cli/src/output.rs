//! The six result CSVs a run directory carries, plus readers for compare.
//!
//! All floating-point columns use fixed decimal precision so identical runs
//! produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use gaia_core::cost::CostReport;
use gaia_core::sim::ScenarioResult;

use crate::CliError;

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

/// Commas inside free-text fields would break the line format.
fn sanitize(text: &str) -> String {
    text.replace(',', ";")
}

pub fn response_time_csv(result: &ScenarioResult) -> String {
    let mut out = String::from("Index,response_time,backend\n");
    for r in &result.requests {
        let _ = writeln!(out, "{},{:.3},{}", r.index, r.latency_ms, r.backend);
    }
    out
}

pub fn series_csv(header: &str, values: &[f64]) -> String {
    let mut out = format!("Index,{header}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{i},{v:.4}");
    }
    out
}

pub fn events_csv(result: &ScenarioResult) -> String {
    let mut out = String::from(
        "timestamp_ms,function_id,verdict,rationale,request_rate,latency_ms,saved_cpu_latency,saved_gpu_latency\n",
    );
    for d in &result.decisions {
        let _ = writeln!(
            out,
            "{:.0},{},{},{},{:.4},{},{},{}",
            d.at_ms,
            d.function_id,
            d.verdict,
            sanitize(&d.rationale),
            d.request_rate,
            opt(d.latency_ms),
            opt(d.saved_cpu_latency),
            opt(d.saved_gpu_latency),
        );
    }
    out
}

pub fn cost_csv(report: &CostReport) -> String {
    let mut out = String::from("function_id,backend,seconds,cost\n");
    for ((fid, backend), entry) in &report.per_backend {
        let _ = writeln!(
            out,
            "{fid},{backend},{:.3},{:.8}",
            entry.busy_seconds, entry.cost
        );
    }
    out
}

/// Arithmetic mean of per-index values across repetitions; rows missing in
/// some repetition average over the repetitions that have them.
pub fn mean_rows(per_rep: &[Vec<f64>]) -> Vec<f64> {
    let longest = per_rep.iter().map(|v| v.len()).max().unwrap_or(0);
    (0..longest)
        .map(|i| {
            let values: Vec<f64> = per_rep
                .iter()
                .filter_map(|rep| rep.get(i).copied())
                .collect();
            values.iter().sum::<f64>() / values.len() as f64
        })
        .collect()
}

/// Parse a `Index,value[,...]` CSV column as f64.
pub fn read_column(path: &Path, column: usize) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read `{}`: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let field = line.split(',').nth(column).ok_or_else(|| {
            CliError::Validation(format!(
                "`{}` line {} has no column {column}",
                path.display(),
                lineno + 1
            ))
        })?;
        let value: f64 = field.parse().map_err(|_| {
            CliError::Validation(format!(
                "`{}` line {}: `{field}` is not a number",
                path.display(),
                lineno + 1
            ))
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Sum of the cost column of a cost.csv.
pub fn read_cost_total(path: &Path) -> Result<f64, CliError> {
    Ok(read_column(path, 3)?.iter().sum())
}

/// Nearest-rank percentile over unsorted values.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

//! `gaia analyze <source>`: run the execution-mode analyzer on one file and
//! print the manifest annotation block.

use std::path::Path;

use gaia_core::analyzer::{analyze_lenient, analyze_source, AnalyzerConfig, SourceUnit};

use crate::CliError;

pub fn run(
    source: &Path,
    strict_parse: bool,
    big_op_threshold: Option<u64>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(source)
        .map_err(|e| CliError::Runtime(format!("cannot read `{}`: {e}", source.display())))?;
    let name = source
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("function")
        .replace(|c: char| !c.is_alphanumeric() && c != '_', "_");
    let unit = SourceUnit::new(name, text).map_err(|e| CliError::Validation(e.to_string()))?;

    let mut cfg = AnalyzerConfig::default();
    if let Some(t) = big_op_threshold {
        cfg.big_op_threshold = t;
    }

    if strict_parse {
        let report =
            analyze_source(&unit, &cfg).map_err(|e| CliError::Validation(e.to_string()))?;
        print!("{}", report.annotation_block());
        return Ok(());
    }

    let outcome = analyze_lenient(&unit, &cfg);
    if let Some(warning) = &outcome.parse_warning {
        eprintln!("warning: {warning}; classified as cpu");
    }
    print!("{}", outcome.report.annotation_block());
    Ok(())
}

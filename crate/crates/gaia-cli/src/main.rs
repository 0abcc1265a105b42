//! `gaia` — deploy-time execution-mode analysis and SLO-driven CPU/GPU
//! adaptation, exercised against a simulated heterogeneous cluster.
//!
//! Exit codes: 0 success, 1 usage, 2 spec/input validation, 3 runtime
//! failure.

mod commands;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gaia_core::scenario::DeploymentMode;

#[derive(Debug, Parser)]
#[command(
    name = "gaia",
    version,
    about = "Hybrid CPU/GPU acceleration for serverless functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify a function source and print its annotation block
    Analyze {
        /// Path to the function source file
        source: PathBuf,
        /// Fail (exit 2) on syntax errors instead of classifying as cpu
        #[arg(long)]
        strict_parse: bool,
        /// Element count at which a tensor operation counts as big
        #[arg(long)]
        big_op_threshold: Option<u64>,
    },
    /// Run a scenario file and write per-run and mean-aggregated CSVs
    Run {
        /// Path to the scenario TOML file
        scenario: PathBuf,
        /// Output directory (default: out/<scenario-name>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the repetition count
        #[arg(long)]
        reps: Option<u32>,
        /// Pin every function to one mode instead of the scenario's choice
        #[arg(long, value_parser = clap::value_parser!(DeploymentModeArg))]
        deployment_mode: Option<DeploymentModeArg>,
    },
    /// Compare cpu, gpu, and auto runs of the same trace
    Compare {
        /// Output directory of the cpu-pinned run
        #[arg(long)]
        cpu: PathBuf,
        /// Output directory of the gpu-pinned run
        #[arg(long)]
        gpu: PathBuf,
        /// Output directory of the adaptive run
        #[arg(long)]
        auto: PathBuf,
        /// Also write latency line and box summaries as an SVG
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy)]
struct DeploymentModeArg(DeploymentMode);

impl std::str::FromStr for DeploymentModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(DeploymentModeArg)
    }
}

/// Failure classes mapped to exit codes 2 and 3.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes, everything else is usage
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze {
            source,
            strict_parse,
            big_op_threshold,
        } => commands::analyze::run(&source, strict_parse, big_op_threshold),
        Command::Run {
            scenario,
            out,
            seed,
            reps,
            deployment_mode,
        } => commands::run::run(&scenario, out, seed, reps, deployment_mode.map(|m| m.0)),
        Command::Compare {
            cpu,
            gpu,
            auto,
            plot,
        } => commands::compare::run(&cpu, &gpu, &auto, plot.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

//! Deploy-time execution-mode identification.
//!
//! Parses a function's source (a Python-syntax subset), raises four detection
//! flags — deep-learning imports, explicit GPU calls, big and small tensor
//! operations — and classifies the function into one of four execution modes
//! through a fixed decision hierarchy: explicit GPU usage wins, then large
//! tensor ops, then small ops or bare imports, and plain code stays on CPU.

pub mod ast;
pub mod scan;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{Ast, SyntaxError, UnsupportedConstruct};
pub use scan::{estimate_tensor_elements, scan_flags, AnalyzerConfig, Bindings, CensusEntry};

/// A function source ready for analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub function_name: String,
    pub source_text: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SourceUnitError {
    #[error("source_text is empty")]
    EmptySource,
    #[error("function_name `{0}` is not a valid identifier")]
    InvalidName(String),
}

impl SourceUnit {
    pub fn new(
        function_name: impl Into<String>,
        source_text: impl Into<String>,
    ) -> Result<Self, SourceUnitError> {
        let function_name = function_name.into();
        let source_text = source_text.into();
        if source_text.is_empty() {
            return Err(SourceUnitError::EmptySource);
        }
        let mut chars = function_name.chars();
        let head_ok = chars.next().is_some_and(|c| c.is_alphabetic() || c == '_');
        if !head_ok
            || !function_name
                .chars()
                .all(|c| c.is_alphanumeric() || c == '_')
        {
            return Err(SourceUnitError::InvalidName(function_name));
        }
        Ok(SourceUnit {
            function_name,
            source_text,
        })
    }
}

/// The four detection flags Algorithm-style traversal raises. Both op flags
/// may be true at once; the decision hierarchy resolves the conflict.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionFlags {
    pub dl_import: bool,
    pub gpu_explicit: bool,
    pub big_ops: bool,
    pub small_ops: bool,
}

impl fmt::Display for DetectionFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dl_import={},gpu_explicit={},big_ops={},small_ops={}",
            self.dl_import, self.gpu_explicit, self.big_ops, self.small_ops
        )
    }
}

/// Execution mode of a deployed function. `Cpu` and `Gpu` are pinned; the
/// preferred modes are eligible for runtime promotion and demotion. The
/// ordering reflects acceleration level and is used for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    Cpu,
    CpuPreferred,
    GpuPreferred,
    Gpu,
}

impl ExecutionMode {
    /// Pinned modes never adapt at runtime.
    pub fn is_pinned(self) -> bool {
        matches!(self, ExecutionMode::Cpu | ExecutionMode::Gpu)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExecutionMode::Cpu => "cpu",
            ExecutionMode::CpuPreferred => "cpu_preferred",
            ExecutionMode::GpuPreferred => "gpu_preferred",
            ExecutionMode::Gpu => "gpu",
        }
    }
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExecutionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cpu" => Ok(ExecutionMode::Cpu),
            "cpu_preferred" => Ok(ExecutionMode::CpuPreferred),
            "gpu_preferred" => Ok(ExecutionMode::GpuPreferred),
            "gpu" => Ok(ExecutionMode::Gpu),
            other => Err(format!("unknown execution mode `{other}`")),
        }
    }
}

/// The five canonical classification reasons.
pub const REASON_EXPLICIT: &str = "explicit GPU usage";
pub const REASON_LARGE_OPS: &str = "large tensor ops";
pub const REASON_SMALL_OPS: &str = "small tensor ops";
pub const REASON_IMPORTS_ONLY: &str = "imports only";
pub const REASON_NO_ACTIVITY: &str = "no GPU-related activity";

/// Classifier output: mode, canonical reason, the flags that produced it,
/// and the tensor-operation census observed during traversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub mode: ExecutionMode,
    pub reason: String,
    pub flags: DetectionFlags,
    pub op_census: Vec<CensusEntry>,
}

impl AnalysisReport {
    /// Line-oriented key=value block suitable for embedding in a deployment
    /// manifest as annotations.
    pub fn annotation_block(&self) -> String {
        format!(
            "gaia.mode={}\ngaia.reason={}\ngaia.flags={}\n",
            self.mode, self.reason, self.flags
        )
    }
}

/// Decision hierarchy over the flag space. Total: every combination maps to
/// exactly one (mode, reason) pair.
pub fn classify(flags: DetectionFlags) -> (ExecutionMode, &'static str) {
    if flags.gpu_explicit {
        (ExecutionMode::Gpu, REASON_EXPLICIT)
    } else if flags.dl_import && flags.big_ops {
        (ExecutionMode::GpuPreferred, REASON_LARGE_OPS)
    } else if flags.dl_import && flags.small_ops && !flags.big_ops {
        (ExecutionMode::CpuPreferred, REASON_SMALL_OPS)
    } else if flags.dl_import {
        (ExecutionMode::CpuPreferred, REASON_IMPORTS_ONLY)
    } else {
        (ExecutionMode::Cpu, REASON_NO_ACTIVITY)
    }
}

/// Parse tree for a source unit. Unsupported constructs surface as warnings
/// on the returned tree; only malformed input is an error.
pub fn parse_source(src: &SourceUnit) -> Result<Ast, SyntaxError> {
    ast::parse(&src.source_text)
}

/// Full pipeline: parse, scan, classify.
pub fn analyze_source(
    src: &SourceUnit,
    cfg: &AnalyzerConfig,
) -> Result<AnalysisReport, SyntaxError> {
    let tree = parse_source(src)?;
    let (flags, op_census) = scan_flags(&tree, cfg);
    let (mode, reason) = classify(flags);
    Ok(AnalysisReport {
        mode,
        reason: reason.to_string(),
        flags,
        op_census,
    })
}

/// Analysis outcome under the advisory policy: unparsable sources classify
/// as plain CPU with the syntax error attached as a warning instead of
/// failing the deployment.
#[derive(Debug, Clone)]
pub struct LenientAnalysis {
    pub report: AnalysisReport,
    pub parse_warning: Option<SyntaxError>,
}

pub fn analyze_lenient(src: &SourceUnit, cfg: &AnalyzerConfig) -> LenientAnalysis {
    match analyze_source(src, cfg) {
        Ok(report) => LenientAnalysis {
            report,
            parse_warning: None,
        },
        Err(err) => LenientAnalysis {
            report: AnalysisReport {
                mode: ExecutionMode::Cpu,
                reason: REASON_NO_ACTIVITY.to_string(),
                flags: DetectionFlags::default(),
                op_census: Vec::new(),
            },
            parse_warning: Some(err),
        },
    }
}

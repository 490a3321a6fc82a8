//! Batch runner for khessian experiments.
//!
//! A run is one JSON config. Outputs land in
//! `<outdir>/<command>/<config hash>/` as `report.json` plus CSV tables.
//! Exit status: 0 when every check passes, 1 on a failed check or a compute
//! error, 2 on an invalid config (nothing is written in that case).

pub mod commands;
pub mod config;
pub mod report;
pub mod table;

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::RunConfig;
pub use report::{Check, RunReport, Status};
pub use table::{emit_csv, Cell, Table};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const OUTPUT_ENV: &str = "KHESSIAN_OUTPUT_DIR";
pub const DEFAULT_OUTPUT: &str = "results";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("compute error: {0}")]
    Compute(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<khessian_core::Error> for CliError {
    fn from(e: khessian_core::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

pub fn version() -> String {
    format!("khessian-{}", env!("CARGO_PKG_VERSION"))
}

/// First 16 hex digits of the SHA-256 of the canonical config.
pub fn config_hash(c: &RunConfig) -> String {
    let digest = Sha256::digest(c.canonical().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug)]
pub struct RunOutput {
    pub exit_code: i32,
    pub dir: Option<PathBuf>,
    pub report: Option<RunReport>,
    pub message: Option<String>,
}

/// Parses, validates and runs a config. `output` replaces the configured
/// output directory.
pub fn run_text(text: &str, output: Option<&Path>) -> RunOutput {
    match RunConfig::parse(text) {
        Ok(c) => run(&c, output),
        Err(e) => RunOutput {
            exit_code: EXIT_CONFIG,
            dir: None,
            report: None,
            message: Some(e.to_string()),
        },
    }
}

pub fn output_dir(c: &RunConfig, output: Option<&Path>) -> PathBuf {
    let base = output
        .map(Path::to_path_buf)
        .or_else(|| c.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    base.join(c.command.name()).join(config_hash(c))
}

pub fn run(c: &RunConfig, output: Option<&Path>) -> RunOutput {
    if let Err(e) = c.validate() {
        return RunOutput {
            exit_code: EXIT_CONFIG,
            dir: None,
            report: None,
            message: Some(e.to_string()),
        };
    }
    let dir = output_dir(c, output);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return RunOutput {
            exit_code: EXIT_FAIL,
            dir: None,
            report: None,
            message: Some(format!("cannot create {}: {e}", dir.display())),
        };
    }
    let echo = serde_json::to_value(c).expect("config serializes");
    let mut report = RunReport::new(c.command.name(), echo, config_hash(c));
    let result = commands::dispatch(c, &dir, &mut report);
    report.finish(result);
    let mut message = report.error.clone();
    if let Err(e) = report::emit_summary(&report, &dir) {
        message = Some(e.to_string());
    }
    let exit_code = if message.is_none() && report.outcome == report::Outcome::Pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    };
    RunOutput {
        exit_code,
        dir: Some(dir),
        report: Some(report),
        message,
    }
}

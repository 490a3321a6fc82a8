use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Reported,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Pass iff `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::verdict(name, value <= threshold, Some(value), Some(threshold))
    }

    /// Pass iff `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self::verdict(name, value > threshold, Some(value), Some(threshold))
    }

    pub fn verdict(name: &str, pass: bool, value: Option<f64>, threshold: Option<f64>) -> Self {
        Self {
            name: name.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            value: value.filter(|v| v.is_finite()),
            threshold,
            detail: None,
        }
    }

    pub fn reported(name: &str, value: Option<f64>) -> Self {
        Self {
            name: name.into(),
            status: Status::Reported,
            value: value.filter(|v| v.is_finite()),
            threshold: None,
            detail: None,
        }
    }

    pub fn skipped(name: &str, why: &str) -> Self {
        Self {
            name: name.into(),
            status: Status::Skipped,
            value: None,
            threshold: None,
            detail: Some(why.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub stages: Vec<Stage>,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value, config_hash: String) -> Self {
        Self {
            version: crate::version(),
            command: command.into(),
            config_hash,
            config,
            outcome: Outcome::Pass,
            checks: Vec::new(),
            stages: Vec::new(),
            files: Vec::new(),
            error: None,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Runs `f` and records its wall-clock time under `name`.
    pub fn stage<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<R, CliError>) -> Result<R, CliError> {
        let start = Instant::now();
        let out = f(self);
        self.stages.push(Stage {
            name: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
    }

    pub fn finish(&mut self, result: Result<(), CliError>) {
        self.outcome = match result {
            Err(e) => {
                self.error = Some(e.to_string());
                Outcome::Error
            }
            Ok(()) if self.failed() => Outcome::Fail,
            Ok(()) => Outcome::Pass,
        };
    }
}

/// Pretty JSON; keys follow declaration order, the config echo is sorted.
pub fn emit_summary(report: &RunReport, dir: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| CliError::Compute(e.to_string()))?;
    text.push('\n');
    std::fs::write(dir.join("report.json"), text)?;
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use khessian_cli::{report::Status, run_text, EXIT_CONFIG, OUTPUT_ENV};

/// Run one khessian experiment described by a JSON config.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    /// Path to the JSON config.
    config: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let output = std::env::var_os(OUTPUT_ENV).map(PathBuf::from);
    let out = run_text(&text, output.as_deref());
    if let Some(report) = &out.report {
        for c in &report.checks {
            let status = match c.status {
                Status::Pass => "pass",
                Status::Fail => "FAIL",
                Status::Skipped => "skip",
                Status::Reported => "info",
            };
            let value = c.value.map_or(String::from("-"), |v| format!("{v:.6e}"));
            let threshold = c.threshold.map_or(String::new(), |t| format!(" (threshold {t:.3e})"));
            println!("{status:>4}  {:<40} {value}{threshold}", c.name);
        }
    }
    if let Some(dir) = &out.dir {
        println!("output: {}", dir.display());
    }
    if let Some(m) = &out.message {
        eprintln!("{m}");
    }
    ExitCode::from(out.exit_code as u8)
}

//! Batch front end for `regdir-core`: read a scenario, run one command, write
//! a JSON or CSV report.
//!
//! Exit codes: 0 computed (and passed, for verifiers), 1 verification failed,
//! 2 invalid input, 3 inconclusive.

pub mod emit;
pub mod run;
pub mod scenario;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub use emit::Format;
pub use run::{Command, Report, Status};
pub use scenario::{Axis, Overrides, SchemaError};

#[derive(Debug, Parser)]
#[command(name = "regdir", version, about = "Boundary limits and regular directions of rigged operators")]
pub struct Args {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum)]
    pub command: Command,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Convergence tolerance of boundary limits.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Comma-separated anchor couplings.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub anchors: Option<Vec<f64>>,
    /// Resonance window as A:B.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Sweep axis.
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    /// Sweep range as START:STOP:POINTS.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
    pub range: Option<(f64, f64, usize)>,
    /// Record wall-clock time in the report. Off by default so that reports
    /// are reproducible byte for byte.
    #[arg(long)]
    pub timing: bool,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err("expected START:STOP:POINTS".into());
    };
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
        n.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

impl Args {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            tol: self.tol,
            anchors: self.anchors.clone(),
            window: self.window,
            axis: self.axis,
            range: self.range,
        }
    }
}

/// Runs one invocation and returns the process exit code. Errors go to
/// `stderr`.
pub fn execute(args: &Args, stderr: &mut dyn Write) -> i32 {
    let started = Instant::now();
    let text = match std::fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot read {}: {e}", args.scenario.display());
            return 2;
        }
    };
    let report = scenario::parse_str(&text, &args.overrides())
        .map_err(run::RunError::from)
        .and_then(|s| run::run(&s, args.command));
    let mut report = match report {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    if args.timing {
        report.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
    }
    let bytes = emit::emit(&report, args.format);
    let written = match &args.out {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().write_all(&bytes),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write report: {e}");
        return 2;
    }
    report.status.exit_code()
}

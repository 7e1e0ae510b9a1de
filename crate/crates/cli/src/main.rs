#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod runner;

use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Mode, Overrides, RunConfig};

/// Cooling and self-similar profile experiments for granular gases with an
/// energy-dependent collision rate.
#[derive(Debug, Parser)]
#[command(name = "granular", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Physical-variable cooling run
    Simulate(Overrides),
    /// Drift-collision run in self-similar variables
    Rescaled(Overrides),
    /// Physical and rescaled runs checked against the frame change
    Coupled(Overrides),
    /// Cooling-law fit of a fresh run or of an existing series CSV
    Fit(Overrides),
    /// Exponential approach of a rescaled run to its terminal profile
    Convergence(Overrides),
    /// Run whatever mode the config file names
    Run(Overrides),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, flags) = match cli.command {
        Command::Simulate(o) => (Some(Mode::Physical), o),
        Command::Rescaled(o) => (Some(Mode::Rescaled), o),
        Command::Coupled(o) => (Some(Mode::Coupled), o),
        Command::Fit(o) => (Some(Mode::Fit), o),
        Command::Convergence(o) => (Some(Mode::Convergence), o),
        Command::Run(o) => (None, o),
    };
    let cfg = match RunConfig::from_sources(mode, &flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match runner::execute(&cfg) {
        Ok(summary) => {
            let _ = report(&cfg, &summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn report(cfg: &RunConfig, summary: &runner::Summary) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "mode: {}", summary.mode)?;
    writeln!(out, "config hash: {}", summary.config_hash)?;
    if let Some(h) = summary.halt_reason {
        writeln!(out, "halt: {h}")?;
    }
    if let serde_json::Value::Object(m) = &summary.results {
        for (k, v) in m {
            writeln!(out, "{k}: {v}")?;
        }
    }
    for p in runner::artifact_paths(cfg, summary) {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

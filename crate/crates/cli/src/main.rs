//! `combmem <command> --scenario <file> [--out <dir>] [--threads <n>]`
//!
//! Exit status: 0 on success, 2 for an invalid scenario, 3 when the
//! numerics fail, 1 when artifacts cannot be written.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    /// Reflection spectrum r(ω).
    Spectrum,
    /// One echo experiment: trace and echo report.
    Simulate,
    /// Echo timing and efficiency across comb spacings.
    Sweep,
    /// Search the κ that maximises the first echo.
    Match,
    /// Fit g, γ, γ_r or κ to a target efficiency and echo time.
    Fit,
    /// Matched versus open (over-coupled) device.
    Compare,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::Spectrum => "spectrum",
            Cmd::Simulate => "simulate",
            Cmd::Sweep => "sweep",
            Cmd::Match => "match",
            Cmd::Fit => "fit",
            Cmd::Compare => "compare",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "combmem", version, about = "Multiresonator photon-echo memory simulator")]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and searches.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &Args) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| CliError::Validation(vec![format!("{}: {e}", args.scenario.display())]))?;
    let sc = scenario::parse(&text, args.command.name())?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Validation(vec!["--threads: must be at least 1".into()]));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    let dir = args
        .out
        .clone()
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = commands::run(&sc)?;
    let paths = output::write_all(&dir, &outcome.artifacts)?;
    Ok(commands::summary(sc.command.name(), &outcome.figures, &paths))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("combmem: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

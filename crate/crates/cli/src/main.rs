//! `rsi`: batch front end for the CES research-production model.
//!
//! Subcommands: `estimate` (panel regressions in the published table
//! layout), `simulate` (algorithm-quality trajectories with explosion
//! verdicts), `sweep` (phase diagrams over the parameter grid), `synth`
//! (synthetic panels from known parameters), `plotdata` (time-trend and
//! added-variable series).
//!
//! Exit codes: 0 success, 1 usage error, 2 data/validation error,
//! 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rsi_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            // Bad parameter values reach core as domain errors.
            CoreError::Domain(m) => CliError::Usage(format!("invalid parameter: {m}")),
            CoreError::Validation(_) | CoreError::Parse { .. } | CoreError::Io(_) => {
                CliError::Data(e.to_string())
            }
            CoreError::Computation(m) => CliError::Numeric(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Table,
    Csv,
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OutputFormat::Json => "json",
            OutputFormat::Table => "table",
            OutputFormat::Csv => "csv",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rsi", version, about = "CES research-production model toolkit")]
pub struct Cli {
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every stochastic step (bootstrap, synthetic generation).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path stem; artifacts are written as `<out>.<ext>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Primary output format where a command supports several.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the elasticity of substitution from a panel file.
    Estimate(commands::EstimateArgs),
    /// Integrate the algorithm-quality law of motion and classify it.
    Simulate(commands::SimulateArgs),
    /// Classify a parameter grid analytically (optionally numerically).
    Sweep(commands::SweepArgs),
    /// Generate a synthetic panel from known parameters.
    Synth(commands::SynthArgs),
    /// Emit plot-ready series: time trends or added-variable pairs.
    Plotdata(commands::PlotdataArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut resolver = config::Resolver::new(cli.config.as_deref())?;
    let seed = resolver.get("seed", cli.seed, 0)?;
    let out_stem = cli.out.clone();
    let format = resolver.get(
        "format",
        cli.format,
        match &cli.command {
            Command::Estimate(_) => OutputFormat::Table,
            _ => OutputFormat::Csv,
        },
    )?;

    match cli.command {
        Command::Estimate(args) => {
            commands::estimate(args, &mut resolver, seed, out_stem, format)
        }
        Command::Simulate(args) => commands::simulate(args, &mut resolver, out_stem),
        Command::Sweep(args) => commands::sweep(args, &mut resolver, out_stem),
        Command::Synth(args) => commands::synth(args, &mut resolver, seed, out_stem),
        Command::Plotdata(args) => commands::plotdata(args, &mut resolver, out_stem),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("data error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

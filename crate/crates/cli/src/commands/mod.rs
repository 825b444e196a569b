//! Command implementations. Every artifact embeds the resolved run
//! configuration: JSON artifacts carry a `config` object, delimited-text
//! artifacts a `# key = value` preamble that the bundled loaders skip.

mod data;
mod model;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use data::{plotdata, synth, PlotdataArgs, SynthArgs};
pub use model::{simulate, sweep, SimulateArgs, SweepArgs};

use clap::Args;
use serde::Serialize;

use rsi_core::econometrics::{
    self, fit, monte_carlo_se, report, RegressionSpec, SampleFilter, Specification,
};
use rsi_core::panel::{self, CpiTable, DeriveOptions, PanelObservation, PanelSchema};

use crate::config::Resolver;
use crate::{CliError, OutputFormat};

pub(crate) fn out_stem(out: Option<PathBuf>, default: &str) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(default))
}

pub(crate) fn artifact(stem: &Path, ext: &str) -> PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(".");
    p.push(ext);
    PathBuf::from(p)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::Data(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

pub(crate) fn load_panel_file(
    path: &Path,
    salary_share: f64,
) -> Result<Vec<PanelObservation>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open panel {}: {e}", path.display())))?;
    let schema = PanelSchema { salary_share, ..PanelSchema::default() };
    Ok(panel::load_panel(file, &schema)?)
}

pub(crate) fn load_cpi_file(path: &Path) -> Result<CpiTable, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open CPI table {}: {e}", path.display())))?;
    Ok(CpiTable::from_csv(file)?)
}

pub(crate) fn parse_specification(name: &str) -> Result<Specification, CliError> {
    match name {
        "baseline" => Ok(Specification::Baseline),
        "frontier" => Ok(Specification::Frontier),
        other => Err(CliError::Usage(format!(
            "unknown specification {other:?}; expected baseline or frontier"
        ))),
    }
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Panel file (delimited text with the declared header).
    pub panel: PathBuf,
    /// CPI table file (`year,deflator` relative to 2023).
    pub cpi: PathBuf,

    /// Estimation equation: baseline or frontier.
    #[arg(long)]
    pub spec: Option<String>,
    /// Instrument the relative price with this extra panel column (2SLS).
    #[arg(long)]
    pub iv: Option<String>,
    /// Keep only years >= this.
    #[arg(long)]
    pub from_year: Option<i32>,
    /// Drop this year (repeatable).
    #[arg(long)]
    pub exclude_year: Vec<i32>,
    /// Keep only this firm (repeatable).
    #[arg(long)]
    pub only_firm: Vec<String>,
    /// Drop the firm fixed effects (plain regression with a constant).
    #[arg(long)]
    pub no_firm_fe: bool,
    /// Research/training compute ratio where research compute is absent.
    #[arg(long)]
    pub res_train_ratio: Option<f64>,
    /// Salary share of total compensation for salary-flagged rows.
    #[arg(long)]
    pub salary_share: Option<f64>,
    /// Bootstrap replications for the Monte Carlo standard error.
    #[arg(long)]
    pub mc_reps: Option<usize>,
    /// Frontier extrapolation multiplier assumed when recovering gamma.
    #[arg(long)]
    pub frontier_x: Option<f64>,
}

#[derive(Serialize)]
struct EstimateArtifact<'a> {
    config: &'a BTreeMap<String, String>,
    result: &'a econometrics::FitResult,
}

pub fn estimate(
    args: EstimateArgs,
    resolver: &mut Resolver,
    seed: u64,
    out: Option<PathBuf>,
    format: OutputFormat,
) -> Result<(), CliError> {
    resolver.note("command", "estimate");
    resolver.note("panel", args.panel.display());
    resolver.note("cpi", args.cpi.display());

    let spec_name = resolver.get("spec", args.spec, "baseline".to_string())?;
    let specification = parse_specification(&spec_name)?;
    let salary_share = resolver.get("salary-share", args.salary_share, 0.4)?;
    let res_train_ratio =
        resolver.get("res-train-ratio", args.res_train_ratio, 1.0 / 3.0)?;
    let mc_reps = resolver.get("mc-reps", args.mc_reps, 1000usize)?;
    let frontier_x = resolver.get("frontier-x", args.frontier_x, 1.0)?;
    let from_year = resolver.get_opt("from-year", args.from_year)?;
    let iv = resolver.get_opt("iv", args.iv)?;
    let no_firm_fe = resolver.get("no-firm-fe", args.no_firm_fe.then_some(true), false)?;
    if !args.exclude_year.is_empty() {
        resolver.note(
            "exclude-year",
            args.exclude_year.iter().map(i32::to_string).collect::<Vec<_>>().join(","),
        );
    }
    if !args.only_firm.is_empty() {
        resolver.note("only-firm", args.only_firm.join(","));
    }

    let observations = load_panel_file(&args.panel, salary_share)?;
    let cpi = load_cpi_file(&args.cpi)?;
    // Deflators must exist for every retained year; the derived rows also
    // validate finiteness end to end.
    panel::build_regressors(&observations, &cpi, &DeriveOptions { res_train_ratio })?;

    let spec = RegressionSpec {
        specification,
        sample_filter: SampleFilter {
            from_year,
            exclude_years: args.exclude_year.clone(),
            only_firms: (!args.only_firm.is_empty()).then(|| args.only_firm.clone()),
        },
        include_firm_fe: !no_firm_fe,
        iv,
        frontier_x,
        res_train_ratio,
    };

    let mut result = fit(&spec, &observations)?;
    result.se_monte_carlo = Some(monte_carlo_se(&spec, &observations, mc_reps, seed)?);

    let mut table = report::render_table(&result, &spec);
    table.push('\n');
    table.push_str("Resolved configuration:\n");
    table.push_str(&resolver.preamble());

    let json = serde_json::to_string_pretty(&EstimateArtifact {
        config: resolver.resolved(),
        result: &result,
    })
    .expect("estimate artifact serializes");

    let stem = out_stem(out, "estimate");
    write_file(&artifact(&stem, "txt"), &table)?;
    write_file(&artifact(&stem, "json"), &json)?;

    match format {
        OutputFormat::Table => print!("{table}"),
        OutputFormat::Json => println!("{json}"),
        OutputFormat::Csv => {
            return Err(CliError::Usage(
                "estimate emits table and json output; csv is not supported".to_string(),
            ))
        }
    }
    Ok(())
}

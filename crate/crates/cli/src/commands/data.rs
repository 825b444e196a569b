//! Data commands: synthetic panel generation and plot-ready series.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use rsi_core::econometrics::{added_variable_series, RegressionSpec, SampleFilter};
use rsi_core::panel;
use rsi_core::synth::{self, FirmSpan, ResearchComputeMode, SynthConfig};

use super::{
    artifact, load_cpi_file, load_panel_file, out_stem, parse_specification, write_file,
};
use crate::config::Resolver;
use crate::CliError;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generating elasticity of substitution.
    #[arg(long)]
    pub sigma_true: Option<f64>,
    /// Generating compute share weight in (0, 1).
    #[arg(long)]
    pub gamma_true: Option<f64>,
    /// Frontier extrapolation multiplier entering the intercept.
    #[arg(long)]
    pub x_true: Option<f64>,
    /// Number of firms (balanced panel).
    #[arg(long)]
    pub firms: Option<usize>,
    /// Years per firm (balanced panel).
    #[arg(long)]
    pub years: Option<usize>,
    /// First year of the balanced panel.
    #[arg(long)]
    pub start_year: Option<i32>,
    /// Unbalanced coverage, e.g. `alpha:2014-2024,bravo:2015-2024`.
    #[arg(long)]
    pub spans: Option<String>,
    /// Standard deviation of the log-ratio disturbance.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Dispersion of the Gaussian firm intercepts.
    #[arg(long)]
    pub firm_effect_scale: Option<f64>,
    /// Estimation equation the panel satisfies: baseline or frontier.
    #[arg(long)]
    pub spec: Option<String>,
    /// Emit no research-compute column; training compute is written as
    /// research/ratio so loaders re-derive the generated values exactly.
    #[arg(long)]
    pub omit_research: bool,
    /// Research/training ratio used with --omit-research.
    #[arg(long)]
    pub res_train_ratio: Option<f64>,
}

fn parse_spans(raw: &str) -> Result<Vec<FirmSpan>, CliError> {
    raw.split(',')
        .map(|entry| {
            let bad = || {
                CliError::Usage(format!(
                    "span entry {entry:?}: expected name:first-last, e.g. alpha:2014-2024"
                ))
            };
            let (name, years) = entry.trim().split_once(':').ok_or_else(bad)?;
            let (first, last) = years.split_once('-').ok_or_else(bad)?;
            Ok(FirmSpan {
                name: name.to_string(),
                first_year: first.parse().map_err(|_| bad())?,
                last_year: last.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn synth(
    args: SynthArgs,
    resolver: &mut Resolver,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    resolver.note("command", "synth");
    let defaults = SynthConfig::default();
    let sigma_true = resolver.get("sigma-true", args.sigma_true, defaults.sigma_true)?;
    let gamma_true = resolver.get("gamma-true", args.gamma_true, defaults.gamma_true)?;
    let x_true = resolver.get("x-true", args.x_true, defaults.x_true)?;
    let firms = resolver.get("firms", args.firms, defaults.firms)?;
    let years = resolver.get("years", args.years, defaults.years)?;
    let start_year = resolver.get("start-year", args.start_year, defaults.start_year)?;
    let noise_sd = resolver.get("noise-sd", args.noise_sd, defaults.noise_sd)?;
    let firm_effect_scale =
        resolver.get("firm-effect-scale", args.firm_effect_scale, defaults.firm_effect_scale)?;
    let spec_name = resolver.get("spec", args.spec, "baseline".to_string())?;
    let specification = parse_specification(&spec_name)?;
    let omit_research =
        resolver.get("omit-research", args.omit_research.then_some(true), false)?;
    let res_train_ratio =
        resolver.get("res-train-ratio", args.res_train_ratio, 1.0 / 3.0)?;
    let spans_raw = resolver.get_opt("spans", args.spans)?;

    let cfg = SynthConfig {
        sigma_true,
        gamma_true,
        x_true,
        firms,
        years,
        start_year,
        spans: spans_raw.as_deref().map(parse_spans).transpose()?,
        firm_effect_scale,
        noise_sd,
        research_mode: if omit_research {
            ResearchComputeMode::FromTrainRatio(res_train_ratio)
        } else {
            ResearchComputeMode::Explicit
        },
        seed,
        ..defaults
    };

    let observations = synth::generate_panel(&cfg, specification)?;

    let mut csv = resolver.preamble();
    let mut body = Vec::new();
    panel::write_panel_csv(&observations, &mut body, !omit_research)?;
    csv.push_str(&String::from_utf8(body).expect("panel csv is utf-8"));

    let stem = out_stem(out, "synth");
    write_file(&artifact(&stem, "csv"), &csv)?;
    println!("{} observations written", observations.len());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Per-firm yearly levels: real wage, real compute price, headcount,
    /// research compute per employee.
    Trends,
    /// Added-variable pairs for the baseline fit.
    AvpBaseline,
    /// Added-variable pairs for the frontier fit.
    AvpFrontier,
}

#[derive(Args, Debug)]
pub struct PlotdataArgs {
    /// Panel file.
    pub panel: PathBuf,
    /// Which series to emit.
    #[arg(long, value_enum)]
    pub which: PlotKind,
    /// CPI table (required for trends).
    #[arg(long)]
    pub cpi: Option<PathBuf>,
    /// Research/training compute ratio where research compute is absent.
    #[arg(long)]
    pub res_train_ratio: Option<f64>,
    /// Salary share of total compensation for salary-flagged rows.
    #[arg(long)]
    pub salary_share: Option<f64>,
}

pub fn plotdata(
    args: PlotdataArgs,
    resolver: &mut Resolver,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    resolver.note("command", "plotdata");
    resolver.note("panel", args.panel.display());
    let which = match args.which {
        PlotKind::Trends => "trends",
        PlotKind::AvpBaseline => "avp-baseline",
        PlotKind::AvpFrontier => "avp-frontier",
    };
    resolver.note("which", which);
    let salary_share = resolver.get("salary-share", args.salary_share, 0.4)?;
    let res_train_ratio =
        resolver.get("res-train-ratio", args.res_train_ratio, 1.0 / 3.0)?;

    let mut observations = load_panel_file(&args.panel, salary_share)?;
    observations.sort_by(|a, b| (&a.firm, a.year).cmp(&(&b.firm, b.year)));

    let mut csv = resolver.preamble();
    match args.which {
        PlotKind::Trends => {
            let cpi_path = args.cpi.as_ref().ok_or_else(|| {
                CliError::Usage("trends needs --cpi to express levels in 2023 USD".to_string())
            })?;
            resolver.note("cpi", cpi_path.display());
            let cpi = load_cpi_file(cpi_path)?;
            // Re-emit the preamble so the cpi path is part of it.
            csv = resolver.preamble();
            csv.push_str(
                "firm,year,wage_real_2023usd,compute_price_real_2023usd_per_flop,headcount,\
                 research_compute_per_employee_flop\n",
            );
            for o in &observations {
                let deflator = cpi.deflator(o.year)?;
                let wage_real = o.total_compensation()? / deflator;
                let price_real = o.r_nominal / deflator;
                let res_per_head = o.research_compute(res_train_ratio)? / o.headcount;
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    o.firm, o.year, wage_real, price_real, o.headcount, res_per_head
                ));
            }
        }
        PlotKind::AvpBaseline | PlotKind::AvpFrontier => {
            let specification = match args.which {
                PlotKind::AvpBaseline => rsi_core::econometrics::Specification::Baseline,
                _ => rsi_core::econometrics::Specification::Frontier,
            };
            let spec = RegressionSpec {
                res_train_ratio,
                sample_filter: SampleFilter::default(),
                ..RegressionSpec::new(specification)
            };
            let series = added_variable_series(&spec, &observations)?;
            csv.push_str("firm,year,price_residual,ratio_residual,slope\n");
            for i in 0..series.firm.len() {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    series.firm[i],
                    series.year[i],
                    series.price_residuals[i],
                    series.ratio_residuals[i],
                    series.slope
                ));
            }
        }
    }

    let stem = out_stem(out, "plotdata");
    write_file(&artifact(&stem, "csv"), &csv)?;
    println!("{which} series written for {} rows", observations.len());
    Ok(())
}

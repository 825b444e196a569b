//! Forward-model commands: trajectory simulation and phase-diagram sweeps.

use std::path::PathBuf;

use clap::Args;

use rsi_core::ces::{CesParams, FrontierParams};
use rsi_core::dynamics::{
    self, classify_analytic, classify_numeric, DynamicsParams, LaborEndowment, SimOptions,
    SimulationSummary,
};

use super::{artifact, out_stem, write_file};
use crate::config::Resolver;
use crate::CliError;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Productivity scaling factor.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Ideas-difficulty exponent on algorithm quality.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Parallelization exponent in (0, 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Elasticity of substitution.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Compute share weight in (0, 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Human researchers.
    #[arg(long)]
    pub h: Option<f64>,
    /// Inference compute (FLOP).
    #[arg(long)]
    pub k_inf: Option<f64>,
    /// Compute cost per AI researcher copy (FLOP).
    #[arg(long)]
    pub c: Option<f64>,
    /// Research compute (FLOP).
    #[arg(long)]
    pub k_res: Option<f64>,
    /// Initial algorithm quality.
    #[arg(long)]
    pub a0: Option<f64>,
    /// Integration horizon (time units).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Quality ceiling that counts as blow-up; defaults to 1e12 * a0.
    #[arg(long)]
    pub ceiling: Option<f64>,
    /// Relative local error tolerance.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Training compute (FLOP); switches to the frontier specification.
    #[arg(long)]
    pub k_tra: Option<f64>,
    /// Frontier extrapolation multiplier (with --k-tra).
    #[arg(long)]
    pub frontier_x: Option<f64>,
}

pub fn simulate(
    args: SimulateArgs,
    resolver: &mut Resolver,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    resolver.note("command", "simulate");
    // Defaults are exploration knobs, not calibrated values: unit physical
    // quantities and a Cobb-Douglas aggregator.
    let theta = resolver.get("theta", args.theta, 1.0)?;
    let phi = resolver.get("phi", args.phi, 0.5)?;
    let lambda = resolver.get("lambda", args.lambda, 1.0)?;
    let sigma = resolver.get("sigma", args.sigma, 1.0)?;
    let gamma = resolver.get("gamma", args.gamma, 0.5)?;
    let h = resolver.get("h", args.h, 1.0)?;
    let k_inf = resolver.get("k-inf", args.k_inf, 1.0)?;
    let c = resolver.get("c", args.c, 1.0)?;
    let k_res = resolver.get("k-res", args.k_res, 1.0)?;
    let a0 = resolver.get("a0", args.a0, 1.0)?;
    let horizon = resolver.get("horizon", args.horizon, 100.0)?;
    let ceiling = resolver.get("ceiling", args.ceiling, 1e12 * a0)?;
    let rel_tol = resolver.get("rel-tol", args.rel_tol, 1e-8)?;
    let k_tra = resolver.get_opt("k-tra", args.k_tra)?;
    let frontier_x = resolver.get("frontier-x", args.frontier_x, 1.0)?;

    let params = DynamicsParams {
        theta,
        phi,
        lambda,
        ces: CesParams::new(sigma, gamma)?,
        labor: LaborEndowment { h, k_inf, c },
        k_res,
        frontier: k_tra.map(|k_tra| FrontierParams { x: frontier_x, k_tra }),
        a0,
    };

    let trajectory = dynamics::simulate_with(
        &params,
        horizon,
        ceiling,
        &SimOptions { rel_tol, ..SimOptions::default() },
    )?;

    let summary =
        SimulationSummary::new(&params, horizon, ceiling, &trajectory, resolver.resolved().clone())?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");

    let mut csv = resolver.preamble();
    let mut body = Vec::new();
    trajectory.write_csv(&mut body)?;
    csv.push_str(&String::from_utf8(body).expect("trajectory csv is utf-8"));

    let stem = out_stem(out, "simulate");
    write_file(&artifact(&stem, "csv"), &csv)?;
    write_file(&artifact(&stem, "json"), &json)?;

    println!(
        "terminated_by={:?} analytic={} numeric={} samples={} final_time={} final_value={:e}",
        summary.terminated_by,
        summary.analytic_verdict,
        summary.numeric_verdict,
        summary.samples,
        summary.final_time,
        summary.final_value
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated sigma grid.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Comma-separated phi grid.
    #[arg(long)]
    pub phi: Option<String>,
    /// Comma-separated lambda grid.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Comma-separated gamma grid.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Also simulate each point and report the numeric verdict.
    #[arg(long)]
    pub numeric: bool,
    /// Horizon for numeric verdicts.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Blow-up ceiling for numeric verdicts.
    #[arg(long)]
    pub ceiling: Option<f64>,
    /// Refuse grids larger than this many points.
    #[arg(long)]
    pub grid_cap: Option<usize>,
}

fn parse_grid(raw: &str, name: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("{name} grid entry {s:?}: {e}")))
        })
        .collect()
}

pub fn sweep(
    args: SweepArgs,
    resolver: &mut Resolver,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    resolver.note("command", "sweep");
    let sigma_raw = resolver.get("sigma", args.sigma, "0.3,0.7,1,1.5,2.583".to_string())?;
    let phi_raw = resolver.get("phi", args.phi, "0.2,0.6,1.05,1.4".to_string())?;
    let lambda_raw = resolver.get("lambda", args.lambda, "0.4,0.8,1".to_string())?;
    let gamma_raw = resolver.get("gamma", args.gamma, "0.2,0.5,0.8".to_string())?;
    let numeric = resolver.get("numeric", args.numeric.then_some(true), false)?;
    // Same normalized configuration the acceptance grid documents.
    let horizon = resolver.get("horizon", args.horizon, 1e4)?;
    let ceiling = resolver.get("ceiling", args.ceiling, 1e45)?;
    let grid_cap = resolver.get("grid-cap", args.grid_cap, 100_000usize)?;

    let sigmas = parse_grid(&sigma_raw, "sigma")?;
    let phis = parse_grid(&phi_raw, "phi")?;
    let lambdas = parse_grid(&lambda_raw, "lambda")?;
    let gammas = parse_grid(&gamma_raw, "gamma")?;

    let total = sigmas.len() * phis.len() * lambdas.len() * gammas.len();
    if total > grid_cap {
        return Err(CliError::Usage(format!(
            "grid has {total} points, above the configured cap {grid_cap}"
        )));
    }

    let mut csv = resolver.preamble();
    if numeric {
        csv.push_str("sigma,phi,lambda,gamma,analytic,numeric,agree\n");
    } else {
        csv.push_str("sigma,phi,lambda,gamma,analytic\n");
    }

    // Deterministic row order: nested loops in flag order.
    for &sigma in &sigmas {
        for &phi in &phis {
            for &lambda in &lambdas {
                for &gamma in &gammas {
                    let analytic = classify_analytic(sigma, phi, lambda, gamma)?;
                    if numeric {
                        let params = DynamicsParams {
                            theta: 1.0,
                            phi,
                            lambda,
                            ces: CesParams::new(sigma, gamma)?,
                            labor: LaborEndowment { h: 1.0, k_inf: 1.0, c: 1.0 },
                            k_res: 1.0,
                            frontier: None,
                            a0: 1.0,
                        };
                        let trajectory = dynamics::simulate(&params, horizon, ceiling)?;
                        let numeric_verdict = classify_numeric(&trajectory)?;
                        // Agreement is undefined on the critical boundary,
                        // where the numeric run sees one side of the knife
                        // edge; those rows leave the flag empty.
                        let agree = match analytic {
                            dynamics::ExplosionVerdict::Boundary => String::new(),
                            _ => (analytic == numeric_verdict).to_string(),
                        };
                        csv.push_str(&format!(
                            "{sigma},{phi},{lambda},{gamma},{analytic},{numeric_verdict},{agree}\n"
                        ));
                    } else {
                        csv.push_str(&format!("{sigma},{phi},{lambda},{gamma},{analytic}\n"));
                    }
                }
            }
        }
    }

    let stem = out_stem(out, "sweep");
    write_file(&artifact(&stem, "csv"), &csv)?;
    println!("{total} grid points written");
    Ok(())
}

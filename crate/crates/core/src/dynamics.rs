//! Algorithm-quality dynamics: integrate `dA/dt = theta A^phi F(.)^lambda`,
//! detect finite-time blow-up, and classify parameter points.
//!
//! The right-hand side feeds algorithm quality back into effective labor,
//! `L(A) = h + A k_inf / c`, so quality growth recruits more AI researcher
//! copies. Under the frontier specification the first aggregator input is
//! the number of near-frontier experiments `x k_res / k_tra` instead of raw
//! research compute.
//!
//! A scalar monotone ODE needs nothing heavier than an explicit embedded
//! pair: the integrator is Dormand-Prince 5(4) with a standard proportional
//! step controller. Blow-up is declared when the state crosses a caller
//! ceiling or the step size collapses beneath a floor near a singularity.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::ces::{self, CesParams, FrontierParams, LaborInputs};
use crate::error::{Error, Result};

/// Band within which the analytic classifier calls a point Boundary: a case
/// expression equal to its threshold to within this tolerance is neither
/// clearly explosive nor clearly subcritical.
pub const BOUNDARY_BAND: f64 = 1e-9;

/// Margin on the tail log-log slope of the growth rate used by the numeric
/// classifier; slopes above it count as superlinear growth.
pub const SUPERLINEAR_MARGIN: f64 = 0.02;

/// Fixed quantities and exponents driving the law of motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaborEndowment {
    /// Human researchers.
    pub h: f64,
    /// Inference compute (FLOP) available for AI researcher copies.
    pub k_inf: f64,
    /// Compute cost per AI researcher copy (FLOP).
    pub c: f64,
}

impl LaborEndowment {
    fn at_quality(&self, a: f64) -> LaborInputs {
        LaborInputs { h: self.h, a, k_inf: self.k_inf, c: self.c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsParams {
    /// Productivity scaling factor (1/time), > 0.
    pub theta: f64,
    /// Ideas-difficulty exponent on quality.
    pub phi: f64,
    /// Parallelization exponent in (0, 1].
    pub lambda: f64,
    pub ces: CesParams,
    pub labor: LaborEndowment,
    /// Research compute (FLOP).
    pub k_res: f64,
    /// Present => frontier-experiments specification.
    pub frontier: Option<FrontierParams>,
    /// Initial algorithm quality, > 0.
    pub a0: f64,
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::domain(format!("theta must be > 0, got {}", self.theta)));
        }
        if !self.phi.is_finite() {
            return Err(Error::domain("phi must be finite".to_string()));
        }
        if !(self.lambda.is_finite() && 0.0 < self.lambda && self.lambda <= 1.0) {
            return Err(Error::domain(format!(
                "lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        self.ces.eval_valid()?;
        self.labor.at_quality(0.0).validate()?;
        if self.labor.h <= 0.0 && self.labor.k_inf <= 0.0 {
            return Err(Error::domain(
                "need h > 0 or k_inf > 0 so effective labor stays positive".to_string(),
            ));
        }
        if !(self.k_res.is_finite() && self.k_res > 0.0) {
            return Err(Error::domain(format!("k_res must be > 0, got {}", self.k_res)));
        }
        if let Some(fp) = &self.frontier {
            fp.validate()?;
        }
        if !(self.a0.is_finite() && self.a0 > 0.0) {
            return Err(Error::domain(format!("a0 must be > 0, got {}", self.a0)));
        }
        Ok(())
    }

    /// First aggregator input: raw research compute, or the number of
    /// near-frontier experiments under the frontier specification.
    pub fn research_input(&self) -> Result<f64> {
        match &self.frontier {
            Some(fp) => ces::frontier_experiments(fp, self.k_res),
            None => Ok(self.k_res),
        }
    }
}

/// Growth rate of algorithm quality at quality level `a`.
pub fn rhs(p: &DynamicsParams, a: f64) -> Result<f64> {
    p.validate()?;
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::domain(format!("a must be > 0, got {a}")));
    }
    let labor = ces::effective_labor(&p.labor.at_quality(a))?;
    let f = ces::eval_ces(&p.ces, p.research_input()?, labor)?;
    Ok(p.theta * a.powf(p.phi) * f.powf(p.lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    HorizonReached,
    BlowupDetected,
    StepUnderflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExplosionVerdict {
    Explosive,
    NonExplosive,
    Boundary,
}

impl std::fmt::Display for ExplosionVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExplosionVerdict::Explosive => "Explosive",
            ExplosionVerdict::NonExplosive => "NonExplosive",
            ExplosionVerdict::Boundary => "Boundary",
        };
        f.write_str(s)
    }
}

/// Sampled solution path of the law of motion.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub terminated_by: Termination,
    pub verdict: ExplosionVerdict,
}

impl Trajectory {
    /// Time of the last sample; for blow-up terminations this is the
    /// detected blow-up time.
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trajectory is never empty")
    }

    /// Write the path as `time,a` CSV rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,a")?;
        for (t, a) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{a}")?;
        }
        Ok(())
    }
}

/// Integration controls. The defaults suit every bundled use; tests tighten
/// `rel_tol` to check convergence of the reported blow-up time.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Relative local error tolerance per step.
    pub rel_tol: f64,
    /// Steps accepted per horizon at most this coarse, so even slow paths
    /// carry enough samples for the numeric classifier.
    pub max_step_fraction: f64,
    /// Steps below `step_floor_fraction * horizon` terminate the run as
    /// `StepUnderflow` (treated as blow-up at a singularity).
    pub step_floor_fraction: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { rel_tol: 1e-8, max_step_fraction: 1.0 / 64.0, step_floor_fraction: 1e-15 }
    }
}

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate the law of motion from `a0` with default options.
pub fn simulate(p: &DynamicsParams, horizon: f64, a_ceiling: f64) -> Result<Trajectory> {
    simulate_with(p, horizon, a_ceiling, &SimOptions::default())
}

/// Integrate the law of motion from `a0`.
///
/// Stops at `horizon` (`HorizonReached`), when the state crosses
/// `a_ceiling` (`BlowupDetected`), or when the adaptive step shrinks below
/// the floor near a singularity (`StepUnderflow`, also counted as blow-up
/// by the numeric classifier).
pub fn simulate_with(
    p: &DynamicsParams,
    horizon: f64,
    a_ceiling: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    p.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be > 0, got {horizon}")));
    }
    if !(a_ceiling.is_finite() && a_ceiling > p.a0) {
        return Err(Error::domain(format!(
            "a_ceiling must exceed a0 = {}, got {a_ceiling}",
            p.a0
        )));
    }

    // Autonomous scalar rhs; parameters are pre-validated so failures inside
    // a step can only be non-finite arithmetic, handled by rejection below.
    let f = |a: f64| -> Option<f64> {
        if !(a.is_finite() && a > 0.0) {
            return None;
        }
        let labor = p.labor.h + a * p.labor.k_inf / p.labor.c;
        let input = match &p.frontier {
            Some(fp) => fp.x * p.k_res / fp.k_tra,
            None => p.k_res,
        };
        let value = ces::eval_ces(&p.ces, input, labor).ok()?;
        let d = p.theta * a.powf(p.phi) * value.powf(p.lambda);
        d.is_finite().then_some(d)
    };

    let f0 = f(p.a0)
        .ok_or_else(|| Error::computation("non-finite rhs at the initial state".to_string()))?;

    let max_step = horizon * opts.max_step_fraction;
    let step_floor = horizon * opts.step_floor_fraction;
    // Start from the state's own time scale, clipped to the sampling cap.
    let mut h = if f0 > 0.0 { (0.01 * p.a0 / f0).min(max_step) } else { max_step };
    h = h.max(step_floor);

    let mut t = 0.0;
    let mut y = p.a0;
    let mut times = vec![0.0];
    let mut values = vec![p.a0];
    let mut k = [0.0_f64; 7];
    let mut k0 = f0;

    let terminated_by = loop {
        if t >= horizon {
            break Termination::HorizonReached;
        }
        let h_try = h.min(horizon - t).min(max_step);

        // Stage evaluations; any non-finite intermediate rejects the step.
        k[0] = k0;
        let mut stage_ok = true;
        for i in 0..6 {
            let mut yi = y;
            for (j, a_ij) in DP_A[i].iter().enumerate().take(i + 1) {
                yi += h_try * a_ij * k[j];
            }
            match f(yi) {
                Some(v) => k[i + 1] = v,
                None => {
                    stage_ok = false;
                    break;
                }
            }
        }

        if stage_ok {
            let mut y5 = y;
            let mut y4 = y;
            for i in 0..7 {
                y5 += h_try * DP_B5[i] * k[i];
                y4 += h_try * DP_B4[i] * k[i];
            }
            let tol = opts.rel_tol * y.abs().max(y5.abs()).max(p.a0);
            let err = (y5 - y4).abs();
            if y5.is_finite() && err <= tol {
                // Accept. Quality never decreases in this model; guard the
                // invariant against rounding in the weighted stage sum.
                t += h_try;
                y = y5.max(y);
                times.push(t);
                values.push(y);
                if y >= a_ceiling {
                    break Termination::BlowupDetected;
                }
                k0 = match f(y) {
                    Some(v) => v,
                    None => break Termination::StepUnderflow,
                };
                let scale = if err > 0.0 { 0.9 * (tol / err).powf(0.2) } else { 5.0 };
                h = (h_try * scale.clamp(0.2, 5.0)).min(max_step);
            } else {
                let scale = if err.is_finite() && err > 0.0 {
                    0.9 * (tol / err).powf(0.2)
                } else {
                    0.5
                };
                h = h_try * scale.clamp(0.1, 0.9);
            }
        } else {
            h = h_try * 0.5;
        }

        if h < step_floor {
            break Termination::StepUnderflow;
        }
    };

    let verdict = numeric_verdict(&times, &values, terminated_by);
    Ok(Trajectory { times, values, terminated_by, verdict })
}

/// Analytic explosion classification from the case table:
///
/// * `sigma < 1`: explosive iff `phi > 1`;
/// * `sigma = 1`: explosive iff `phi + (1 - gamma) lambda > 1`;
/// * `sigma > 1`: explosive iff `phi + lambda > 1`.
///
/// The `sigma = 1` case uses the same band as CES evaluation
/// ([`ces::SIGMA_ONE_TOL`]); a case expression within [`BOUNDARY_BAND`] of
/// its threshold yields `Boundary`.
pub fn classify_analytic(
    sigma: f64,
    phi: f64,
    lambda: f64,
    gamma: f64,
) -> Result<ExplosionVerdict> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be > 0, got {sigma}")));
    }
    if !phi.is_finite() {
        return Err(Error::domain("phi must be finite".to_string()));
    }
    if !(lambda.is_finite() && 0.0 < lambda && lambda <= 1.0) {
        return Err(Error::domain(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    if !(gamma.is_finite() && 0.0 < gamma && gamma < 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }

    let expression = if (sigma - 1.0).abs() < ces::SIGMA_ONE_TOL {
        phi + (1.0 - gamma) * lambda
    } else if sigma < 1.0 {
        phi
    } else {
        phi + lambda
    };

    let margin = expression - 1.0;
    if margin.abs() <= BOUNDARY_BAND {
        Ok(ExplosionVerdict::Boundary)
    } else if margin > 0.0 {
        Ok(ExplosionVerdict::Explosive)
    } else {
        Ok(ExplosionVerdict::NonExplosive)
    }
}

/// Distance of the relevant case expression from its threshold; grid sweeps
/// use it to exclude near-boundary points.
pub fn analytic_margin(sigma: f64, phi: f64, lambda: f64, gamma: f64) -> f64 {
    let expression = if (sigma - 1.0).abs() < ces::SIGMA_ONE_TOL {
        phi + (1.0 - gamma) * lambda
    } else if sigma < 1.0 {
        phi
    } else {
        phi + lambda
    };
    (expression - 1.0).abs()
}

/// Numeric explosion classification of a simulated trajectory.
///
/// Blow-up terminations are explosive outright. Otherwise the tail of the
/// path, the samples within the last decade of quality in log space, is
/// tested for a superlinearly increasing growth rate: the slope of
/// `ln(dA/dt / A)` against `ln A`, fitted by least squares, must exceed
/// [`SUPERLINEAR_MARGIN`]. Restricting to the last decade discards early
/// transients, which is what the asymptotic criterion calls for.
pub fn classify_numeric(t: &Trajectory) -> Result<ExplosionVerdict> {
    if t.times.len() < 10 {
        return Err(Error::validation(format!(
            "trajectory too short for classification: {} samples, need >= 10",
            t.times.len()
        )));
    }
    Ok(numeric_verdict(&t.times, &t.values, t.terminated_by))
}

fn numeric_verdict(times: &[f64], values: &[f64], terminated_by: Termination) -> ExplosionVerdict {
    match terminated_by {
        Termination::BlowupDetected | Termination::StepUnderflow => ExplosionVerdict::Explosive,
        Termination::HorizonReached => {
            if tail_loglog_slope(times, values) > SUPERLINEAR_MARGIN {
                ExplosionVerdict::Explosive
            } else {
                ExplosionVerdict::NonExplosive
            }
        }
    }
}

/// Least-squares slope of `ln g` on `ln A` over the tail of the path, where
/// `g` is the finite-difference growth rate of `ln A` between samples.
fn tail_loglog_slope(times: &[f64], values: &[f64]) -> f64 {
    let n = values.len();
    if n < 3 {
        return 0.0;
    }
    let a_end = values[n - 1];
    let cutoff = a_end / 10.0;
    let mut start = values.partition_point(|&v| v < cutoff);
    // Keep enough points for a meaningful fit even on slow paths.
    start = start.min(n.saturating_sub(8));

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in start..n - 1 {
        let dt = times[i + 1] - times[i];
        let dlna = values[i + 1].ln() - values[i].ln();
        if dt <= 0.0 || dlna <= 0.0 {
            continue;
        }
        xs.push(0.5 * (values[i + 1].ln() + values[i].ln()));
        ys.push((dlna / dt).ln());
    }
    if xs.len() < 2 {
        return 0.0;
    }
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Closed-form blow-up time of `dA/dt = theta_eff A^phi` (constant research
/// input): `t* = a0^(1-phi) / ((phi - 1) theta_eff)` for `phi > 1`, none
/// otherwise.
pub fn blowup_time_constant_f(theta_eff: f64, phi: f64, a0: f64) -> Result<Option<f64>> {
    if !(theta_eff.is_finite() && theta_eff > 0.0) {
        return Err(Error::domain(format!("theta_eff must be > 0, got {theta_eff}")));
    }
    if !phi.is_finite() {
        return Err(Error::domain("phi must be finite".to_string()));
    }
    if !(a0.is_finite() && a0 > 0.0) {
        return Err(Error::domain(format!("a0 must be > 0, got {a0}")));
    }
    if phi > 1.0 {
        Ok(Some(a0.powf(1.0 - phi) / ((phi - 1.0) * theta_eff)))
    } else {
        Ok(None)
    }
}

/// JSON-ready simulation summary: parameters, termination, both verdicts.
#[derive(Debug, Serialize)]
pub struct SimulationSummary<'a> {
    pub params: &'a DynamicsParams,
    pub horizon: f64,
    pub a_ceiling: f64,
    pub terminated_by: Termination,
    pub analytic_verdict: ExplosionVerdict,
    pub numeric_verdict: ExplosionVerdict,
    pub samples: usize,
    pub final_time: f64,
    pub final_value: f64,
    pub config: BTreeMap<String, String>,
}

impl<'a> SimulationSummary<'a> {
    pub fn new(
        params: &'a DynamicsParams,
        horizon: f64,
        a_ceiling: f64,
        trajectory: &Trajectory,
        config: BTreeMap<String, String>,
    ) -> Result<Self> {
        let analytic = classify_analytic(
            params.ces.sigma(),
            params.phi,
            params.lambda,
            params.ces.gamma(),
        )?;
        Ok(SimulationSummary {
            params,
            horizon,
            a_ceiling,
            terminated_by: trajectory.terminated_by,
            analytic_verdict: analytic,
            numeric_verdict: trajectory.verdict,
            samples: trajectory.times.len(),
            final_time: trajectory.final_time(),
            final_value: trajectory.final_value(),
            config,
        })
    }
}

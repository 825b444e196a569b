//! Two-input CES research-production function and the first-order-condition
//! predictions derived from it.
//!
//! The aggregator combines research compute `k` and cognitive labor `l` with
//! a constant elasticity of substitution `sigma` and a compute share weight
//! `gamma`:
//!
//! ```text
//! F(k, l) = (gamma k^rho + (1 - gamma) l^rho)^(1/rho),   rho = (sigma-1)/sigma
//! F(k, l) = k^gamma l^(1-gamma)                          at sigma = 1
//! ```
//!
//! Compute is measured in FLOP (magnitudes around 1e20 and beyond), so inner
//! powers are never formed directly: everything runs through exp/log with a
//! log-sum-exp rescaling of the inner sum.

use serde::Serialize;

use crate::error::{Error, Result};

/// Width of the Cobb-Douglas branch around `sigma = 1`. Inside this band the
/// general formula divides by `rho ~ 0` and loses digits to cancellation, so
/// evaluation switches to the exact `sigma = 1` form.
pub const SIGMA_ONE_TOL: f64 = 1e-6;

/// Elasticity of substitution and compute share weight of the aggregator.
///
/// `gamma` must lie strictly in (0, 1). `sigma` may be any finite value so
/// that reported estimates (which can come out negative) are representable,
/// but evaluation requires `sigma > 0`; see [`CesParams::eval_valid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CesParams {
    sigma: f64,
    gamma: f64,
}

impl CesParams {
    pub fn new(sigma: f64, gamma: f64) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::domain(format!("sigma must be finite, got {sigma}")));
        }
        if !(gamma.is_finite() && 0.0 < gamma && gamma < 1.0) {
            return Err(Error::domain(format!(
                "gamma must lie strictly in (0, 1), got {gamma}"
            )));
        }
        Ok(CesParams { sigma, gamma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Evaluation operations require a positive elasticity; parameters that
    /// merely carry a reported estimate (possibly <= 0) fail here.
    pub fn eval_valid(&self) -> Result<()> {
        if self.sigma <= 0.0 {
            return Err(Error::domain(format!(
                "sigma must be > 0 for evaluation, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// True when evaluation uses the Cobb-Douglas branch.
    pub fn is_cobb_douglas(&self) -> bool {
        (self.sigma - 1.0).abs() < SIGMA_ONE_TOL
    }
}

/// Inputs to the effective-labor equation `L = h + a * k_inf / c`.
///
/// `h` is human headcount, `a` the algorithm-quality index, `k_inf` inference
/// compute in FLOP, and `c` the compute cost of running one AI researcher
/// copy, also in FLOP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaborInputs {
    pub h: f64,
    pub a: f64,
    pub k_inf: f64,
    pub c: f64,
}

impl LaborInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h", self.h), ("a", self.a), ("k_inf", self.k_inf)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::domain(format!("c must be finite and > 0, got {}", self.c)));
        }
        Ok(())
    }
}

/// Parameters of the frontier-experiments re-parametrization: `x` is the
/// productivity multiplier from extrapolating sub-frontier runs (>= 1) and
/// `k_tra` the training compute of the frontier model in FLOP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierParams {
    pub x: f64,
    pub k_tra: f64,
}

impl FrontierParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.x >= 1.0) {
            return Err(Error::domain(format!("x must be finite and >= 1, got {}", self.x)));
        }
        if !(self.k_tra.is_finite() && self.k_tra > 0.0) {
            return Err(Error::domain(format!(
                "k_tra must be finite and > 0, got {}",
                self.k_tra
            )));
        }
        Ok(())
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::domain(format!("{name} must be finite and > 0, got {v}")));
    }
    Ok(())
}

/// Evaluate the CES aggregator at `(k, l)`.
///
/// Uses the Cobb-Douglas branch when `|sigma - 1| < SIGMA_ONE_TOL` and the
/// general constant-elasticity form otherwise. Homogeneous of degree one.
pub fn eval_ces(params: &CesParams, k: f64, l: f64) -> Result<f64> {
    params.eval_valid()?;
    require_positive("k", k)?;
    require_positive("l", l)?;

    let gamma = params.gamma();
    let ln_k = k.ln();
    let ln_l = l.ln();

    if params.is_cobb_douglas() {
        return Ok((gamma * ln_k + (1.0 - gamma) * ln_l).exp());
    }

    let sigma = params.sigma();
    let rho = (sigma - 1.0) / sigma;
    // ln F = (1/rho) ln(gamma e^(rho ln k) + (1-gamma) e^(rho ln l)),
    // rescaled by the larger exponent so the inner sum never overflows.
    let a = rho * ln_k;
    let b = rho * ln_l;
    let m = a.max(b);
    let inner = gamma * (a - m).exp() + (1.0 - gamma) * (b - m).exp();
    Ok(((m + inner.ln()) / rho).exp())
}

/// Limit of `F(k, l)` as labor grows without bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LaborAsymptote {
    /// `sigma < 1`: compute bottlenecks the aggregate at
    /// `gamma^(sigma/(sigma-1)) * k`.
    Bounded(f64),
    /// `sigma >= 1`: the aggregate grows without bound in labor.
    Unbounded,
}

/// Large-labor limit of the aggregator at fixed compute `k`.
pub fn ces_labor_asymptote(params: &CesParams, k: f64) -> Result<LaborAsymptote> {
    params.eval_valid()?;
    require_positive("k", k)?;

    let sigma = params.sigma();
    if sigma < 1.0 && !params.is_cobb_douglas() {
        let exponent = sigma / (sigma - 1.0);
        Ok(LaborAsymptote::Bounded(params.gamma().powf(exponent) * k))
    } else {
        Ok(LaborAsymptote::Unbounded)
    }
}

/// Effective labor `h + a * k_inf / c`: human researchers plus the number of
/// AI researcher copies the inference budget can run.
pub fn effective_labor(inputs: &LaborInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.h + inputs.a * inputs.k_inf / inputs.c)
}

/// Number of near-frontier experiments affordable out of `k_res`:
/// `E = x * k_res / k_tra`.
pub fn frontier_experiments(fp: &FrontierParams, k_res: f64) -> Result<f64> {
    fp.validate()?;
    require_positive("k_res", k_res)?;
    Ok(fp.x * k_res / fp.k_tra)
}

/// Cost-minimizing log input ratio implied by the baseline specification:
///
/// ```text
/// ln(k/l) = sigma ln(w/r) + sigma ln(gamma/(1-gamma))
/// ```
///
/// where `w` is the labor price and `r` the compute price. Any finite
/// `sigma` is accepted; the expression is affine in it.
pub fn predicted_log_ratio_baseline(params: &CesParams, w: f64, r: f64) -> Result<f64> {
    require_positive("w", w)?;
    require_positive("r", r)?;
    let sigma = params.sigma();
    let gamma = params.gamma();
    Ok(sigma * (w / r).ln() + sigma * (gamma / (1.0 - gamma)).ln())
}

/// Cost-minimizing log ratio under the frontier-experiments specification:
///
/// ```text
/// ln(k_res/l) = [sigma ln(gamma/(1-gamma)) - (1-sigma) ln x]
///               + sigma ln(w/r) + (1-sigma) ln k_tra
/// ```
///
/// At `sigma = 1` the `x` and `k_tra` terms vanish and the value equals the
/// baseline prediction.
pub fn predicted_log_ratio_frontier(
    params: &CesParams,
    fp: &FrontierParams,
    w: f64,
    r: f64,
) -> Result<f64> {
    fp.validate()?;
    require_positive("w", w)?;
    require_positive("r", r)?;
    let sigma = params.sigma();
    let gamma = params.gamma();
    let constant = sigma * (gamma / (1.0 - gamma)).ln() - (1.0 - sigma) * fp.x.ln();
    Ok(constant + sigma * (w / r).ln() + (1.0 - sigma) * fp.k_tra.ln())
}

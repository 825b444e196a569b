//! Synthetic panels with known parameters, plus the independent brute-force
//! oracles the estimator tests check against.
//!
//! The generator runs the estimation equation forward: it draws price and
//! training-compute paths, computes the log compute/labor ratio exactly from
//! the chosen specification plus a firm effect and Gaussian noise, and
//! back-solves a consistent (headcount, research compute) pair. Zero-noise
//! panels therefore satisfy the estimation equation to rounding error, which
//! is what makes exact-recovery tests possible.
//!
//! The oracles deliberately share no code with the paths they check: the
//! normal-equations solver uses explicit Gaussian elimination in
//! double-double arithmetic, and the cost minimizer searches the isoquant
//! directly instead of evaluating first-order conditions.

pub mod extended;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::ces::{CesParams, SIGMA_ONE_TOL};
use crate::econometrics::Specification;
use crate::error::{Error, Result};
use crate::panel::PanelObservation;
use extended::Df64;

/// Per-firm geometric path: the initial level is drawn log-uniformly from
/// `[initial_min, initial_max]`, the annual growth factor uniformly from
/// `[drift_min, drift_max]`, and each step carries a multiplicative
/// log-normal shock with the given standard deviation.
///
/// The shocks matter: with purely geometric paths the log relative price and
/// log training compute are both linear in time within a firm, and the
/// frontier design matrix would be collinear after demeaning.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathSpec {
    pub initial_min: f64,
    pub initial_max: f64,
    pub drift_min: f64,
    pub drift_max: f64,
    pub jitter_sd: f64,
}

impl PathSpec {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.initial_min > 0.0 && self.initial_max >= self.initial_min) {
            return Err(Error::validation(format!("{name}: bad initial range")));
        }
        if !(self.drift_min > 0.0 && self.drift_max >= self.drift_min) {
            return Err(Error::validation(format!("{name}: bad drift range")));
        }
        if !(self.jitter_sd.is_finite() && self.jitter_sd >= 0.0) {
            return Err(Error::validation(format!("{name}: bad jitter")));
        }
        Ok(())
    }
}

/// Explicit firm-year coverage for unbalanced panels.
#[derive(Debug, Clone, Serialize)]
pub struct FirmSpan {
    pub name: String,
    pub first_year: i32,
    pub last_year: i32,
}

/// How the emitted observations encode research compute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ResearchComputeMode {
    /// Draw headcount, set `k_res = h exp(ln_ratio)`, keep the drawn
    /// training-compute path.
    Explicit,
    /// Mirror the source-data construction: `k_res = ratio * k_tra` with
    /// `k_tra` from its path, and back-solve headcount instead. Panels
    /// written without a research column stay exactly consistent with
    /// loaders that derive it at this ratio.
    FromTrainRatio(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthConfig {
    pub sigma_true: f64,
    pub gamma_true: f64,
    /// Frontier extrapolation multiplier entering the intercept.
    pub x_true: f64,
    pub firms: usize,
    pub years: usize,
    pub start_year: i32,
    /// Overrides `firms`/`years` with explicit unbalanced coverage.
    pub spans: Option<Vec<FirmSpan>>,
    /// Standard deviation of the Gaussian firm intercepts.
    pub firm_effect_scale: f64,
    /// Standard deviation of the log-ratio disturbance.
    pub noise_sd: f64,
    pub wage_path: PathSpec,
    pub price_path: PathSpec,
    pub k_tra_path: PathSpec,
    /// Log-uniform headcount range for `ResearchComputeMode::Explicit`.
    pub headcount_range: (f64, f64),
    pub research_mode: ResearchComputeMode,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        // Wages drift up a few percent a year while the compute price falls
        // steeply, echoing the observed relative-price movement that
        // identifies sigma.
        SynthConfig {
            sigma_true: 1.5,
            gamma_true: 0.5,
            x_true: 1.0,
            firms: 4,
            years: 7,
            start_year: 2018,
            spans: None,
            firm_effect_scale: 0.3,
            noise_sd: 0.0,
            wage_path: PathSpec {
                initial_min: 1.5e5,
                initial_max: 4e5,
                drift_min: 1.03,
                drift_max: 1.08,
                jitter_sd: 0.15,
            },
            price_path: PathSpec {
                initial_min: 2e-17,
                initial_max: 8e-17,
                drift_min: 0.55,
                drift_max: 0.75,
                jitter_sd: 0.25,
            },
            k_tra_path: PathSpec {
                initial_min: 1e22,
                initial_max: 1e23,
                drift_min: 2.0,
                drift_max: 5.0,
                jitter_sd: 0.15,
            },
            headcount_range: (50.0, 5000.0),
            research_mode: ResearchComputeMode::Explicit,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.sigma_true.is_finite() {
            return Err(Error::validation("sigma_true must be finite"));
        }
        if !(self.gamma_true > 0.0 && self.gamma_true < 1.0) {
            return Err(Error::validation(format!(
                "gamma_true must lie in (0, 1), got {}",
                self.gamma_true
            )));
        }
        if self.x_true < 1.0 {
            return Err(Error::validation(format!("x_true must be >= 1, got {}", self.x_true)));
        }
        match &self.spans {
            None => {
                if self.firms < 1 || self.years < 1 {
                    return Err(Error::validation("need at least one firm and one year"));
                }
            }
            Some(spans) => {
                if spans.is_empty() {
                    return Err(Error::validation("spans must be nonempty"));
                }
                for s in spans {
                    if s.last_year < s.first_year {
                        return Err(Error::validation(format!(
                            "firm {}: last_year precedes first_year",
                            s.name
                        )));
                    }
                }
            }
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::validation("noise_sd must be >= 0"));
        }
        if !(self.firm_effect_scale.is_finite() && self.firm_effect_scale >= 0.0) {
            return Err(Error::validation("firm_effect_scale must be >= 0"));
        }
        if let ResearchComputeMode::FromTrainRatio(r) = self.research_mode {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::validation(format!("research/training ratio must be > 0, got {r}")));
            }
        }
        self.wage_path.validate("wage_path")?;
        self.price_path.validate("price_path")?;
        self.k_tra_path.validate("k_tra_path")?;
        if !(self.headcount_range.0 > 0.0 && self.headcount_range.1 >= self.headcount_range.0) {
            return Err(Error::validation("bad headcount range"));
        }
        Ok(())
    }

    fn firm_spans(&self) -> Vec<FirmSpan> {
        match &self.spans {
            Some(s) => s.clone(),
            None => (0..self.firms)
                .map(|i| FirmSpan {
                    name: format!("firm{}", (b'a' + (i % 26) as u8) as char),
                    first_year: self.start_year,
                    last_year: self.start_year + self.years as i32 - 1,
                })
                .collect(),
        }
    }
}

struct PathSampler {
    level: f64,
    drift: f64,
    jitter_sd: f64,
}

impl PathSampler {
    fn init<R: Rng>(spec: &PathSpec, rng: &mut R) -> Self {
        let ln_lo = spec.initial_min.ln();
        let ln_hi = spec.initial_max.ln();
        let level = (ln_lo + (ln_hi - ln_lo) * rng.random::<f64>()).exp();
        let drift = spec.drift_min + (spec.drift_max - spec.drift_min) * rng.random::<f64>();
        PathSampler { level, drift, jitter_sd: spec.jitter_sd }
    }

    fn step<R: Rng>(&mut self, rng: &mut R) -> f64 {
        let current = self.level;
        let shock = if self.jitter_sd > 0.0 {
            let normal = Normal::new(0.0, self.jitter_sd).expect("validated sd");
            normal.sample(rng).exp()
        } else {
            1.0
        };
        self.level *= self.drift * shock;
        current
    }
}

/// Generate a panel whose log ratio satisfies the chosen estimation equation
/// exactly (up to the configured noise). Deterministic for a given seed.
pub fn generate_panel(
    cfg: &SynthConfig,
    specification: Specification,
) -> Result<Vec<PanelObservation>> {
    cfg.validate()?;
    if specification == Specification::Baseline && cfg.sigma_true < 0.0 {
        return Err(Error::validation(
            "sigma_true < 0 cannot arise from the production model",
        ));
    }

    let sigma = cfg.sigma_true;
    let gamma = cfg.gamma_true;
    let log_share = (gamma / (1.0 - gamma)).ln();
    let mut out = Vec::new();

    for (firm_idx, span) in cfg.firm_spans().iter().enumerate() {
        // One independent stream per firm: panels are reproducible even if
        // firm generation were reordered.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(firm_idx as u64);

        let alpha = if cfg.firm_effect_scale > 0.0 {
            Normal::new(0.0, cfg.firm_effect_scale).expect("validated sd").sample(&mut rng)
        } else {
            0.0
        };
        let mut wages = PathSampler::init(&cfg.wage_path, &mut rng);
        let mut prices = PathSampler::init(&cfg.price_path, &mut rng);
        let mut k_tras = PathSampler::init(&cfg.k_tra_path, &mut rng);
        let noise = Normal::new(0.0, cfg.noise_sd.max(f64::MIN_POSITIVE)).expect("validated sd");

        for year in span.first_year..=span.last_year {
            let w = wages.step(&mut rng);
            let r = prices.step(&mut rng);
            let k_tra = k_tras.step(&mut rng);
            let eps = if cfg.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };

            let ln_rel_price = (w / r).ln();
            let ln_ratio = match specification {
                Specification::Baseline => sigma * ln_rel_price + sigma * log_share + alpha + eps,
                Specification::Frontier => {
                    sigma * log_share - (1.0 - sigma) * cfg.x_true.ln()
                        + sigma * ln_rel_price
                        + (1.0 - sigma) * k_tra.ln()
                        + alpha
                        + eps
                }
            };

            let (headcount, k_res) = match cfg.research_mode {
                ResearchComputeMode::Explicit => {
                    let (lo, hi) = cfg.headcount_range;
                    let h = (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp();
                    (h, h * ln_ratio.exp())
                }
                ResearchComputeMode::FromTrainRatio(ratio) => {
                    // Keep the column link exact; the whole-person rounding
                    // of headcount lands in the disturbance instead.
                    let k_res = ratio * k_tra;
                    let h = (k_res / ln_ratio.exp()).round().max(1.0);
                    (h, k_res)
                }
            };

            out.push(PanelObservation {
                firm: span.name.clone(),
                year,
                headcount,
                wage_nominal: w,
                wage_is_salary: false,
                salary_share: crate::panel::DEFAULT_SALARY_SHARE,
                r_nominal: r,
                k_tra,
                k_res: Some(k_res),
                k_inf: None,
                extra: Default::default(),
            });
        }
    }
    Ok(out)
}

/// Reference least-squares solver: form the normal equations `X'X b = X'y`
/// with extended-precision dot products and solve them by explicit Gaussian
/// elimination with partial pivoting, all in double-double arithmetic.
///
/// Intended for small systems (`n <= 100`, `k <= 10`); checks nothing the
/// QR path computes, which is the point.
pub fn normal_equations_oracle(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = x.nrows();
    let k = x.ncols();
    if y.len() != n {
        return Err(Error::validation("dimension mismatch between y and x"));
    }
    if n > 100 || k > 10 || k == 0 {
        return Err(Error::validation(format!(
            "oracle accepts n <= 100, 1 <= k <= 10; got n = {n}, k = {k}"
        )));
    }
    if n < k {
        return Err(Error::validation("need at least as many rows as columns"));
    }

    let col: Vec<Vec<f64>> =
        (0..k).map(|j| x.column(j).iter().copied().collect::<Vec<f64>>()).collect();
    let yv: Vec<f64> = y.iter().copied().collect();

    // Augmented [X'X | X'y] in double-double.
    let mut aug: Vec<Vec<Df64>> = (0..k)
        .map(|i| {
            let mut row: Vec<Df64> =
                (0..k).map(|j| extended::dot(&col[i], &col[j])).collect();
            row.push(extended::dot(&col[i], &yv));
            row
        })
        .collect();

    // Gaussian elimination with partial pivoting.
    for pivot in 0..k {
        let (best, best_mag) = (pivot..k)
            .map(|r| (r, aug[r][pivot].abs().to_f64()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let scale = (0..=k).map(|j| aug[pivot][j].abs().to_f64()).fold(0.0, f64::max);
        if best_mag <= 1e-28 * scale.max(1.0) {
            return Err(Error::computation(format!(
                "normal equations singular at pivot {pivot}"
            )));
        }
        aug.swap(pivot, best);
        for r in pivot + 1..k {
            let factor = aug[r][pivot] / aug[pivot][pivot];
            for (j, pivot_row_val) in aug[pivot].clone().iter().enumerate().skip(pivot) {
                aug[r][j] = aug[r][j] - factor * *pivot_row_val;
            }
        }
    }

    // Back substitution.
    let mut beta = vec![Df64::ZERO; k];
    for i in (0..k).rev() {
        let mut acc = aug[i][k];
        for j in i + 1..k {
            acc = acc - aug[i][j] * beta[j];
        }
        beta[i] = acc / aug[i][i];
    }
    Ok(DVector::from_iterator(k, beta.into_iter().map(|b| b.to_f64())))
}

/// Brute-force cost minimizer on the `F(k, l) = f_bar` isoquant.
///
/// Parametrizes the contour by labor: the CES level equation inverts in
/// closed form to `k(l)`, so the search walks a logarithmic grid of feasible
/// `l`, takes the cheapest point under `w l + r k`, and refines once around
/// the winner. The inversion is written out here rather than reusing the
/// evaluation code, keeping the oracle independent of the path it checks.
pub fn grid_cost_minimizer(
    params: &CesParams,
    w: f64,
    r: f64,
    f_bar: f64,
) -> Result<(f64, f64)> {
    params.eval_valid()?;
    for (name, v) in [("w", w), ("r", r), ("f_bar", f_bar)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(format!("{name} must be > 0, got {v}")));
        }
    }

    let sigma = params.sigma();
    let gamma = params.gamma();
    let cobb_douglas = (sigma - 1.0).abs() < SIGMA_ONE_TOL;
    let rho = (sigma - 1.0) / sigma;

    // Compute on the isoquant as a function of labor.
    let k_of_l = |l: f64| -> Option<f64> {
        if cobb_douglas {
            // k = (f_bar / l^(1-gamma))^(1/gamma)
            let ln_k = (f_bar.ln() - (1.0 - gamma) * l.ln()) / gamma;
            return Some(ln_k.exp());
        }
        // gamma k^rho = f_bar^rho - (1-gamma) l^rho
        let rest = rho * (l / f_bar).ln();
        let remainder = 1.0 - (1.0 - gamma) * rest.exp();
        if remainder <= 0.0 {
            return None;
        }
        // k = f_bar * (remainder / gamma)^(1/rho)
        Some(f_bar * ((remainder / gamma).ln() / rho).exp())
    };

    let cost = |l: f64| -> Option<f64> {
        let k = k_of_l(l)?;
        (k.is_finite() && k > 0.0).then_some(w * l + r * k)
    };

    // Feasible labor interval, clipped to a wide search box around f_bar.
    let box_lo = f_bar * 1e-9;
    let box_hi = f_bar * 1e9;
    let (mut lo, mut hi) = if cobb_douglas {
        (box_lo, box_hi)
    } else {
        let bound = f_bar * (1.0 - gamma).powf(-1.0 / rho);
        if sigma > 1.0 {
            // l < bound keeps the k-term positive.
            (box_lo, (bound * (1.0 - 1e-12)).min(box_hi))
        } else {
            // l > bound is needed to reach the level at all.
            ((bound * (1.0 + 1e-12)).max(box_lo), box_hi)
        }
    };
    if lo >= hi {
        return Err(Error::computation(
            "isoquant does not intersect the search box",
        ));
    }

    const COARSE: usize = 4000;
    const FINE: usize = 4000;

    let argmin_on = |lo: f64, hi: f64, steps: usize| -> Option<(usize, f64)> {
        let ln_lo = lo.ln();
        let ln_hi = hi.ln();
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..=steps {
            let l = (ln_lo + (ln_hi - ln_lo) * i as f64 / steps as f64).exp();
            if let Some(c) = cost(l) {
                if best.is_none_or(|(_, _, bc)| c < bc) {
                    best = Some((i, l, c));
                }
            }
        }
        best.map(|(i, l, _)| (i, l))
    };

    let (i1, l1) = argmin_on(lo, hi, COARSE)
        .ok_or_else(|| Error::computation("no feasible point on the isoquant"))?;
    if i1 == 0 || i1 == COARSE {
        return Err(Error::computation(format!(
            "cost minimum sits on the search-box edge (l = {l1:.3e}); contour outside box"
        )));
    }

    // Refine one coarse cell on each side of the winner.
    let step = (hi.ln() - lo.ln()) / COARSE as f64;
    let (rlo, rhi) = ((l1.ln() - step).exp(), (l1.ln() + step).exp());
    lo = rlo.max(lo);
    hi = rhi.min(hi);
    let (_, l2) = argmin_on(lo, hi, FINE)
        .ok_or_else(|| Error::computation("refinement found no feasible point"))?;
    let k2 = k_of_l(l2)
        .ok_or_else(|| Error::computation("refined labor value left the contour"))?;
    Ok((k2, l2))
}

//! Estimation of the elasticity of substitution from a firm-year panel.
//!
//! The outcome is `ln(K_res/H)` and the regressor of interest is the log
//! relative price `ln(w/r)`; under the frontier specification `ln(K_tra)`
//! enters as a control. Firm fixed effects are absorbed by the within
//! transform, standard errors are clustered at the firm level, a firm-level
//! residual bootstrap gives Monte Carlo standard errors, and an optional
//! 2SLS stage instruments the relative price.

mod linalg;
pub mod report;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use linalg::{
    cluster_robust_se, cluster_se_from_residuals, ols, two_stage_ls, within_transform,
    ClusterSeOptions, TwoStageOutput, WithinTransformed,
};

use crate::error::{Error, Result};
use crate::panel::{self, PanelObservation, DEFAULT_RES_TRAIN_RATIO};

/// Which estimation equation to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Specification {
    /// `ln(K_res/H) = const + sigma ln(w/r)`.
    Baseline,
    /// `ln(K_res/H) = const + sigma ln(w/r) + (1 - sigma) ln(K_tra)`.
    Frontier,
}

/// Sample restriction on (firm, year); the robustness presets compose here.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SampleFilter {
    pub from_year: Option<i32>,
    pub exclude_years: Vec<i32>,
    pub only_firms: Option<Vec<String>>,
}

impl SampleFilter {
    pub fn keeps(&self, firm: &str, year: i32) -> bool {
        if let Some(from) = self.from_year {
            if year < from {
                return false;
            }
        }
        if self.exclude_years.contains(&year) {
            return false;
        }
        if let Some(firms) = &self.only_firms {
            if !firms.iter().any(|f| f == firm) {
                return false;
            }
        }
        true
    }
}

/// Full description of one regression run.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionSpec {
    pub specification: Specification,
    pub sample_filter: SampleFilter,
    pub include_firm_fe: bool,
    /// Name of an extra panel column to use as the excluded instrument for
    /// the relative price.
    pub iv: Option<String>,
    /// Extrapolation multiplier assumed when inverting the frontier
    /// intercept for gamma; the fit itself does not depend on it.
    pub frontier_x: f64,
    /// Research/training compute ratio used where the panel lacks explicit
    /// research compute.
    pub res_train_ratio: f64,
}

impl RegressionSpec {
    pub fn new(specification: Specification) -> Self {
        RegressionSpec {
            specification,
            sample_filter: SampleFilter::default(),
            include_firm_fe: true,
            iv: None,
            frontier_x: 1.0,
            res_train_ratio: DEFAULT_RES_TRAIN_RATIO,
        }
    }
}

/// Estimation output mirroring the layout of the published tables.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub sigma_hat: f64,
    /// Firm-clustered standard error of `sigma_hat`.
    pub se_clustered: f64,
    /// Bootstrap standard error; filled by [`monte_carlo_se`].
    pub se_monte_carlo: Option<f64>,
    /// Cross-firm mean fixed effect (the single model constant).
    pub intercept: f64,
    pub firm_effects: BTreeMap<String, f64>,
    /// Compute share weight recovered from the first-order conditions
    /// (inverting the cross-firm mean effect); undefined when
    /// `sigma_hat <= 0`.
    pub gamma_hat: Option<f64>,
    /// Diagnostic accompanying an undefined `gamma_hat`.
    pub gamma_note: Option<String>,
    /// Diagnostic per-firm share weights from inverting each firm's own
    /// effect; the model has one gamma, so dispersion here measures how
    /// much the fixed effects strain the constrained interpretation.
    pub gamma_by_firm: BTreeMap<String, Option<f64>>,
    /// Coefficient on `ln(K_tra)` (frontier specification only).
    pub ln_k_tra_coef: Option<f64>,
    /// First-stage F-statistic (instrumented fits only).
    pub first_stage_f: Option<f64>,
    /// R-squared on the untransformed outcome with firm effects included.
    pub r_squared: f64,
    /// R-squared of the within (demeaned) regression.
    pub r_squared_within: f64,
    pub n_obs: usize,
    pub n_firms: usize,
    /// Caveats: degenerate firms, few-cluster fragility, fallbacks.
    pub notes: Vec<String>,
}

/// Reusable regression state so bootstrap replications skip re-deriving the
/// panel.
struct FitEngine {
    y: DVector<f64>,
    /// Raw regressors: relative price first, then `ln(K_tra)` under the
    /// frontier specification, then an intercept column when no firm
    /// effects are absorbed.
    x: DMatrix<f64>,
    firms: Vec<String>,
    instrument: Option<DVector<f64>>,
    include_fe: bool,
    frontier: bool,
    n_firms: usize,
}

struct SolveOutput {
    coefficients: DVector<f64>,
    intercept: f64,
    firm_effects: BTreeMap<String, f64>,
    fitted: DVector<f64>,
    residuals: DVector<f64>,
    /// Design the covariance sandwich should use (demeaned; projected for
    /// 2SLS; includes the intercept column when no effects are absorbed).
    se_design: DMatrix<f64>,
    absorbed_params: usize,
    first_stage_f: Option<f64>,
}

impl FitEngine {
    fn new(spec: &RegressionSpec, panel: &[PanelObservation]) -> Result<Self> {
        let filtered: Vec<PanelObservation> = panel
            .iter()
            .filter(|o| spec.sample_filter.keeps(&o.firm, o.year))
            .cloned()
            .collect();
        if filtered.is_empty() {
            return Err(Error::validation("no observations pass the sample filter"));
        }

        let rows = panel::regression_rows(&filtered, spec.res_train_ratio)?;
        let n = rows.len();
        let frontier = spec.specification == Specification::Frontier;

        let y = DVector::from_iterator(n, rows.iter().map(|r| r.ln_ratio));
        let mut n_x_cols = 1 + usize::from(frontier);
        if !spec.include_firm_fe {
            n_x_cols += 1;
        }
        let mut x = DMatrix::zeros(n, n_x_cols);
        for (i, r) in rows.iter().enumerate() {
            x[(i, 0)] = r.ln_rel_price;
            if frontier {
                x[(i, 1)] = r.ln_k_tra;
            }
            if !spec.include_firm_fe {
                x[(i, n_x_cols - 1)] = 1.0;
            }
        }

        let firms: Vec<String> = rows.iter().map(|r| r.firm.clone()).collect();
        let mut distinct = firms.clone();
        distinct.sort();
        distinct.dedup();

        let instrument = match &spec.iv {
            None => None,
            Some(col) => {
                let mut values = Vec::with_capacity(n);
                for o in &filtered {
                    match o.extra.get(col) {
                        Some(v) => values.push(*v),
                        None => {
                            return Err(Error::validation(format!(
                                "({}, {}): instrument column {col:?} is missing",
                                o.firm, o.year
                            )))
                        }
                    }
                }
                Some(DVector::from_vec(values))
            }
        };

        Ok(FitEngine {
            y,
            x,
            firms,
            instrument,
            include_fe: spec.include_firm_fe,
            frontier,
            n_firms: distinct.len(),
        })
    }

    /// Fit the regression for an outcome vector (the panel outcome, or a
    /// bootstrap replica of it).
    fn solve(&self, y: &DVector<f64>) -> Result<SolveOutput> {
        let n = y.len();

        let (y_work, x_work, instr_work, within) = if self.include_fe {
            let w = within_transform(y, &self.x, &self.firms)?;
            let instr = match &self.instrument {
                Some(z) => {
                    let wz = within_transform(z, &DMatrix::zeros(n, 0), &self.firms)?;
                    Some(wz.y)
                }
                None => None,
            };
            (w.y.clone(), w.x.clone(), instr, Some(w))
        } else {
            (y.clone(), self.x.clone(), self.instrument.clone(), None)
        };

        let (coefficients, se_design, residuals_dm, first_stage_f) = match &instr_work {
            Some(z) => {
                let endog = x_work.column(0).into_owned();
                let exog = x_work.columns(1, x_work.ncols() - 1).into_owned();
                let absorbed = if self.include_fe { self.n_firms } else { 0 };
                let out = two_stage_ls(&y_work, &endog, z, &exog, absorbed)?;
                (out.coefficients, out.projected_design, out.residuals, Some(out.first_stage_f))
            }
            None => {
                let beta = ols(&y_work, &x_work)?;
                let resid = &y_work - &x_work * &beta;
                (beta, x_work.clone(), resid, None)
            }
        };

        // Firm effects and the model constant.
        let mut firm_effects = BTreeMap::new();
        let intercept = match &within {
            Some(w) => {
                for (g, ym) in &w.y_means {
                    let xm = &w.x_means[g];
                    firm_effects.insert(g.clone(), ym - xm.dot(&coefficients));
                }
                firm_effects.values().sum::<f64>() / firm_effects.len().max(1) as f64
            }
            None => coefficients[coefficients.len() - 1],
        };

        // Fitted values on the original scale. Demeaned residuals equal
        // original-scale residuals under the within transform, so fitted
        // values follow as y - u.
        let fitted = y - &residuals_dm;

        Ok(SolveOutput {
            coefficients,
            intercept,
            firm_effects,
            fitted,
            residuals: residuals_dm,
            se_design,
            absorbed_params: if self.include_fe { self.n_firms } else { 0 },
            first_stage_f,
        })
    }

    fn sorted_firm_labels(&self) -> Vec<String> {
        let mut v = self.firms.clone();
        v.sort();
        v.dedup();
        v
    }
}

/// Fit the estimation equation on a panel.
///
/// Builds the outcome and regressors, absorbs firm fixed effects when
/// requested, runs least squares (or 2SLS when an instrument is named), and
/// fills the result including the recovered gamma. `sigma_hat` is the
/// coefficient on the log relative price.
///
/// Samples with a single firm fall back to per-observation clusters
/// (HC1-style robust errors) since firm clustering needs two clusters; the
/// fallback is noted in the result.
pub fn fit(spec: &RegressionSpec, panel: &[PanelObservation]) -> Result<FitResult> {
    let engine = FitEngine::new(spec, panel)?;
    let solved = engine.solve(&engine.y)?;
    let n = engine.y.len();

    let mut notes = Vec::new();

    // Cluster assignment for the sandwich.
    let (cluster_labels, absorbed) = if engine.n_firms >= 2 {
        (engine.firms.clone(), solved.absorbed_params)
    } else {
        notes.push(
            "single-firm sample: clustered column reports per-observation (HC1-style) robust \
             errors"
                .to_string(),
        );
        ((0..n).map(|i| format!("row{i}")).collect(), solved.absorbed_params)
    };
    if engine.n_firms >= 2 && engine.n_firms <= 4 {
        notes.push(format!(
            "clustered standard errors rest on {} clusters; the asymptotic approximation is \
             fragile at this count",
            engine.n_firms
        ));
    }
    for (g, rows) in count_rows(&engine.firms) {
        if rows == 1 && engine.include_fe {
            notes.push(format!(
                "firm {g} contributes a single observation; it is absorbed by its own fixed \
                 effect"
            ));
        }
    }

    // Demeaned residuals equal original-scale residuals under the within
    // transform, so one sandwich serves both the OLS and 2SLS paths.
    let se = linalg::cluster_se_from_residuals(
        &solved.se_design,
        &solved.residuals,
        &cluster_labels,
        &ClusterSeOptions { small_sample: true, absorbed_params: absorbed },
    )?;

    // R-squared with firm effects included, against the overall mean. The
    // least-squares paths keep it in [0, 1] by construction; 2SLS
    // structural residuals can exceed the outcome variance, in which case
    // the floor applies and is noted.
    let y_mean = engine.y.sum() / n as f64;
    let tss: f64 = engine.y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let rss: f64 = solved.residuals.iter().map(|v| v * v).sum();
    let r_squared_raw = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    if r_squared_raw < 0.0 {
        notes.push(format!(
            "structural residual variance exceeds the outcome variance \
             (unclamped R-squared {r_squared_raw:.3}); reported as 0"
        ));
    }
    let r_squared = r_squared_raw.clamp(0.0, 1.0);

    let r_squared_within = if engine.include_fe {
        let w = within_transform(&engine.y, &engine.x, &engine.firms)?;
        let tss_w: f64 = w.y.iter().map(|v| v * v).sum();
        if tss_w > 0.0 {
            1.0 - rss / tss_w
        } else {
            0.0
        }
    } else {
        r_squared
    };

    let sigma_hat = solved.coefficients[0];
    let x_for_gamma = match spec.specification {
        Specification::Baseline => None,
        Specification::Frontier => Some(spec.frontier_x),
    };
    let (gamma_hat, gamma_note) =
        match recover_gamma(sigma_hat, solved.intercept, x_for_gamma, None) {
            GammaRecovery::Estimate(g) => (Some(g), None),
            GammaRecovery::Undefined { diagnostic } => (None, Some(diagnostic)),
        };
    let gamma_by_firm: BTreeMap<String, Option<f64>> = solved
        .firm_effects
        .iter()
        .map(|(firm, effect)| {
            let recovered = match recover_gamma(sigma_hat, *effect, x_for_gamma, None) {
                GammaRecovery::Estimate(g) => Some(g),
                GammaRecovery::Undefined { .. } => None,
            };
            (firm.clone(), recovered)
        })
        .collect();

    Ok(FitResult {
        sigma_hat,
        se_clustered: se[0],
        se_monte_carlo: None,
        intercept: solved.intercept,
        firm_effects: solved.firm_effects,
        gamma_hat,
        gamma_note,
        gamma_by_firm,
        ln_k_tra_coef: engine.frontier.then(|| solved.coefficients[1]),
        first_stage_f: solved.first_stage_f,
        r_squared,
        r_squared_within,
        n_obs: n,
        n_firms: engine.n_firms,
        notes,
    })
}

fn count_rows(firms: &[String]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for f in firms {
        *m.entry(f.clone()).or_insert(0) += 1;
    }
    m
}

/// Maximum redraws of a failed bootstrap replication before giving up.
pub const MC_RETRY_CAP: usize = 10;

/// Monte Carlo (bootstrap) standard error of `sigma_hat`.
///
/// Residuals are resampled at the firm level onto fitted values: each
/// replication draws one Rademacher sign per firm and flips that firm's
/// whole residual block, preserving the within-firm correlation structure
/// the clustered errors assume. The fit is repeated on each replica and the
/// standard deviation of `sigma_hat` across replications is returned.
///
/// Fitted residuals understate the disturbance scale in small samples, so
/// the resampled blocks are inflated by the square root of the same
/// `G/(G-1) * (n-1)/(n-k)` factor the clustered sandwich applies (with `k`
/// counting absorbed firm effects).
///
/// A single-firm sample degenerates under one shared sign (a whole-sample
/// flip leaves least squares unchanged), so it falls back to one sign per
/// observation, matching the per-observation cluster fallback of [`fit`].
///
/// Deterministic for a given seed: replication `i` draws from its own
/// stream derived from `(seed, i)`, so results do not depend on execution
/// order. A replication whose refit fails is redrawn, up to
/// [`MC_RETRY_CAP`] attempts.
pub fn monte_carlo_se(
    spec: &RegressionSpec,
    panel: &[PanelObservation],
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps < 100 {
        return Err(Error::validation(format!(
            "monte carlo standard errors need at least 100 replications, got {reps}"
        )));
    }
    let engine = FitEngine::new(spec, panel)?;
    let mut base = engine.solve(&engine.y)?;
    let firm_labels = engine.sorted_firm_labels();

    let n = engine.y.len() as f64;
    let g = engine.n_firms as f64;
    let k = (engine.x.ncols() + base.absorbed_params) as f64;
    let inflation = if n > k {
        let cluster_part = if g >= 2.0 { g / (g - 1.0) } else { 1.0 };
        (cluster_part * (n - 1.0) / (n - k)).sqrt()
    } else {
        1.0
    };
    base.residuals *= inflation;

    let per_observation = engine.n_firms < 2;
    let mut sigma_hats = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut estimate = None;
        for attempt in 0..=MC_RETRY_CAP {
            let stream = (rep as u64) | ((attempt as u64) << 48);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut y_star = base.fitted.clone();
            if per_observation {
                for i in 0..y_star.len() {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    y_star[i] += sign * base.residuals[i];
                }
            } else {
                let signs: BTreeMap<&str, f64> = firm_labels
                    .iter()
                    .map(|g| (g.as_str(), if rng.random::<bool>() { 1.0 } else { -1.0 }))
                    .collect();
                for (i, g) in engine.firms.iter().enumerate() {
                    y_star[i] += signs[g.as_str()] * base.residuals[i];
                }
            }
            match engine.solve(&y_star) {
                Ok(s) => {
                    estimate = Some(s.coefficients[0]);
                    break;
                }
                Err(_) => continue,
            }
        }
        match estimate {
            Some(v) => sigma_hats.push(v),
            None => {
                return Err(Error::computation(format!(
                    "bootstrap replication {rep} failed {MC_RETRY_CAP} redraws in a row"
                )))
            }
        }
    }

    let m = sigma_hats.iter().sum::<f64>() / reps as f64;
    let var = sigma_hats.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    Ok(var.sqrt())
}

/// Paired residual series behind an added-variable plot.
#[derive(Debug, Clone, Serialize)]
pub struct AddedVariableSeries {
    pub firm: Vec<String>,
    pub year: Vec<i32>,
    /// Relative price residualized on all other regressors.
    pub price_residuals: Vec<f64>,
    /// Outcome residualized on all other regressors.
    pub ratio_residuals: Vec<f64>,
    /// Least-squares slope through the pairs; equals the fitted sigma.
    pub slope: f64,
}

/// Residualize the outcome and the relative price on every other regressor
/// (firm effects, and `ln(K_tra)` under the frontier specification).
///
/// By partialled regression the slope through the returned pairs equals the
/// `sigma_hat` from [`fit`]. Any instrument named in `spec.iv` is ignored: the
/// series visualize the least-squares fit.
pub fn added_variable_series(
    spec: &RegressionSpec,
    panel: &[PanelObservation],
) -> Result<AddedVariableSeries> {
    let mut ols_spec = spec.clone();
    ols_spec.iv = None;
    let engine = FitEngine::new(&ols_spec, panel)?;

    let filtered: Vec<&PanelObservation> = panel
        .iter()
        .filter(|o| spec.sample_filter.keeps(&o.firm, o.year))
        .collect();

    let price = engine.x.column(0).into_owned();
    let others = engine.x.columns(1, engine.x.ncols() - 1).into_owned();

    let residualize = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let (v_work, o_work) = if engine.include_fe {
            let wv = within_transform(v, &others, &engine.firms)?;
            (wv.y, wv.x)
        } else {
            (v.clone(), others.clone())
        };
        if o_work.ncols() == 0 {
            Ok(v_work)
        } else {
            let beta = ols(&v_work, &o_work)?;
            Ok(&v_work - &o_work * beta)
        }
    };

    let e_price = residualize(&price)?;
    let e_ratio = residualize(&engine.y)?;

    let sxx: f64 = e_price.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(Error::computation(
            "relative price has no variation left after partialling",
        ));
    }
    let sxy: f64 = e_price.iter().zip(e_ratio.iter()).map(|(a, b)| a * b).sum();

    Ok(AddedVariableSeries {
        firm: filtered.iter().map(|o| o.firm.clone()).collect(),
        year: filtered.iter().map(|o| o.year).collect(),
        price_residuals: e_price.iter().copied().collect(),
        ratio_residuals: e_ratio.iter().copied().collect(),
        slope: sxy / sxx,
    })
}

/// Result of inverting the intercept for the compute share weight.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaRecovery {
    Estimate(f64),
    /// Not an error: the model cannot produce `sigma <= 0`, so no share
    /// weight rationalizes such an estimate.
    Undefined { diagnostic: String },
}

/// Recover gamma from the fitted intercept via the first-order conditions.
///
/// Baseline (`x = None`): `intercept = sigma ln(gamma/(1-gamma))`, so
/// `gamma = 1/(1 + exp(-intercept/sigma))`. Frontier (`x = Some`): the
/// intercept also carries `-(1-sigma) ln x`, which is removed first; `x`
/// defaults to 1 where the caller has no better value, in which case the
/// term vanishes. `k_tra_reference` additionally removes a
/// `(1-sigma) ln k_ref` term for intercepts that absorbed a constant
/// training-compute regressor at scale `k_ref`.
pub fn recover_gamma(
    sigma_hat: f64,
    intercept: f64,
    x: Option<f64>,
    k_tra_reference: Option<f64>,
) -> GammaRecovery {
    if !sigma_hat.is_finite() || sigma_hat <= 0.0 {
        return GammaRecovery::Undefined {
            diagnostic: format!(
                "sigma_hat = {sigma_hat} is not positive; the production model admits no \
                 share weight for it (statistically it may be indistinguishable from zero)"
            ),
        };
    }
    let mut core = intercept;
    if let Some(x) = x {
        if !(x.is_finite() && x >= 1.0) {
            return GammaRecovery::Undefined {
                diagnostic: format!("frontier multiplier x must be >= 1, got {x}"),
            };
        }
        core += (1.0 - sigma_hat) * x.ln();
    }
    if let Some(k_ref) = k_tra_reference {
        if !(k_ref.is_finite() && k_ref > 0.0) {
            return GammaRecovery::Undefined {
                diagnostic: format!("k_tra reference must be > 0, got {k_ref}"),
            };
        }
        core -= (1.0 - sigma_hat) * k_ref.ln();
    }
    let gamma = 1.0 / (1.0 + (-core / sigma_hat).exp());
    if gamma > 0.0 && gamma < 1.0 {
        GammaRecovery::Estimate(gamma)
    } else {
        GammaRecovery::Undefined {
            diagnostic: format!(
                "intercept/sigma ratio {} saturates the logistic inversion",
                core / sigma_hat
            ),
        }
    }
}

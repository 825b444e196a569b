//! Regression machinery: within transform, QR least squares, cluster-robust
//! sandwich covariance, and two-stage least squares.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot tolerance below which a design column counts as linearly
/// dependent on its predecessors.
const RANK_TOL: f64 = 1e-10;

/// Outcome and regressors with group means removed, plus the means needed to
/// recover the group (firm) effects afterwards.
#[derive(Debug, Clone)]
pub struct WithinTransformed {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub y_means: BTreeMap<String, f64>,
    pub x_means: BTreeMap<String, DVector<f64>>,
    /// Rows belonging to each group, in first-appearance order of labels.
    pub group_rows: BTreeMap<String, Vec<usize>>,
}

/// Subtract group means from the outcome and every regressor column.
///
/// Demeaning absorbs group-level fixed effects; the stored means recover
/// them as `alpha_g = mean(y_g) - mean(x_g) . beta`.
pub fn within_transform(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    groups: &[String],
) -> Result<WithinTransformed> {
    let n = y.len();
    if x.nrows() != n || groups.len() != n {
        return Err(Error::validation(format!(
            "dimension mismatch: y has {n} rows, x has {}, groups has {}",
            x.nrows(),
            groups.len()
        )));
    }
    if n == 0 {
        return Err(Error::validation("within transform needs at least one row"));
    }

    let mut group_rows: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        group_rows.entry(g.clone()).or_default().push(i);
    }

    let p = x.ncols();
    let mut y_dm = y.clone();
    let mut x_dm = x.clone();
    let mut y_means = BTreeMap::new();
    let mut x_means = BTreeMap::new();

    for (g, rows) in &group_rows {
        let ng = rows.len() as f64;
        let ym = rows.iter().map(|&i| y[i]).sum::<f64>() / ng;
        let mut xm = DVector::zeros(p);
        for &i in rows {
            for j in 0..p {
                xm[j] += x[(i, j)];
            }
        }
        xm /= ng;
        for &i in rows {
            y_dm[i] -= ym;
            for j in 0..p {
                x_dm[(i, j)] -= xm[j];
            }
        }
        y_means.insert(g.clone(), ym);
        x_means.insert(g.clone(), xm);
    }

    Ok(WithinTransformed { y: y_dm, x: x_dm, y_means, x_means, group_rows })
}

/// Index of the first column linearly dependent on its predecessors, by
/// twice-reorthogonalized Gram-Schmidt. `None` means full column rank.
fn first_dependent_column(x: &DMatrix<f64>) -> Option<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..x.ncols() {
        let mut v = x.column(j).into_owned();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            return Some(j);
        }
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm <= RANK_TOL * norm0 {
            return Some(j);
        }
        basis.push(v / norm);
    }
    None
}

/// Least-squares coefficients of `y` on the columns of `x`, solved through a
/// Householder QR factorization.
///
/// Rank deficiency is reported with the index of the offending column.
pub fn ols(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = y.len();
    let p = x.ncols();
    if x.nrows() != n {
        return Err(Error::validation(format!(
            "dimension mismatch: y has {n} rows, x has {}",
            x.nrows()
        )));
    }
    if p == 0 || n < p {
        return Err(Error::validation(format!(
            "need at least as many rows as columns, got {n} rows for {p} columns"
        )));
    }
    if let Some(j) = first_dependent_column(x) {
        return Err(Error::computation(format!(
            "design matrix is rank deficient: column {j} is linearly dependent on its \
             predecessors"
        )));
    }
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::computation("QR back-substitution failed"))
}

/// Small-sample handling for the cluster sandwich.
#[derive(Debug, Clone, Copy)]
pub struct ClusterSeOptions {
    /// Apply the `G/(G-1) * (n-1)/(n-k)` degrees-of-freedom factor.
    pub small_sample: bool,
    /// Parameters absorbed outside the passed design (e.g. firm effects
    /// removed by the within transform); counted into `k`.
    pub absorbed_params: usize,
}

impl Default for ClusterSeOptions {
    fn default() -> Self {
        ClusterSeOptions { small_sample: true, absorbed_params: 0 }
    }
}

/// Cluster-robust (sandwich) standard errors for `coef` from the regression
/// of `y` on `x`, allowing arbitrary error correlation within each cluster:
///
/// ```text
/// V = c (X'X)^-1 [ sum_g X_g' u_g u_g' X_g ] (X'X)^-1,
/// c = G/(G-1) * (n-1)/(n-k)
/// ```
///
/// with `k` the passed columns plus any absorbed parameters. With every
/// observation its own cluster this reduces to HC1-style robust errors.
pub fn cluster_robust_se(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    coef: &DVector<f64>,
    clusters: &[String],
    opts: &ClusterSeOptions,
) -> Result<DVector<f64>> {
    if x.nrows() != y.len() || coef.len() != x.ncols() {
        return Err(Error::validation(
            "dimension mismatch between y, x, and coef",
        ));
    }
    let residuals = y - x * coef;
    cluster_se_from_residuals(x, &residuals, clusters, opts)
}

/// Sandwich errors from precomputed residuals; the 2SLS path needs this
/// because its residuals come from the original (not projected) design.
pub fn cluster_se_from_residuals(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    clusters: &[String],
    opts: &ClusterSeOptions,
) -> Result<DVector<f64>> {
    let n = residuals.len();
    let p = x.ncols();
    if x.nrows() != n || clusters.len() != n {
        return Err(Error::validation(
            "dimension mismatch between x, residuals, and clusters",
        ));
    }

    let mut cluster_rows: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in clusters.iter().enumerate() {
        cluster_rows.entry(c.as_str()).or_default().push(i);
    }
    let g = cluster_rows.len();
    if g < 2 {
        return Err(Error::validation(format!(
            "cluster-robust errors need at least 2 clusters, got {g}"
        )));
    }

    let xtx = x.transpose() * x;
    let bread = xtx
        .try_inverse()
        .ok_or_else(|| Error::computation("X'X is singular in the sandwich bread"))?;

    let mut meat = DMatrix::<f64>::zeros(p, p);
    for rows in cluster_rows.values() {
        let mut score = DVector::<f64>::zeros(p);
        for &i in rows {
            for j in 0..p {
                score[j] += x[(i, j)] * residuals[i];
            }
        }
        meat += &score * score.transpose();
    }

    let k = (p + opts.absorbed_params) as f64;
    let (nf, gf) = (n as f64, g as f64);
    let factor = if opts.small_sample && nf > k {
        (gf / (gf - 1.0)) * ((nf - 1.0) / (nf - k))
    } else {
        1.0
    };

    let vcov = &bread * meat * &bread * factor;
    Ok(DVector::from_iterator(p, (0..p).map(|j| vcov[(j, j)].max(0.0).sqrt())))
}

/// Output of the two-stage least-squares estimator.
#[derive(Debug, Clone)]
pub struct TwoStageOutput {
    /// Coefficients on `[endogenous | exogenous]`, endogenous first.
    pub coefficients: DVector<f64>,
    /// F-statistic on the excluded instrument in the first stage.
    pub first_stage_f: f64,
    /// Structural residuals `y - [endog | exog] beta` (original regressor).
    pub residuals: DVector<f64>,
    /// Second-stage design `[endog_hat | exog]`, for covariance work.
    pub projected_design: DMatrix<f64>,
}

/// Two-stage least squares with a single endogenous regressor and a single
/// excluded instrument.
///
/// The first stage regresses the endogenous column on `[instrument | exog]`;
/// the second stage replaces it with fitted values. `absorbed_dof` counts
/// parameters removed before the call (absorbed fixed effects) and enters
/// the first-stage F degrees of freedom.
pub fn two_stage_ls(
    y: &DVector<f64>,
    endogenous: &DVector<f64>,
    instrument: &DVector<f64>,
    exogenous: &DMatrix<f64>,
    absorbed_dof: usize,
) -> Result<TwoStageOutput> {
    let n = y.len();
    if endogenous.len() != n || instrument.len() != n || exogenous.nrows() != n {
        return Err(Error::validation("dimension mismatch in two-stage least squares"));
    }
    let mean = instrument.sum() / n as f64;
    if instrument.iter().all(|v| (v - mean).abs() < 1e-300) {
        return Err(Error::validation("instrument has zero variance"));
    }

    let k_exog = exogenous.ncols();

    // First stage: endogenous ~ [instrument | exog].
    let mut z = DMatrix::zeros(n, 1 + k_exog);
    z.set_column(0, instrument);
    for j in 0..k_exog {
        z.set_column(1 + j, &exogenous.column(j).into_owned());
    }
    let gamma = ols(endogenous, &z)?;
    let fitted = &z * &gamma;
    let resid_u = endogenous - &fitted;
    let rss_u: f64 = resid_u.iter().map(|r| r * r).sum();

    // Restricted first stage drops the instrument; with no exogenous columns
    // the restricted fit is identically zero (variables arrive demeaned).
    let rss_r: f64 = if k_exog > 0 {
        let gamma_r = ols(endogenous, exogenous)?;
        let resid_r = endogenous - exogenous * gamma_r;
        resid_r.iter().map(|r| r * r).sum()
    } else {
        endogenous.iter().map(|v| v * v).sum()
    };

    let dof = n as f64 - (1 + k_exog + absorbed_dof) as f64;
    let first_stage_f = if rss_u > 0.0 && dof > 0.0 {
        ((rss_r - rss_u) / 1.0) / (rss_u / dof)
    } else {
        f64::INFINITY
    };

    // Second stage on [endog_hat | exog].
    let mut x2 = DMatrix::zeros(n, 1 + k_exog);
    x2.set_column(0, &fitted);
    for j in 0..k_exog {
        x2.set_column(1 + j, &exogenous.column(j).into_owned());
    }
    let beta = ols(y, &x2)?;

    // Structural residuals use the original endogenous regressor.
    let mut x_orig = DMatrix::zeros(n, 1 + k_exog);
    x_orig.set_column(0, endogenous);
    for j in 0..k_exog {
        x_orig.set_column(1 + j, &exogenous.column(j).into_owned());
    }
    let residuals = y - &x_orig * &beta;

    Ok(TwoStageOutput { coefficients: beta, first_stage_f, residuals, projected_design: x2 })
}

//! Plain-text rendering of a fit in the published-table layout: point
//! estimate, clustered standard error in parentheses, Monte Carlo standard
//! error in brackets, controls line, observation count, R².

use super::{FitResult, RegressionSpec, Specification};

fn fmt_val(v: f64) -> String {
    if v == 0.0 {
        "0.000".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

/// Controls description for the table, e.g. `Firm FE + ln(K_train)`.
pub fn controls_line(spec: &RegressionSpec) -> String {
    let mut parts = Vec::new();
    if spec.include_firm_fe {
        parts.push("Firm FE".to_string());
    }
    if spec.specification == Specification::Frontier {
        parts.push("ln(K_train)".to_string());
    }
    if parts.is_empty() {
        "None".to_string()
    } else {
        parts.join(" + ")
    }
}

/// Render one fitted column in the table layout.
pub fn render_table(result: &FitResult, spec: &RegressionSpec) -> String {
    let title = match spec.specification {
        Specification::Baseline => "CES in Compute",
        Specification::Frontier => "CES in Frontier Experiments",
    };

    let mut rows: Vec<(String, String)> = Vec::new();
    rows.push(("Elasticity of Substitution (sigma)".into(), fmt_val(result.sigma_hat)));
    rows.push((String::new(), format!("({})", fmt_val(result.se_clustered))));
    if let Some(mc) = result.se_monte_carlo {
        rows.push((String::new(), format!("[{}]", fmt_val(mc))));
    }
    if let Some(f) = result.first_stage_f {
        rows.push(("First-Stage F-statistic".into(), format!("{f:.2}")));
    }
    rows.push(("Implied gamma".into(), match result.gamma_hat {
        Some(g) => fmt_val(g),
        None => "undefined (sigma <= 0)".into(),
    }));
    rows.push(("Controls".into(), controls_line(spec)));
    rows.push(("Observations".into(), result.n_obs.to_string()));
    rows.push(("R-squared".into(), format!("{:.3}", result.r_squared)));

    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let value_w = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(title.len());

    let mut out = String::new();
    let sep = "-".repeat(label_w + value_w + 2);
    out.push_str(&format!("{:label_w$}  {:>value_w$}\n", "", title));
    out.push_str(&sep);
    out.push('\n');
    for (label, value) in &rows {
        out.push_str(&format!("{label:label_w$}  {value:>value_w$}\n"));
    }
    out.push_str(&sep);
    out.push('\n');
    out.push_str(
        "Standard errors in parentheses are clustered at the firm level; Monte Carlo\n\
         standard errors are in square brackets.\n",
    );
    for note in &result.notes {
        out.push_str(&format!("Note: {note}\n"));
    }
    out
}

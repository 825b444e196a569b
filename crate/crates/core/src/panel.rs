//! Firm-year panel ingestion and construction of regression-ready columns.
//!
//! Input files are delimited text (comma by default) with a header row. The
//! declared column names are:
//!
//! ```text
//! firm, year, headcount, wage, wage_is_salary, rental_price_per_flop,
//! train_compute_flop, research_compute_flop (optional),
//! inference_compute_flop (optional), carry_forward (optional)
//! ```
//!
//! Lines starting with `#` are comments (generated panels carry their
//! configuration in such a preamble). Unknown numeric columns are kept as
//! extras so a regression can name one as an instrument.
//!
//! Construction rules applied on the way to the regression variables:
//! research compute defaults to one third of training compute when not
//! supplied; salaries are grossed up to total compensation under a 40%
//! salary share; monetary values deflate to 2023 USD; a `carry_forward` flag
//! copies the prior year's training compute into years without a new model.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Fraction of total compensation that is salary, used to gross salaries up.
pub const DEFAULT_SALARY_SHARE: f64 = 0.4;

/// Default research-to-training compute ratio.
pub const DEFAULT_RES_TRAIN_RATIO: f64 = 1.0 / 3.0;

/// Base year all monetary values deflate to.
pub const BASE_YEAR: i32 = 2023;

/// One firm-year record in declared units: persons, currency per
/// person-year, currency per FLOP, FLOP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelObservation {
    pub firm: String,
    pub year: i32,
    pub headcount: f64,
    /// Nominal wage; a salary when `wage_is_salary`, else total compensation.
    pub wage_nominal: f64,
    pub wage_is_salary: bool,
    /// Salary share of total compensation used for imputation.
    pub salary_share: f64,
    /// Nominal compute rental price per FLOP.
    pub r_nominal: f64,
    /// Training compute (FLOP).
    pub k_tra: f64,
    /// Research compute (FLOP) when supplied; derived from `k_tra` otherwise.
    pub k_res: Option<f64>,
    /// Inference compute (FLOP); carried but unused by estimation.
    pub k_inf: Option<f64>,
    /// Additional numeric columns from the input, e.g. instruments.
    pub extra: BTreeMap<String, f64>,
}

impl PanelObservation {
    pub fn validate(&self, year_min: i32, year_max: i32) -> Result<()> {
        let at = |msg: String| Error::validation(format!("({}, {}): {msg}", self.firm, self.year));
        if self.firm.trim().is_empty() {
            return Err(Error::validation(format!("year {}: empty firm name", self.year)));
        }
        if self.year < year_min || self.year > year_max {
            return Err(at(format!("year outside declared range [{year_min}, {year_max}]")));
        }
        if !(self.headcount.is_finite() && self.headcount > 0.0) {
            return Err(at(format!("headcount must be > 0, got {}", self.headcount)));
        }
        if !(self.wage_nominal.is_finite() && self.wage_nominal > 0.0) {
            return Err(at(format!("wage must be > 0, got {}", self.wage_nominal)));
        }
        if !(self.salary_share > 0.0 && self.salary_share <= 1.0) {
            return Err(at(format!("salary_share must lie in (0, 1], got {}", self.salary_share)));
        }
        if !(self.r_nominal.is_finite() && self.r_nominal > 0.0) {
            return Err(at(format!("rental price must be > 0, got {}", self.r_nominal)));
        }
        if !(self.k_tra.is_finite() && self.k_tra > 0.0) {
            return Err(at(format!("training compute must be > 0, got {}", self.k_tra)));
        }
        if let Some(k) = self.k_res {
            if !(k.is_finite() && k > 0.0) {
                return Err(at(format!("research compute must be > 0, got {k}")));
            }
        }
        if let Some(k) = self.k_inf {
            if !(k.is_finite() && k >= 0.0) {
                return Err(at(format!("inference compute must be >= 0, got {k}")));
            }
        }
        Ok(())
    }

    /// Nominal total compensation: the wage itself, or the salary grossed up
    /// by the salary share.
    pub fn total_compensation(&self) -> Result<f64> {
        if self.wage_is_salary {
            impute_total_compensation_with(self.wage_nominal, self.salary_share)
        } else {
            Ok(self.wage_nominal)
        }
    }

    /// Research compute, deriving from training compute at `ratio` when the
    /// column was absent. Explicit values are never rescaled.
    pub fn research_compute(&self, ratio: f64) -> Result<f64> {
        match self.k_res {
            Some(k) => Ok(k),
            None => derive_research_compute_with(self.k_tra, ratio),
        }
    }
}

/// Column-name map plus the declared year range for validation.
#[derive(Debug, Clone)]
pub struct PanelSchema {
    pub firm: String,
    pub year: String,
    pub headcount: String,
    pub wage: String,
    pub wage_is_salary: String,
    pub rental_price: String,
    pub train_compute: String,
    pub research_compute: String,
    pub inference_compute: String,
    pub carry_forward: String,
    pub year_min: i32,
    pub year_max: i32,
    /// Salary share recorded on loaded observations.
    pub salary_share: f64,
    /// Field delimiter; comma by default.
    pub delimiter: u8,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            firm: "firm".into(),
            year: "year".into(),
            headcount: "headcount".into(),
            wage: "wage".into(),
            wage_is_salary: "wage_is_salary".into(),
            rental_price: "rental_price_per_flop".into(),
            train_compute: "train_compute_flop".into(),
            research_compute: "research_compute_flop".into(),
            inference_compute: "inference_compute_flop".into(),
            carry_forward: "carry_forward".into(),
            year_min: 1990,
            year_max: 2100,
            salary_share: DEFAULT_SALARY_SHARE,
            delimiter: b',',
        }
    }
}

fn parse_bool(raw: &str, location: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" | "" => Ok(false),
        other => Err(Error::Parse {
            location: location.to_string(),
            message: format!("expected boolean, got {other:?}"),
        }),
    }
}

fn parse_f64(raw: &str, location: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|e| Error::Parse {
        location: location.to_string(),
        message: format!("expected number, got {raw:?}: {e}"),
    })
}

/// Load and validate a panel from delimited text.
///
/// Rejects duplicate (firm, year) keys and nonpositive quantities with the
/// offending row named. Resolves `carry_forward` flags by copying the prior
/// year's training compute within the firm.
pub fn load_panel<R: Read>(reader: R, schema: &PanelSchema) -> Result<Vec<PanelObservation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { location: "header".into(), message: e.to_string() })?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        col(name).ok_or_else(|| Error::Parse {
            location: "header".into(),
            message: format!("missing required column {name:?}"),
        })
    };

    let i_firm = required(&schema.firm)?;
    let i_year = required(&schema.year)?;
    let i_head = required(&schema.headcount)?;
    let i_wage = required(&schema.wage)?;
    let i_salary_flag = required(&schema.wage_is_salary)?;
    let i_rent = required(&schema.rental_price)?;
    let i_ktra = required(&schema.train_compute)?;
    let i_kres = col(&schema.research_compute);
    let i_kinf = col(&schema.inference_compute);
    let i_carry = col(&schema.carry_forward);

    let known: BTreeSet<usize> = [
        Some(i_firm),
        Some(i_year),
        Some(i_head),
        Some(i_wage),
        Some(i_salary_flag),
        Some(i_rent),
        Some(i_ktra),
        i_kres,
        i_kinf,
        i_carry,
    ]
    .into_iter()
    .flatten()
    .collect();

    let mut rows: Vec<(PanelObservation, bool)> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            location: format!("row {}", idx + 2),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(idx as u64 + 2);
        let cell = |i: usize, name: &str| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Parse {
                location: format!("line {line}"),
                message: format!("missing field {name:?}"),
            })
        };
        let loc = |name: &str| format!("line {line}, column {name:?}");

        let firm = cell(i_firm, &schema.firm)?.to_string();
        let year_raw = cell(i_year, &schema.year)?;
        let year: i32 = year_raw.trim().parse().map_err(|e| Error::Parse {
            location: loc(&schema.year),
            message: format!("expected year, got {year_raw:?}: {e}"),
        })?;

        let carry = match i_carry {
            Some(i) => parse_bool(cell(i, &schema.carry_forward)?, &loc(&schema.carry_forward))?,
            None => false,
        };

        // Training compute may be blank on carry-forward rows; it is filled
        // from the prior year after the whole file is read.
        let ktra_raw = cell(i_ktra, &schema.train_compute)?;
        let k_tra = if ktra_raw.trim().is_empty() {
            if !carry {
                return Err(Error::Parse {
                    location: loc(&schema.train_compute),
                    message: "empty training compute on a row without carry_forward".into(),
                });
            }
            f64::NAN
        } else {
            parse_f64(ktra_raw, &loc(&schema.train_compute))?
        };

        let opt_f64 = |i: Option<usize>, name: &str| -> Result<Option<f64>> {
            match i {
                None => Ok(None),
                Some(i) => {
                    let raw = cell(i, name)?;
                    if raw.trim().is_empty() {
                        Ok(None)
                    } else {
                        parse_f64(raw, &loc(name)).map(Some)
                    }
                }
            }
        };

        let mut extra = BTreeMap::new();
        for (i, header) in headers.iter().enumerate() {
            if known.contains(&i) {
                continue;
            }
            let raw = record.get(i).unwrap_or("");
            if !raw.trim().is_empty() {
                extra.insert(header.clone(), parse_f64(raw, &loc(header))?);
            }
        }

        let obs = PanelObservation {
            firm,
            year,
            headcount: parse_f64(cell(i_head, &schema.headcount)?, &loc(&schema.headcount))?,
            wage_nominal: parse_f64(cell(i_wage, &schema.wage)?, &loc(&schema.wage))?,
            wage_is_salary: parse_bool(
                cell(i_salary_flag, &schema.wage_is_salary)?,
                &loc(&schema.wage_is_salary),
            )?,
            salary_share: schema.salary_share,
            r_nominal: parse_f64(cell(i_rent, &schema.rental_price)?, &loc(&schema.rental_price))?,
            k_tra,
            k_res: opt_f64(i_kres, &schema.research_compute)?,
            k_inf: opt_f64(i_kinf, &schema.inference_compute)?,
            extra,
        };
        rows.push((obs, carry));
    }

    if rows.is_empty() {
        return Err(Error::validation("panel file contains no observations"));
    }

    // Duplicate keys.
    let mut seen = BTreeSet::new();
    for (obs, _) in &rows {
        if !seen.insert((obs.firm.clone(), obs.year)) {
            return Err(Error::validation(format!(
                "duplicate (firm, year) key ({}, {})",
                obs.firm, obs.year
            )));
        }
    }

    // Carry-forward resolution: latest earlier year within the firm.
    let carry_firms: BTreeSet<String> =
        rows.iter().filter(|(_, c)| *c).map(|(o, _)| o.firm.clone()).collect();
    for firm in carry_firms {
        let mut by_year: Vec<(i32, usize)> = rows
            .iter()
            .enumerate()
            .filter(|(_, (o, _))| o.firm == firm)
            .map(|(i, (o, _))| (o.year, i))
            .collect();
        by_year.sort_unstable();
        let mut prior: Option<f64> = None;
        for (year, i) in by_year {
            if rows[i].1 {
                match prior {
                    Some(k) => rows[i].0.k_tra = k,
                    None => {
                        return Err(Error::validation(format!(
                            "({firm}, {year}): carry_forward set but no prior-year training \
                             compute exists"
                        )))
                    }
                }
            }
            prior = Some(rows[i].0.k_tra);
        }
    }

    let observations: Vec<PanelObservation> = rows.into_iter().map(|(o, _)| o).collect();
    for obs in &observations {
        obs.validate(schema.year_min, schema.year_max)?;
    }
    Ok(observations)
}

/// Write observations in the exact input format `load_panel` reads.
///
/// With `include_research = false` the research-compute column is omitted so
/// that a loader derives it from training compute.
pub fn write_panel_csv<W: Write>(
    observations: &[PanelObservation],
    mut w: W,
    include_research: bool,
) -> Result<()> {
    let schema = PanelSchema::default();
    let mut header = vec![
        schema.firm.as_str(),
        schema.year.as_str(),
        schema.headcount.as_str(),
        schema.wage.as_str(),
        schema.wage_is_salary.as_str(),
        schema.rental_price.as_str(),
        schema.train_compute.as_str(),
    ];
    if include_research {
        header.push(schema.research_compute.as_str());
    }
    writeln!(w, "{}", header.join(","))?;
    for o in observations {
        let mut row = format!(
            "{},{},{},{},{},{},{}",
            o.firm, o.year, o.headcount, o.wage_nominal, o.wage_is_salary, o.r_nominal, o.k_tra
        );
        if include_research {
            row.push(',');
            if let Some(k) = o.k_res {
                row.push_str(&k.to_string());
            }
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Year-to-deflator table relative to [`BASE_YEAR`] (whose entry must be 1).
#[derive(Debug, Clone, Serialize)]
pub struct CpiTable {
    deflators: BTreeMap<i32, f64>,
}

impl CpiTable {
    pub fn new(deflators: BTreeMap<i32, f64>) -> Result<Self> {
        match deflators.get(&BASE_YEAR) {
            Some(&d) if (d - 1.0).abs() < 1e-12 => {}
            Some(&d) => {
                return Err(Error::validation(format!(
                    "base year {BASE_YEAR} deflator must equal 1, got {d}"
                )))
            }
            None => {
                return Err(Error::validation(format!(
                    "deflator table is missing the base year {BASE_YEAR}"
                )))
            }
        }
        for (year, d) in &deflators {
            if !(d.is_finite() && *d > 0.0) {
                return Err(Error::validation(format!("deflator for {year} must be > 0, got {d}")));
            }
        }
        Ok(CpiTable { deflators })
    }

    /// Parse a `year,deflator` file.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut map = BTreeMap::new();
        for (idx, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                location: format!("cpi row {}", idx + 2),
                message: e.to_string(),
            })?;
            let year: i32 = record
                .get(0)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::Parse {
                    location: format!("cpi row {}", idx + 2),
                    message: format!("bad year: {e}"),
                })?;
            let deflator = parse_f64(record.get(1).unwrap_or(""), &format!("cpi row {}", idx + 2))?;
            if map.insert(year, deflator).is_some() {
                return Err(Error::validation(format!("duplicate deflator entry for {year}")));
            }
        }
        CpiTable::new(map)
    }

    pub fn deflator(&self, year: i32) -> Result<f64> {
        self.deflators.get(&year).copied().ok_or_else(|| {
            Error::validation(format!("no deflator entry for year {year}"))
        })
    }
}

/// Deflate a nominal value to base-year (2023) units.
pub fn deflate(nominal: f64, year: i32, cpi: &CpiTable) -> Result<f64> {
    if !nominal.is_finite() {
        return Err(Error::domain(format!("nominal value must be finite, got {nominal}")));
    }
    Ok(nominal / cpi.deflator(year)?)
}

/// Research compute from training compute at the default 1:3 spend ratio.
pub fn derive_research_compute(k_tra: f64) -> Result<f64> {
    derive_research_compute_with(k_tra, DEFAULT_RES_TRAIN_RATIO)
}

/// Research compute from training compute at a configurable ratio.
pub fn derive_research_compute_with(k_tra: f64, ratio: f64) -> Result<f64> {
    if !(k_tra.is_finite() && k_tra > 0.0) {
        return Err(Error::domain(format!("k_tra must be > 0, got {k_tra}")));
    }
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::domain(format!("research/training ratio must be > 0, got {ratio}")));
    }
    Ok(k_tra * ratio)
}

/// Total compensation from a salary at the default 40% salary share.
pub fn impute_total_compensation(salary: f64) -> Result<f64> {
    impute_total_compensation_with(salary, DEFAULT_SALARY_SHARE)
}

/// Total compensation from a salary at a configurable salary share.
pub fn impute_total_compensation_with(salary: f64, salary_share: f64) -> Result<f64> {
    if !(salary.is_finite() && salary > 0.0) {
        return Err(Error::domain(format!("salary must be > 0, got {salary}")));
    }
    if !(salary_share > 0.0 && salary_share <= 1.0) {
        return Err(Error::domain(format!(
            "salary_share must lie in (0, 1], got {salary_share}"
        )));
    }
    Ok(salary / salary_share)
}

/// Regression-ready derived variables for one firm-year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedRow {
    pub firm: String,
    pub year: i32,
    /// ln(research compute / headcount).
    pub ln_ratio: f64,
    /// ln(real wage / real compute price).
    pub ln_rel_price: f64,
    /// ln(training compute).
    pub ln_k_tra: f64,
}

/// Knobs for [`build_regressors`].
#[derive(Debug, Clone, Copy)]
pub struct DeriveOptions {
    pub res_train_ratio: f64,
}

impl Default for DeriveOptions {
    fn default() -> Self {
        DeriveOptions { res_train_ratio: DEFAULT_RES_TRAIN_RATIO }
    }
}

fn derived_row(
    obs: &PanelObservation,
    wage_deflator: f64,
    price_deflator: f64,
    ratio: f64,
) -> Result<DerivedRow> {
    let at = |msg: String| Error::validation(format!("({}, {}): {msg}", obs.firm, obs.year));
    let w_real = obs.total_compensation()? / wage_deflator;
    let r_real = obs.r_nominal / price_deflator;
    let k_res = obs.research_compute(ratio)?;
    let row = DerivedRow {
        firm: obs.firm.clone(),
        year: obs.year,
        ln_ratio: (k_res / obs.headcount).ln(),
        ln_rel_price: (w_real / r_real).ln(),
        ln_k_tra: obs.k_tra.ln(),
    };
    for (name, v) in [
        ("ln_ratio", row.ln_ratio),
        ("ln_rel_price", row.ln_rel_price),
        ("ln_k_tra", row.ln_k_tra),
    ] {
        if !v.is_finite() {
            return Err(at(format!("derived {name} is not finite ({v})")));
        }
    }
    Ok(row)
}

/// Apply imputation, deflation, and research-compute derivation, then emit
/// the three regression variables per row. Row count is preserved.
pub fn build_regressors(
    panel: &[PanelObservation],
    cpi: &CpiTable,
    opts: &DeriveOptions,
) -> Result<Vec<DerivedRow>> {
    panel
        .iter()
        .map(|obs| {
            let d = cpi.deflator(obs.year).map_err(|e| {
                Error::validation(format!("({}, {}): {e}", obs.firm, obs.year))
            })?;
            derived_row(obs, d, d, opts.res_train_ratio)
        })
        .collect()
}

/// Regression variables without deflation. Only the wage/price ratio enters
/// estimation and the same-year deflator cancels from it, so fitting on
/// these rows is equivalent to fitting on [`build_regressors`] output.
pub fn regression_rows(panel: &[PanelObservation], ratio: f64) -> Result<Vec<DerivedRow>> {
    panel.iter().map(|obs| derived_row(obs, 1.0, 1.0, ratio)).collect()
}

/// Write derived rows as delimited text, bit-stable across runs.
pub fn write_derived_rows<W: Write>(rows: &[DerivedRow], mut w: W) -> Result<()> {
    writeln!(w, "firm,year,ln_ratio,ln_rel_price,ln_k_tra")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.firm, r.year, r.ln_ratio, r.ln_rel_price, r.ln_k_tra)?;
    }
    Ok(())
}

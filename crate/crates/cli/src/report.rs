//! Markdown rendering of study summaries, one row per method with the
//! table columns the simulation writeups use.

use ivsel_core::study::{Method, StudySummary};
use ivsel_core::{Error, Result};

/// One summary row in display form. Numeric fields are `None` when the
/// source block had no finite estimates.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub method: String,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    pub true_n: u64,
    pub true_pct: Option<f64>,
    pub incl_n: u64,
    pub incl_pct: Option<f64>,
    pub both_n: Option<u64>,
    pub both_pct: Option<f64>,
    pub nonconv: u64,
}

pub fn rows_from_summary(summary: &StudySummary, converged_only: bool) -> Vec<SummaryRow> {
    let lift = |v: f64| if v.is_nan() { None } else { Some(v) };
    summary
        .methods
        .iter()
        .map(|m| {
            let b = if converged_only { &m.converged_only } else { &m.all };
            SummaryRow {
                method: m.method.name(),
                mean: lift(b.mean),
                sd: lift(b.sd),
                median: lift(b.median),
                min: lift(b.min),
                max: lift(b.max),
                bias: lift(b.bias),
                rmse: lift(b.rmse),
                true_n: m.true_n as u64,
                true_pct: lift(m.true_pct()),
                incl_n: m.incl_n as u64,
                incl_pct: lift(m.incl_pct()),
                both_n: m.both_n.map(|n| n as u64),
                both_pct: m.both_pct().and_then(lift),
                nonconv: m.nonconverged as u64,
            }
        })
        .collect()
}

/// Parses rows written by the core summary writer.
pub fn rows_from_csv<R: std::io::Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != ivsel_core::study::SUMMARY_HEADER {
        return Err(Error::invalid(format!("not a summary file: header `{header}`")));
    }
    let opt_f = |s: &str, what: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::invalid(format!("bad {what} value `{s}`")))
        }
    };
    let req_u = |s: &str, what: &str| -> Result<u64> {
        s.parse::<u64>()
            .map_err(|_| Error::invalid(format!("bad {what} value `{s}`")))
    };
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 15 {
            return Err(Error::invalid(format!("summary row has {} fields", row.len())));
        }
        rows.push(SummaryRow {
            method: row[0].to_string(),
            mean: opt_f(&row[1], "mean")?,
            sd: opt_f(&row[2], "sd")?,
            median: opt_f(&row[3], "median")?,
            min: opt_f(&row[4], "min")?,
            max: opt_f(&row[5], "max")?,
            bias: opt_f(&row[6], "bias")?,
            rmse: opt_f(&row[7], "rmse")?,
            true_n: req_u(&row[8], "true_n")?,
            true_pct: opt_f(&row[9], "true_pct")?,
            incl_n: req_u(&row[10], "incl_n")?,
            incl_pct: opt_f(&row[11], "incl_pct")?,
            both_n: if row[12].is_empty() { None } else { Some(req_u(&row[12], "both_n")?) },
            both_pct: opt_f(&row[13], "both_pct")?,
            nonconv: req_u(&row[14], "nonconv")?,
        });
    }
    Ok(rows)
}

/// Table-row labels used by the writeups.
fn display_method(name: &str) -> String {
    match name {
        "2sls" => "2SLS".to_string(),
        "2sri" => "2SRI".to_string(),
        "liml_laic" => "LIMLE: LAIC".to_string(),
        "liml_lbic" => "LIMLE: LBIC".to_string(),
        "liml_aic" => "LIMLE: AIC".to_string(),
        "2sri_full" => "2SRI: Full model".to_string(),
        "liml_full" => "LIMLE: Full model".to_string(),
        other => other.to_string(),
    }
}

fn f3(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".to_string())
}

fn f2(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".to_string())
}

fn count_pct(n: u64, pct: Option<f64>) -> String {
    match pct {
        Some(p) => format!("{n} ({p:.1})"),
        None => format!("{n}"),
    }
}

pub fn render_markdown(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(
        "| Method | Mean (SD) | Median (Min, Max) | Bias | RMSE | True model n (%) | Including true model n (%) | Both true model n (%) | Nonconverged |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let mean_sd = if r.mean.is_some() {
            format!("{} ({})", f3(r.mean), f3(r.sd))
        } else {
            "-".to_string()
        };
        let med_range = if r.median.is_some() {
            format!("{} ({}, {})", f3(r.median), f2(r.min), f2(r.max))
        } else {
            "-".to_string()
        };
        let both = match r.both_n {
            Some(n) => count_pct(n, r.both_pct),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            display_method(&r.method),
            mean_sd,
            med_range,
            f3(r.bias),
            f3(r.rmse),
            count_pct(r.true_n, r.true_pct),
            count_pct(r.incl_n, r.incl_pct),
            both,
            r.nonconv,
        ));
    }
    out
}

/// Records in first-appearance order give the method lineup for
/// re-summarizing a records file.
pub fn methods_in_order(records: &[ivsel_core::study::ReplicationRecord]) -> Vec<Method> {
    let mut methods: Vec<Method> = Vec::new();
    for r in records {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods
}

//! Monte Carlo study harness: runs the estimator arms over independent
//! replications of a scenario and reduces the per-replication records to the
//! summary statistics the simulation tables report.
//!
//! Replication r always draws from `RngStream(seed, r)`, so a study is
//! reproducible record for record regardless of the parallelism setting, and
//! any single replication can be re-generated in isolation.

use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dgp::{generate, ScenarioConfig};
use crate::effects::{plug_in_effect, true_effect_oracle};
use crate::estimators::{fit_2sls, fit_2sri, fit_liml, FitResult, XiMode};
use crate::model::{catalogs_for, CandidateCatalog, Dataset, ModelFormula, TreatmentKind};
use crate::selection::{
    fit_all_pairs, select_2sri, select_from_fits, Classification, CriterionKind, PairFits,
    SelectionResult,
};
use crate::stats::RngStream;
use crate::{Error, Result};

/// Draws spent on the effect-truth oracle. Monte Carlo error on the
/// probability scale is ~0.5/sqrt(m), far inside every reported tolerance.
const ORACLE_DRAWS: usize = 2_000_000;

/// One estimator arm of a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Predictor substitution on the minimal pair (instrument-only first
    /// stage, treatment-only probit second stage), no selection.
    TwoSls,
    /// 2SRI with per-stage AIC selection.
    TwoSri,
    /// LIML with joint selection under the wrapped criterion.
    LimlSelect(CriterionKind),
    /// 2SRI on the largest candidate pair, no selection.
    TwoSriFull,
    /// LIML on the largest candidate pair, no selection.
    LimlFull,
}

impl Method {
    pub fn name(self) -> String {
        match self {
            Method::TwoSls => "2sls".to_string(),
            Method::TwoSri => "2sri".to_string(),
            Method::LimlSelect(c) => format!("liml_{}", c.name()),
            Method::TwoSriFull => "2sri_full".to_string(),
            Method::LimlFull => "liml_full".to_string(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2sls" => Ok(Method::TwoSls),
            "2sri" => Ok(Method::TwoSri),
            "liml_laic" => Ok(Method::LimlSelect(CriterionKind::Laic)),
            "liml_lbic" => Ok(Method::LimlSelect(CriterionKind::Lbic)),
            "liml_aic" => Ok(Method::LimlSelect(CriterionKind::Aic)),
            "2sri_full" => Ok(Method::TwoSriFull),
            "liml_full" => Ok(Method::LimlFull),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

/// The method lineup of the simulation tables: 2SLS (continuous studies
/// only), 2SRI with AIC selection, one LIML arm per requested criterion, and
/// the two no-selection full-model arms.
pub fn default_methods(kind: TreatmentKind, criteria: &[CriterionKind]) -> Vec<Method> {
    let mut m = Vec::new();
    if kind == TreatmentKind::Continuous {
        m.push(Method::TwoSls);
    }
    m.push(Method::TwoSri);
    for &c in criteria {
        m.push(Method::LimlSelect(c));
    }
    m.push(Method::TwoSriFull);
    m.push(Method::LimlFull);
    m
}

/// One (replication, method) outcome. `estimate` is the W coefficient for
/// continuous studies and the ATE for dichotomous ones; `p_y1`/`ate` are
/// populated only for dichotomous studies. A failed fit leaves the estimate
/// fields empty but still produces a record.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub rep: u64,
    pub method: Method,
    pub chosen_t: String,
    pub chosen_o: String,
    pub converged: bool,
    pub estimate: Option<f64>,
    pub p_y1: Option<f64>,
    pub ate: Option<f64>,
    pub classification: Option<Classification>,
}

/// The target the estimates are judged against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudyTruth {
    /// Continuous study: the structural W coefficient.
    WCoefficient(f64),
    /// Dichotomous study: oracle values of the two reported functionals.
    Effects { p_y1: f64, ate: f64 },
}

impl StudyTruth {
    /// Truth for the `estimate` column.
    pub fn primary(self) -> f64 {
        match self {
            StudyTruth::WCoefficient(v) => v,
            StudyTruth::Effects { ate, .. } => ate,
        }
    }
}

/// Which record field a summary aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimand {
    /// The `estimate` column (W coefficient or ATE).
    Primary,
    /// The `p_y1` column of a dichotomous study.
    PY1,
}

/// Location/spread/error statistics over one set of estimates.
#[derive(Debug, Clone, Copy)]
pub struct StatBlock {
    /// Finite estimates the block is computed from.
    pub n_used: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub bias: f64,
    pub rmse: f64,
}

impl StatBlock {
    fn from_values(values: &[f64], truth: f64) -> StatBlock {
        let n = values.len();
        if n == 0 {
            return StatBlock {
                n_used: 0,
                mean: f64::NAN,
                sd: f64::NAN,
                median: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
                bias: f64::NAN,
                rmse: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        // single replication: spread is reported as exactly zero
        let sd = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite estimates"));
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let rmse = (values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / nf).sqrt();
        StatBlock {
            n_used: n,
            mean,
            sd,
            median,
            min: sorted[0],
            max: sorted[n - 1],
            bias: mean - truth,
            rmse,
        }
    }
}

/// Per-method reduction of a study. `all` keeps every finite estimate,
/// nonconverged fits included, matching how the tables retain blowups;
/// `converged_only` is the sanitized companion. `both_n` is populated for
/// the selecting 2SRI arm only: the count of replications where both stages
/// chose the true model or a larger one (pair not misspecified).
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: Method,
    pub n_records: usize,
    pub all: StatBlock,
    pub converged_only: StatBlock,
    pub true_n: usize,
    pub incl_n: usize,
    pub both_n: Option<usize>,
    pub nonconverged: usize,
}

impl MethodSummary {
    fn pct(&self, n: usize) -> f64 {
        if self.n_records == 0 {
            f64::NAN
        } else {
            100.0 * n as f64 / self.n_records as f64
        }
    }

    pub fn true_pct(&self) -> f64 {
        self.pct(self.true_n)
    }

    pub fn incl_pct(&self) -> f64 {
        self.pct(self.incl_n)
    }

    pub fn both_pct(&self) -> Option<f64> {
        self.both_n.map(|n| self.pct(n))
    }
}

/// Reduction of a full study for one estimand.
#[derive(Debug, Clone)]
pub struct StudySummary {
    pub estimand: Estimand,
    pub truth: f64,
    pub reps: u64,
    pub methods: Vec<MethodSummary>,
}

/// Everything a study produces: the raw records, the truth they are judged
/// against, and the summaries (`summary_p_y1` only for dichotomous studies).
#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub records: Vec<ReplicationRecord>,
    pub truth: StudyTruth,
    pub summary: StudySummary,
    pub summary_p_y1: Option<StudySummary>,
}

/// The largest candidate pair, by term count then label.
fn full_pair(cat_t: &CandidateCatalog, cat_o: &CandidateCatalog) -> (ModelFormula, ModelFormula) {
    let pick = |cat: &CandidateCatalog| {
        cat.candidates()
            .iter()
            .max_by_key(|f| (f.n_terms(), f.label().to_string()))
            .expect("catalogs are nonempty")
            .clone()
    };
    (pick(cat_t), pick(cat_o))
}

/// The minimal candidate pair, the classic instrument-and-treatment-only
/// 2SLS specification.
fn minimal_pair(cat_t: &CandidateCatalog, cat_o: &CandidateCatalog) -> (ModelFormula, ModelFormula) {
    let pick = |cat: &CandidateCatalog| {
        cat.candidates()
            .iter()
            .min_by_key(|f| (f.n_terms(), f.label().to_string()))
            .expect("catalogs are nonempty")
            .clone()
    };
    (pick(cat_t), pick(cat_o))
}

struct StudyContext {
    scenario: ScenarioConfig,
    methods: Vec<Method>,
    cat_t: CandidateCatalog,
    cat_o: CandidateCatalog,
    full_t: ModelFormula,
    full_o: ModelFormula,
    min_t: ModelFormula,
    min_o: ModelFormula,
    needs_pair_fits: bool,
}

impl StudyContext {
    /// Record skeleton for a fit that never produced usable output.
    fn failed(&self, rep: u64, method: Method, labels: Option<(&str, &str)>) -> ReplicationRecord {
        let (t, o) = labels.unwrap_or(("", ""));
        let classification = if labels.is_some() {
            crate::selection::classify((t, o), &self.cat_t, &self.cat_o).ok()
        } else {
            None
        };
        ReplicationRecord {
            rep,
            method,
            chosen_t: t.to_string(),
            chosen_o: o.to_string(),
            converged: false,
            estimate: None,
            p_y1: None,
            ate: None,
            classification,
        }
    }

    /// Record from a completed fit; estimate fields depend on the study kind.
    fn record_from_fit(&self, rep: u64, method: Method, fit: &FitResult, data: &Dataset) -> ReplicationRecord {
        let (t, o) = fit.formula_pair();
        let classification = crate::selection::classify((t, o), &self.cat_t, &self.cat_o).ok();
        let (estimate, p_y1, ate) = match self.scenario.treatment_kind {
            TreatmentKind::Continuous => (fit.w_coefficient(), None, None),
            TreatmentKind::Dichotomous => match plug_in_effect(fit, data) {
                Ok(e) => (Some(e.ate), Some(e.p_y1), Some(e.ate)),
                Err(_) => (None, None, None),
            },
        };
        ReplicationRecord {
            rep,
            method,
            chosen_t: t.to_string(),
            chosen_o: o.to_string(),
            converged: fit.converged,
            estimate,
            p_y1,
            ate,
            classification,
        }
    }

    fn record_from_selection(&self, rep: u64, method: Method, sel: &SelectionResult, data: &Dataset) -> ReplicationRecord {
        let mut rec = self.record_from_fit(rep, method, &sel.fit, data);
        rec.classification = Some(sel.classification);
        rec
    }

    fn run_method(
        &self,
        rep: u64,
        method: Method,
        data: &Dataset,
        pair_fits: Option<&PairFits>,
    ) -> ReplicationRecord {
        match method {
            Method::TwoSls => match fit_2sls(data, &self.min_t, &self.min_o) {
                Ok(fit) => self.record_from_fit(rep, method, &fit, data),
                Err(_) => self.failed(rep, method, Some((self.min_t.label(), self.min_o.label()))),
            },
            Method::TwoSri => match select_2sri(data, &self.cat_t, &self.cat_o) {
                Ok(sel) => self.record_from_selection(rep, method, &sel, data),
                Err(_) => self.failed(rep, method, None),
            },
            Method::LimlSelect(criterion) => {
                let sel = pair_fits
                    .ok_or(())
                    .and_then(|pf| select_from_fits(pf, &self.cat_t, &self.cat_o, criterion).map_err(|_| ()));
                match sel {
                    Ok(sel) => self.record_from_selection(rep, method, &sel, data),
                    Err(()) => self.failed(rep, method, None),
                }
            }
            Method::TwoSriFull => match fit_2sri(data, &self.full_t, &self.full_o) {
                Ok(fit) => self.record_from_fit(rep, method, &fit, data),
                Err(_) => self.failed(rep, method, Some((self.full_t.label(), self.full_o.label()))),
            },
            Method::LimlFull => {
                // the joint-selection table already contains this fit
                let cached = pair_fits.and_then(|pf| {
                    pf.fits
                        .iter()
                        .find(|f| f.formula_pair() == (self.full_t.label(), self.full_o.label()))
                });
                match cached {
                    Some(fit) => self.record_from_fit(rep, method, fit, data),
                    None => match fit_liml(data, &self.full_t, &self.full_o, XiMode::Estimated) {
                        Ok(fit) => self.record_from_fit(rep, method, &fit, data),
                        Err(_) => self
                            .failed(rep, method, Some((self.full_t.label(), self.full_o.label()))),
                    },
                }
            }
        }
    }

    fn run_replication(&self, rep: u64) -> Vec<ReplicationRecord> {
        let mut rng = RngStream::new(self.scenario.seed, rep);
        let data = match generate(&self.scenario, &mut rng) {
            Ok(d) => d,
            // a failed draw fails every arm of this replication, nothing more
            Err(_) => {
                return self
                    .methods
                    .iter()
                    .map(|&m| self.failed(rep, m, None))
                    .collect()
            }
        };
        let pair_fits = if self.needs_pair_fits {
            fit_all_pairs(&data, &self.cat_t, &self.cat_o, XiMode::Estimated).ok()
        } else {
            None
        };
        self.methods
            .iter()
            .map(|&m| self.run_method(rep, m, &data, pair_fits.as_ref()))
            .collect()
    }
}

/// Runs `reps` independent replications of `scenario`, each fitting every
/// method arm on the same dataset, and reduces the records to summaries.
/// Replication r draws from `RngStream(scenario.seed, r)`; `parallelism` is
/// a worker count (0 = library default, 1 = in-thread) that never changes
/// the output. Per-replication fit failures are recorded, never fatal.
pub fn run_study(
    scenario: &ScenarioConfig,
    methods: &[Method],
    reps: u64,
    parallelism: usize,
) -> Result<StudyOutput> {
    if reps == 0 {
        return Err(Error::invalid("a study needs at least one replication"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("a study needs at least one method"));
    }
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(Error::invalid(format!("duplicate method `{m}`")));
        }
    }
    if scenario.treatment_kind == TreatmentKind::Dichotomous && methods.contains(&Method::TwoSls) {
        return Err(Error::invalid(
            "2sls applies to continuous-treatment studies only",
        ));
    }

    let truth = match scenario.treatment_kind {
        TreatmentKind::Continuous => StudyTruth::WCoefficient(scenario.true_w_coefficient()),
        TreatmentKind::Dichotomous => {
            let e = true_effect_oracle(scenario, ORACLE_DRAWS)?;
            StudyTruth::Effects {
                p_y1: e.p_y1,
                ate: e.ate,
            }
        }
    };

    let (cat_t, cat_o) = catalogs_for(scenario.treatment_kind);
    let (full_t, full_o) = full_pair(&cat_t, &cat_o);
    let (min_t, min_o) = minimal_pair(&cat_t, &cat_o);
    let needs_pair_fits = methods
        .iter()
        .any(|m| matches!(m, Method::LimlSelect(_)));
    let ctx = StudyContext {
        scenario: scenario.clone(),
        methods: methods.to_vec(),
        cat_t,
        cat_o,
        full_t,
        full_o,
        min_t,
        min_o,
        needs_pair_fits,
    };

    // indexed collect keeps records in replication order whatever the
    // worker count, so the record stream is bit-reproducible
    let nested: Vec<Vec<ReplicationRecord>> = if parallelism == 1 {
        (0..reps).map(|r| ctx.run_replication(r)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..reps).into_par_iter().map(|r| ctx.run_replication(r)).collect())
    };
    let records: Vec<ReplicationRecord> = nested.into_iter().flatten().collect();

    let summary = summarize(&records, &ctx.methods, truth.primary(), Estimand::Primary, reps);
    let summary_p_y1 = match truth {
        StudyTruth::Effects { p_y1, .. } => {
            Some(summarize(&records, &ctx.methods, p_y1, Estimand::PY1, reps))
        }
        StudyTruth::WCoefficient(_) => None,
    };

    Ok(StudyOutput {
        records,
        truth,
        summary,
        summary_p_y1,
    })
}

/// Reduces records to per-method summaries against `truth`. The `all` block
/// uses every finite estimate including nonconverged fits; the parallel
/// `converged_only` block drops nonconverged ones. Methods are reported in
/// the order given.
pub fn summarize(
    records: &[ReplicationRecord],
    methods: &[Method],
    truth: f64,
    estimand: Estimand,
    reps: u64,
) -> StudySummary {
    let value = |r: &ReplicationRecord| match estimand {
        Estimand::Primary => r.estimate,
        Estimand::PY1 => r.p_y1,
    };
    let methods = methods
        .iter()
        .map(|&method| {
            let recs: Vec<&ReplicationRecord> =
                records.iter().filter(|r| r.method == method).collect();
            let finite = |conv_only: bool| -> Vec<f64> {
                recs.iter()
                    .filter(|r| !conv_only || r.converged)
                    .filter_map(|r| value(r))
                    .filter(|v| v.is_finite())
                    .collect()
            };
            let all_vals = finite(false);
            let conv_vals = finite(true);
            let true_n = recs
                .iter()
                .filter(|r| r.classification == Some(Classification::TrueModel))
                .count();
            let incl_n = recs
                .iter()
                .filter(|r| {
                    matches!(
                        r.classification,
                        Some(Classification::TrueModel) | Some(Classification::IncludingTrue)
                    )
                })
                .count();
            let both_n = (method == Method::TwoSri).then_some(incl_n);
            let nonconverged = recs.iter().filter(|r| !r.converged).count();
            MethodSummary {
                method,
                n_records: recs.len(),
                all: StatBlock::from_values(&all_vals, truth),
                converged_only: StatBlock::from_values(&conv_vals, truth),
                true_n,
                incl_n,
                both_n,
                nonconverged,
            }
        })
        .collect();
    StudySummary {
        estimand,
        truth,
        reps,
        methods,
    }
}

pub const RECORDS_HEADER: &str = "rep,method,chosen_t,chosen_o,converged,estimate,p_y1,ate,classification";
pub const SUMMARY_HEADER: &str =
    "method,mean,sd,median,min,max,bias,rmse,true_n,true_pct,incl_n,incl_pct,both_n,both_pct,nonconv";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        Some(x) => format!("{x}"), // inf/nan spelled out rather than hidden
        None => String::new(),
    }
}

fn fmt_stat(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes records in the pinned CSV schema. Field order and float formatting
/// are fixed, so equal record sets serialize byte-identically.
pub fn write_records_csv<W: io::Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER.split(','))?;
    for r in records {
        w.write_record([
            r.rep.to_string(),
            r.method.name(),
            r.chosen_t.clone(),
            r.chosen_o.clone(),
            r.converged.to_string(),
            fmt_opt(r.estimate),
            fmt_opt(r.p_y1),
            fmt_opt(r.ate),
            r.classification.map(|c| c.name().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

/// Reads records written by [`write_records_csv`].
pub fn read_records_csv<R: io::Read>(input: R) -> Result<Vec<ReplicationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    {
        let got = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
        if got != RECORDS_HEADER {
            return Err(Error::invalid(format!(
                "not a records file: header `{got}`"
            )));
        }
    }
    let parse_opt = |s: &str, what: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::invalid(format!("bad {what} value `{s}`")))
        }
    };
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 9 {
            return Err(Error::invalid(format!("records row has {} fields", row.len())));
        }
        let classification = match &row[8] {
            "" => None,
            "true_model" => Some(Classification::TrueModel),
            "including_true" => Some(Classification::IncludingTrue),
            "misspecified" => Some(Classification::Misspecified),
            other => return Err(Error::invalid(format!("bad classification `{other}`"))),
        };
        records.push(ReplicationRecord {
            rep: row[0]
                .parse()
                .map_err(|_| Error::invalid(format!("bad rep `{}`", &row[0])))?,
            method: row[1].parse()?,
            chosen_t: row[2].to_string(),
            chosen_o: row[3].to_string(),
            converged: match &row[4] {
                "true" => true,
                "false" => false,
                other => return Err(Error::invalid(format!("bad converged flag `{other}`"))),
            },
            estimate: parse_opt(&row[5], "estimate")?,
            p_y1: parse_opt(&row[6], "p_y1")?,
            ate: parse_opt(&row[7], "ate")?,
            classification,
        });
    }
    Ok(records)
}

/// Writes one summary block per method in the pinned schema. Pass
/// `converged_only` to emit the sanitized companion block instead of the
/// all-records one.
pub fn write_summary_csv<W: io::Write>(
    summary: &StudySummary,
    converged_only: bool,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER.split(','))?;
    for m in &summary.methods {
        let b = if converged_only { &m.converged_only } else { &m.all };
        w.write_record([
            m.method.name(),
            fmt_stat(b.mean),
            fmt_stat(b.sd),
            fmt_stat(b.median),
            fmt_stat(b.min),
            fmt_stat(b.max),
            fmt_stat(b.bias),
            fmt_stat(b.rmse),
            m.true_n.to_string(),
            fmt_stat(m.true_pct()),
            m.incl_n.to_string(),
            fmt_stat(m.incl_pct()),
            m.both_n.map(|n| n.to_string()).unwrap_or_default(),
            m.both_pct().map(fmt_stat).unwrap_or_default(),
            m.nonconverged.to_string(),
        ])?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::ScenarioId;
    use approx::assert_abs_diff_eq;

    fn tiny_scenario(kind: TreatmentKind, n: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig::normal(kind, ScenarioId::S1, n, seed).unwrap()
    }

    fn all_continuous() -> Vec<Method> {
        default_methods(
            TreatmentKind::Continuous,
            &[CriterionKind::Laic, CriterionKind::Lbic],
        )
    }

    #[test]
    fn single_replication_has_zero_sd_and_one_record_per_method() {
        let sc = tiny_scenario(TreatmentKind::Continuous, 150, 11);
        let methods = all_continuous();
        let out = run_study(&sc, &methods, 1, 1).unwrap();
        assert_eq!(out.records.len(), methods.len());
        assert_eq!(out.truth, StudyTruth::WCoefficient(0.6));
        for m in &out.summary.methods {
            assert_eq!(m.n_records, 1);
            if m.all.n_used == 1 {
                assert_eq!(m.all.sd, 0.0);
                assert_eq!(m.all.mean, m.all.median);
                assert_eq!(m.all.min, m.all.max);
            }
        }
    }

    #[test]
    fn parallelism_does_not_change_any_output_byte() {
        let sc = tiny_scenario(TreatmentKind::Continuous, 120, 12);
        let methods = vec![
            Method::TwoSls,
            Method::TwoSri,
            Method::LimlSelect(CriterionKind::Lbic),
            Method::LimlFull,
        ];
        let a = run_study(&sc, &methods, 4, 1).unwrap();
        let b = run_study(&sc, &methods, 4, 3).unwrap();
        let dump = |o: &StudyOutput| {
            let mut rec = Vec::new();
            write_records_csv(&o.records, &mut rec).unwrap();
            let mut sum = Vec::new();
            write_summary_csv(&o.summary, false, &mut sum).unwrap();
            (rec, sum)
        };
        assert_eq!(dump(&a), dump(&b));
    }

    #[test]
    fn summarize_matches_hand_computation() {
        let rec = |rep: u64, est: f64| ReplicationRecord {
            rep,
            method: Method::LimlSelect(CriterionKind::Lbic),
            chosen_t: "a4".into(),
            chosen_o: "b2".into(),
            converged: true,
            estimate: Some(est),
            p_y1: None,
            ate: None,
            classification: Some(Classification::TrueModel),
        };
        let records = vec![rec(0, 0.5), rec(1, 0.7)];
        let s = summarize(
            &records,
            &[Method::LimlSelect(CriterionKind::Lbic)],
            0.6,
            Estimand::Primary,
            2,
        );
        let m = &s.methods[0];
        assert_abs_diff_eq!(m.all.mean, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(m.all.bias, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.all.rmse, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(m.all.sd, (0.02_f64 / 1.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(m.all.median, 0.6, epsilon = 1e-12);
        assert_eq!((m.all.min, m.all.max), (0.5, 0.7));
        assert_eq!((m.true_n, m.incl_n, m.both_n), (2, 2, None));
        assert_eq!(m.nonconverged, 0);
        assert_eq!(m.true_pct(), 100.0);
    }

    #[test]
    fn nonconverged_records_stay_in_all_block_and_leave_converged_block() {
        let rec = |rep: u64, est: f64, conv: bool| ReplicationRecord {
            rep,
            method: Method::TwoSri,
            chosen_t: "a4".into(),
            chosen_o: "b2".into(),
            converged: conv,
            estimate: Some(est),
            p_y1: None,
            ate: None,
            classification: Some(Classification::TrueModel),
        };
        let records = vec![rec(0, 1.0, true), rec(1, 100.0, false)];
        let s = summarize(&records, &[Method::TwoSri], 1.0, Estimand::Primary, 2);
        let m = &s.methods[0];
        assert_eq!(m.all.n_used, 2);
        assert_abs_diff_eq!(m.all.mean, 50.5, epsilon = 1e-12);
        assert_eq!(m.converged_only.n_used, 1);
        assert_abs_diff_eq!(m.converged_only.mean, 1.0, epsilon = 1e-12);
        assert_eq!(m.nonconverged, 1);
        // the selecting 2SRI arm reports the pair-level not-misspecified count
        assert_eq!(m.both_n, Some(2));
    }

    #[test]
    fn records_csv_round_trips() {
        let sc = tiny_scenario(TreatmentKind::Continuous, 120, 13);
        let methods = vec![Method::TwoSls, Method::TwoSri];
        let out = run_study(&sc, &methods, 3, 1).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&out.records, &mut buf).unwrap();
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(back, out.records);
    }

    #[test]
    fn small_continuous_study_is_well_formed() {
        let sc = tiny_scenario(TreatmentKind::Continuous, 200, 14);
        let methods = all_continuous();
        let out = run_study(&sc, &methods, 6, 1).unwrap();
        assert_eq!(out.records.len(), 6 * methods.len());
        assert!(out.summary_p_y1.is_none());
        for m in &out.summary.methods {
            assert!(m.incl_n >= m.true_n);
            assert!(m.nonconverged <= m.n_records);
            assert_eq!(m.n_records, 6);
        }
        // fixed-pair arms always carry their labels
        for r in out.records.iter().filter(|r| r.method == Method::LimlFull) {
            assert_eq!((r.chosen_t.as_str(), r.chosen_o.as_str()), ("a7", "b5"));
            assert_eq!(r.classification, Some(Classification::IncludingTrue));
        }
        for r in out.records.iter().filter(|r| r.method == Method::TwoSls) {
            assert_eq!((r.chosen_t.as_str(), r.chosen_o.as_str()), ("a1", "b1"));
            assert_eq!(r.classification, Some(Classification::Misspecified));
        }
    }

    #[test]
    fn dichotomous_study_populates_both_estimands() {
        let sc = tiny_scenario(TreatmentKind::Dichotomous, 150, 15);
        let methods = default_methods(TreatmentKind::Dichotomous, &[CriterionKind::Lbic]);
        assert!(!methods.contains(&Method::TwoSls));
        let out = run_study(&sc, &methods, 2, 1).unwrap();
        let truth = match out.truth {
            StudyTruth::Effects { p_y1, ate } => (p_y1, ate),
            _ => panic!("dichotomous study must carry effect truth"),
        };
        // closed-form oracle for scenario (1) under normal margins
        assert_abs_diff_eq!(truth.0, 0.9119, epsilon = 0.002);
        assert_abs_diff_eq!(truth.1, 0.3945, epsilon = 0.003);
        let py1 = out.summary_p_y1.as_ref().unwrap();
        assert_eq!(py1.estimand, Estimand::PY1);
        assert_abs_diff_eq!(py1.truth, truth.0, epsilon = 1e-12);
        for restimate in out.records.iter().filter(|r| r.converged) {
            assert!(r_estimate_ok(restimate));
        }
        // 2sls is rejected outright for this kind
        let err = run_study(&sc, &[Method::TwoSls], 1, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    fn r_estimate_ok(r: &ReplicationRecord) -> bool {
        match (r.estimate, r.p_y1, r.ate) {
            (Some(e), Some(p), Some(a)) => e == a && (0.0..=1.0).contains(&p),
            _ => false,
        }
    }
}

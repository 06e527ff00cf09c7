//! Model selection: likelihood-based criteria, exhaustive joint search for
//! the ML fits, sequential AIC search for 2SRI, and classification of the
//! chosen pair against the catalogs' true models.

use serde::{Deserialize, Serialize};

use crate::estimators::{fit_2sri, fit_liml, fit_probit, FitMethod, FitResult, XiMode};
use crate::estimators::{design_matrix, fit_ls};
use crate::model::{CandidateCatalog, Dataset, Side, TreatmentKind};
use crate::{Error, Result};

/// Which penalized criterion to evaluate. `Aic` is the ordinary AIC used
/// stage-wise by 2SRI; `Laic` and `Lbic` penalize the joint likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    Laic,
    Lbic,
    Aic,
}

impl CriterionKind {
    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::Laic => "laic",
            CriterionKind::Lbic => "lbic",
            CriterionKind::Aic => "aic",
        }
    }

    /// -2 loglik + penalty. AIC and LAIC share the 2p penalty; LBIC uses
    /// p ln n.
    pub fn value(self, loglik: f64, n_params: usize, n_obs: usize) -> f64 {
        let p = n_params as f64;
        match self {
            CriterionKind::Laic | CriterionKind::Aic => -2.0 * loglik + 2.0 * p,
            CriterionKind::Lbic => -2.0 * loglik + p * (n_obs as f64).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionValue {
    pub criterion: CriterionKind,
    pub value: f64,
    pub n_params: usize,
    pub n_obs: usize,
}

/// Evaluates a criterion on a fit. The fit must carry a finite likelihood.
pub fn criterion(fit: &FitResult, kind: CriterionKind, n_obs: usize) -> Result<CriterionValue> {
    let ll = fit
        .loglik
        .ok_or_else(|| Error::invalid("criterion needs a fit with a log likelihood"))?;
    if !ll.is_finite() {
        return Err(Error::invalid("criterion needs a finite log likelihood"));
    }
    Ok(CriterionValue {
        criterion: kind,
        value: kind.value(ll, fit.n_params, n_obs),
        n_params: fit.n_params,
        n_obs,
    })
}

/// How a chosen pair relates to the catalogs' true models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    TrueModel,
    IncludingTrue,
    Misspecified,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::TrueModel => "true_model",
            Classification::IncludingTrue => "including_true",
            Classification::Misspecified => "misspecified",
        }
    }
}

/// Classifies a chosen (treatment, outcome) label pair: exactly the true
/// labels, a pair in which each side's true formula nests, or misspecified.
pub fn classify(
    chosen: (&str, &str),
    cat_t: &CandidateCatalog,
    cat_o: &CandidateCatalog,
) -> Result<Classification> {
    let f_t = cat_t
        .get(chosen.0)
        .ok_or_else(|| Error::invalid(format!("unknown treatment label {}", chosen.0)))?;
    let f_o = cat_o
        .get(chosen.1)
        .ok_or_else(|| Error::invalid(format!("unknown outcome label {}", chosen.1)))?;
    if chosen.0 == cat_t.true_label() && chosen.1 == cat_o.true_label() {
        return Ok(Classification::TrueModel);
    }
    if cat_t.true_formula().nests_in(f_t) && cat_o.true_formula().nests_in(f_o) {
        return Ok(Classification::IncludingTrue);
    }
    Ok(Classification::Misspecified)
}

/// One row of the selection table. For the joint search each row is a
/// candidate pair; for 2SRI the stage-1 rows carry an empty outcome label and
/// the stage-2 rows are paired with the stage-1 winner.
#[derive(Debug, Clone)]
pub struct PairRow {
    pub label_t: String,
    pub label_o: String,
    pub loglik: Option<f64>,
    pub value: Option<f64>,
    pub n_params: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub method: FitMethod,
    pub criterion: CriterionKind,
    pub chosen_t: String,
    pub chosen_o: String,
    /// The refitted chosen pair.
    pub fit: FitResult,
    pub table: Vec<PairRow>,
    pub classification: Classification,
    pub n_nonconverged: usize,
}

/// Candidate-pair fits, reusable across criteria: LAIC and LBIC selection on
/// the same data share one round of optimization.
pub struct PairFits {
    pub fits: Vec<FitResult>,
    pub n_nonconverged: usize,
}

/// Fits every (treatment, outcome) pair in catalog order.
pub fn fit_all_pairs(
    data: &Dataset,
    cat_t: &CandidateCatalog,
    cat_o: &CandidateCatalog,
    xi_mode: XiMode,
) -> Result<PairFits> {
    if cat_t.side() != Side::Treatment || cat_o.side() != Side::Outcome {
        return Err(Error::invalid("catalog pair must be (treatment, outcome)"));
    }
    let mut fits = Vec::with_capacity(cat_t.candidates().len() * cat_o.candidates().len());
    let mut n_nonconverged = 0;
    for f_t in cat_t.candidates() {
        for f_o in cat_o.candidates() {
            let fit = fit_liml(data, f_t, f_o, xi_mode)?;
            if !fit.converged {
                n_nonconverged += 1;
            }
            fits.push(fit);
        }
    }
    Ok(PairFits {
        fits,
        n_nonconverged,
    })
}

/// True when `(value, params, labels)` beats the incumbent: smaller
/// criterion, then fewer parameters, then lexicographic label order.
fn beats(cand: (f64, usize, &str, &str), best: (f64, usize, &str, &str)) -> bool {
    if cand.0 != best.0 {
        return cand.0 < best.0;
    }
    if cand.1 != best.1 {
        return cand.1 < best.1;
    }
    (cand.2, cand.3) < (best.2, best.3)
}

/// Selects the criterion minimizer from a precomputed fit table. Nonconverged
/// fits are listed but never win; all-nonconverged is an error.
pub fn select_from_fits(
    pair_fits: &PairFits,
    cat_t: &CandidateCatalog,
    cat_o: &CandidateCatalog,
    kind: CriterionKind,
) -> Result<SelectionResult> {
    if pair_fits.fits.is_empty() {
        return Err(Error::invalid("empty fit table"));
    }
    let mut best: Option<(f64, usize, String, String, usize)> = None;
    let mut table = Vec::with_capacity(pair_fits.fits.len());
    for (idx, fit) in pair_fits.fits.iter().enumerate() {
        let labels = fit.formula_pair();
        let usable = fit.converged && fit.loglik.map(f64::is_finite).unwrap_or(false);
        let value = if usable {
            Some(kind.value(fit.loglik.unwrap(), fit.n_params, fit.n_obs))
        } else {
            None
        };
        table.push(PairRow {
            label_t: labels.0.to_string(),
            label_o: labels.1.to_string(),
            loglik: if usable { fit.loglik } else { None },
            value,
            n_params: fit.n_params,
            converged: fit.converged,
        });
        if let Some(v) = value {
            let cand = (v, fit.n_params, labels.0, labels.1);
            let replace = match &best {
                None => true,
                Some((bv, bp, bt, bo, _)) => beats(cand, (*bv, *bp, bt, bo)),
            };
            if replace {
                best = Some((v, fit.n_params, labels.0.to_string(), labels.1.to_string(), idx));
            }
        }
    }
    let (_, _, chosen_t, chosen_o, idx) = best.ok_or_else(|| {
        Error::degenerate("no candidate pair converged; nothing to select from")
    })?;
    let classification = classify((&chosen_t, &chosen_o), cat_t, cat_o)?;
    Ok(SelectionResult {
        method: FitMethod::Liml,
        criterion: kind,
        chosen_t,
        chosen_o,
        fit: pair_fits.fits[idx].clone(),
        table,
        classification,
        n_nonconverged: pair_fits.n_nonconverged,
    })
}

/// Joint search: fits every candidate pair by ML and picks the criterion
/// minimizer. For dichotomous studies the treatment catalog is a singleton,
/// so the enumeration reduces to the outcome side.
pub fn select_liml(
    data: &Dataset,
    cat_t: &CandidateCatalog,
    cat_o: &CandidateCatalog,
    kind: CriterionKind,
    xi_mode: XiMode,
) -> Result<SelectionResult> {
    let fits = fit_all_pairs(data, cat_t, cat_o, xi_mode)?;
    select_from_fits(&fits, cat_t, cat_o, kind)
}

/// Sequential AIC search for 2SRI: stage 1 picks the treatment model by its
/// own AIC (Gaussian profile likelihood for continuous W, probit for
/// dichotomous), stage 2 holds the stage-1 residuals fixed and picks the
/// outcome probit by AIC with the residual coefficient counted.
pub fn select_2sri(
    data: &Dataset,
    cat_t: &CandidateCatalog,
    cat_o: &CandidateCatalog,
) -> Result<SelectionResult> {
    if cat_t.side() != Side::Treatment || cat_o.side() != Side::Outcome {
        return Err(Error::invalid("catalog pair must be (treatment, outcome)"));
    }
    let n = data.n();
    let mut table = Vec::new();
    let mut n_nonconverged = 0;

    let mut best_t: Option<(f64, usize, String)> = None;
    for f_t in cat_t.candidates() {
        let xt = design_matrix(data, f_t);
        // (loglik, params counted by the stage-1 AIC)
        let fitted: Option<(f64, usize)> = match data.treatment_kind {
            TreatmentKind::Continuous => fit_ls(&xt, &data.w)
                .ok()
                .map(|ls| (ls.loglik, f_t.n_terms() + 1)),
            TreatmentKind::Dichotomous => fit_probit(&xt, &data.w)
                .ok()
                .filter(|p| p.converged)
                .map(|p| (p.loglik, f_t.n_terms())),
        };
        match fitted {
            Some((ll, p)) if ll.is_finite() => {
                let v = CriterionKind::Aic.value(ll, p, n);
                table.push(PairRow {
                    label_t: f_t.label().to_string(),
                    label_o: String::new(),
                    loglik: Some(ll),
                    value: Some(v),
                    n_params: p,
                    converged: true,
                });
                let cand = (v, p, f_t.label());
                let replace = match &best_t {
                    None => true,
                    Some((bv, bp, bl)) => beats((cand.0, cand.1, cand.2, ""), (*bv, *bp, bl, "")),
                };
                if replace {
                    best_t = Some((v, p, f_t.label().to_string()));
                }
            }
            _ => {
                n_nonconverged += 1;
                table.push(PairRow {
                    label_t: f_t.label().to_string(),
                    label_o: String::new(),
                    loglik: None,
                    value: None,
                    n_params: f_t.n_terms(),
                    converged: false,
                });
            }
        }
    }
    let (_, _, chosen_t) = best_t
        .ok_or_else(|| Error::degenerate("no treatment candidate fit; nothing to select from"))?;
    let chosen_t_formula = cat_t.get(&chosen_t).expect("winner came from the catalog");

    let mut best_o: Option<(f64, usize, String)> = None;
    for f_o in cat_o.candidates() {
        match fit_2sri(data, chosen_t_formula, f_o) {
            Ok(fit) if fit.converged => {
                let parts = fit.two_sri.as_ref().unwrap();
                let v = CriterionKind::Aic.value(parts.stage2_loglik, parts.stage2_n_params, n);
                table.push(PairRow {
                    label_t: chosen_t.clone(),
                    label_o: f_o.label().to_string(),
                    loglik: Some(parts.stage2_loglik),
                    value: Some(v),
                    n_params: parts.stage2_n_params,
                    converged: true,
                });
                let cand = (v, parts.stage2_n_params, f_o.label());
                let replace = match &best_o {
                    None => true,
                    Some((bv, bp, bl)) => beats((cand.0, cand.1, "", cand.2), (*bv, *bp, "", bl)),
                };
                if replace {
                    best_o = Some((v, parts.stage2_n_params, f_o.label().to_string()));
                }
            }
            _ => {
                n_nonconverged += 1;
                table.push(PairRow {
                    label_t: chosen_t.clone(),
                    label_o: f_o.label().to_string(),
                    loglik: None,
                    value: None,
                    n_params: f_o.n_terms() + 1,
                    converged: false,
                });
            }
        }
    }
    let (_, _, chosen_o) = best_o
        .ok_or_else(|| Error::degenerate("no outcome candidate fit; nothing to select from"))?;

    let fit = fit_2sri(data, chosen_t_formula, cat_o.get(&chosen_o).unwrap())?;
    let classification = classify((&chosen_t, &chosen_o), cat_t, cat_o)?;
    Ok(SelectionResult {
        method: FitMethod::TwoSri,
        criterion: CriterionKind::Aic,
        chosen_t,
        chosen_o,
        fit,
        table,
        classification,
        n_nonconverged,
    })
}

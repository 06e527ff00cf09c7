//! Two-stage competitors: 2SLS and 2SRI.

use nalgebra::DMatrix;

use super::loglik::design_matrix;
use super::lstsq::fit_ls;
use super::probit::fit_probit;
use super::{FitMethod, FitResult, Theta, TwoSriParts};
use crate::model::{Dataset, ModelFormula, Side, TreatmentKind, VarVals};
use crate::stats::norm_cdf;
use crate::{Error, Result};

fn check_pair(f_t: &ModelFormula, f_o: &ModelFormula) -> Result<()> {
    if f_t.side() != Side::Treatment || f_o.side() != Side::Outcome {
        return Err(Error::invalid("formula pair must be (treatment, outcome)"));
    }
    Ok(())
}

/// Outcome design with the observed treatment replaced by `w_sub` in every
/// term that involves W (main effect and interactions alike).
fn design_with_w(data: &Dataset, f_o: &ModelFormula, w_sub: &[f64]) -> DMatrix<f64> {
    let n = data.n();
    let k = f_o.n_terms();
    let mut m = DMatrix::zeros(n, k);
    for i in 0..n {
        let vals = VarVals {
            w: w_sub[i],
            ..data.vals(i)
        };
        for (j, t) in f_o.terms().iter().enumerate() {
            m[(i, j)] = t.value(&vals);
        }
    }
    m
}

/// Two-stage predictor substitution: regress W on the treatment design by
/// least squares, then fit a probit of y on the outcome design with fitted
/// values standing in for W. The probit link keeps the substituted w
/// coefficient on the same scale as the likelihood estimators; a linear
/// second stage would put it on the probability scale instead, an order of
/// magnitude smaller and not comparable across methods. No joint likelihood
/// is attached: the stage-2 probit treats w-hat as data.
pub fn fit_2sls(data: &Dataset, f_t: &ModelFormula, f_o: &ModelFormula) -> Result<FitResult> {
    check_pair(f_t, f_o)?;
    let xt = design_matrix(data, f_t);
    let stage1 = fit_ls(&xt, &data.w)?;
    let w_hat: Vec<f64> = (&xt * &stage1.coef).iter().copied().collect();
    let xo = design_with_w(data, f_o, &w_hat);
    let stage2 = fit_probit(&xo, &data.y)?;

    Ok(FitResult {
        theta: Theta {
            alpha: stage1.coef.as_slice().to_vec(),
            beta: stage2.coef.as_slice().to_vec(),
            xi: None,
        },
        loglik: None,
        converged: stage2.converged,
        n_params: f_t.n_terms() + f_o.n_terms(),
        n_obs: data.n(),
        iterations: stage2.iterations,
        treatment_formula: f_t.clone(),
        outcome_formula: f_o.clone(),
        method: FitMethod::TwoSls,
        two_sri: None,
    })
}

/// Two-stage residual inclusion. Stage one fits the treatment (least squares
/// when W is continuous, probit when dichotomous) and keeps the raw residual
/// w - E[w | x]; stage two is a probit of y on the outcome design plus that
/// residual column. The residual coefficient is a free parameter and counts
/// toward the stage-2 criterion.
pub fn fit_2sri(data: &Dataset, f_t: &ModelFormula, f_o: &ModelFormula) -> Result<FitResult> {
    check_pair(f_t, f_o)?;
    let xt = design_matrix(data, f_t);

    let (alpha, residuals, stage1_loglik, stage1_n_params, stage1_sigma, stage1_converged) =
        match data.treatment_kind {
            TreatmentKind::Continuous => {
                let ls = fit_ls(&xt, &data.w)?;
                let res: Vec<f64> = ls.residuals.iter().copied().collect();
                // +1: the Gaussian stage counts its residual scale
                (
                    ls.coef.as_slice().to_vec(),
                    res,
                    ls.loglik,
                    f_t.n_terms() + 1,
                    Some(ls.sigma_mle),
                    true,
                )
            }
            TreatmentKind::Dichotomous => {
                let pr = fit_probit(&xt, &data.w)?;
                let eta = &xt * &pr.coef;
                let res: Vec<f64> = (0..data.n())
                    .map(|i| data.w[i] - norm_cdf(eta[i]))
                    .collect();
                (
                    pr.coef.as_slice().to_vec(),
                    res,
                    pr.loglik,
                    f_t.n_terms(),
                    None,
                    pr.converged,
                )
            }
        };

    let k_o = f_o.n_terms();
    let xo = design_matrix(data, f_o);
    let mut xo2 = DMatrix::zeros(data.n(), k_o + 1);
    xo2.view_mut((0, 0), (data.n(), k_o)).copy_from(&xo);
    for i in 0..data.n() {
        xo2[(i, k_o)] = residuals[i];
    }
    let stage2 = fit_probit(&xo2, &data.y)?;
    let beta = stage2.coef.as_slice()[..k_o].to_vec();
    let resid_coef = stage2.coef[k_o];

    Ok(FitResult {
        theta: Theta {
            alpha,
            beta,
            xi: None,
        },
        loglik: Some(stage2.loglik),
        converged: stage1_converged && stage2.converged,
        n_params: f_t.n_terms() + f_o.n_terms() + 1,
        n_obs: data.n(),
        iterations: stage2.iterations,
        treatment_formula: f_t.clone(),
        outcome_formula: f_o.clone(),
        method: FitMethod::TwoSri,
        two_sri: Some(TwoSriParts {
            resid_coef,
            residuals,
            stage1_loglik,
            stage1_n_params,
            stage1_sigma,
            stage2_loglik: stage2.loglik,
            stage2_n_params: k_o + 1,
        }),
    })
}

//! Limited-information ML for the joint treatment/outcome model.
//!
//! Both treatment kinds share one optimizer harness: parameters are packed
//! into a flat vector with the nuisance block reparameterized (ln sigma_v,
//! atanh rho) so the search space is unconstrained. The objective is the mean
//! negative log likelihood; scaling by n keeps the finite-difference gradient
//! noise well below the convergence tolerance regardless of sample size.

use nalgebra::DVector;

use super::loglik::{design_matrix, dich_loglik_mat, rv_loglik_mat, LOGLIK_PENALTY};
use super::twostage::fit_2sri;
use super::{liml_n_params, FitMethod, FitResult, Theta, Xi, XiMode};
use crate::model::{Dataset, ModelFormula, Side, TreatmentKind};
use crate::optim::{minimize, Options};
use crate::{Error, Result};

/// Maps between the optimizer's flat vector and the model parameters.
struct Packing {
    k_t: usize,
    k_o: usize,
    kind: TreatmentKind,
    estimated: bool,
    fixed_sigma: Option<f64>,
    fixed_rho: f64,
}

impl Packing {
    fn nuisance_dim(&self) -> usize {
        if !self.estimated {
            0
        } else if self.kind == TreatmentKind::Continuous {
            2
        } else {
            1
        }
    }

    fn pack(&self, alpha: &[f64], beta: &[f64], sigma_v: f64, rho: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.k_t + self.k_o + self.nuisance_dim());
        x.extend_from_slice(alpha);
        x.extend_from_slice(beta);
        if self.estimated {
            if self.kind == TreatmentKind::Continuous {
                x.push(sigma_v.max(1e-6).ln());
            }
            x.push(rho.clamp(-0.99, 0.99).atanh());
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> (DVector<f64>, DVector<f64>, f64, f64) {
        let alpha = DVector::from_column_slice(&x[..self.k_t]);
        let beta = DVector::from_column_slice(&x[self.k_t..self.k_t + self.k_o]);
        let (sigma, rho) = if self.estimated {
            match self.kind {
                TreatmentKind::Continuous => {
                    (x[x.len() - 2].exp(), x[x.len() - 1].tanh())
                }
                TreatmentKind::Dichotomous => (1.0, x[x.len() - 1].tanh()),
            }
        } else {
            (self.fixed_sigma.unwrap_or(1.0), self.fixed_rho)
        };
        (alpha, beta, sigma, rho)
    }
}

/// Starting point derived from a 2SRI fit. The stage-2 probit index equals
/// the structural index divided by sqrt(1 - rho^2) with the raw residual
/// carrying rho/(s sqrt(1 - rho^2)), so the residual coefficient c maps back
/// through rho0 = c s / sqrt(1 + c^2 s^2) and the slopes shrink by
/// sqrt(1 - rho0^2). Falls back to a neutral start when 2SRI fails.
fn warm_start(
    data: &Dataset,
    f_t: &ModelFormula,
    f_o: &ModelFormula,
) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let neutral = neutral_start(data, f_t, f_o);
    let fit = match fit_2sri(data, f_t, f_o) {
        Ok(f) if f.converged => f,
        _ => return neutral,
    };
    let parts = fit.two_sri.as_ref().unwrap();
    let c = parts.resid_coef;
    if !c.is_finite() {
        return neutral;
    }
    let sigma0 = parts.stage1_sigma.unwrap_or(1.0).max(1e-3);
    let cs = c * sigma0;
    let rho0 = (cs / (1.0 + cs * cs).sqrt()).clamp(-0.95, 0.95);
    let shrink = (1.0 - rho0 * rho0).sqrt();
    let beta0: Vec<f64> = fit.theta.beta.iter().map(|b| b * shrink).collect();
    (fit.theta.alpha.clone(), beta0, sigma0, rho0)
}

fn neutral_start(
    data: &Dataset,
    f_t: &ModelFormula,
    f_o: &ModelFormula,
) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let sigma = match data.treatment_kind {
        TreatmentKind::Continuous => {
            let n = data.n() as f64;
            let mean = data.w.iter().sum::<f64>() / n;
            let var = data.w.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
            var.sqrt().max(1e-3)
        }
        TreatmentKind::Dichotomous => 1.0,
    };
    (vec![0.0; f_t.n_terms()], vec![0.0; f_o.n_terms()], sigma, 0.0)
}

/// Fits the joint model by maximum likelihood. With `XiMode::Estimated` the
/// nuisance block (sigma_v, rho) or (rho) is free; with `XiMode::Fixed` it is
/// pinned and only the index coefficients move. Optimization restarts from a
/// neutral point when the warm start stalls; the better run wins.
pub fn fit_liml(
    data: &Dataset,
    f_t: &ModelFormula,
    f_o: &ModelFormula,
    xi_mode: XiMode,
) -> Result<FitResult> {
    if f_t.side() != Side::Treatment || f_o.side() != Side::Outcome {
        return Err(Error::invalid("formula pair must be (treatment, outcome)"));
    }
    let estimated = matches!(xi_mode, XiMode::Estimated);
    let (fixed_sigma, fixed_rho) = match xi_mode {
        XiMode::Estimated => (None, 0.0),
        XiMode::Fixed { sigma_v, rho } => {
            if !rho.is_finite() || rho.abs() >= 1.0 {
                return Err(Error::invalid("fixed rho must satisfy |rho| < 1"));
            }
            match (data.treatment_kind, sigma_v) {
                (TreatmentKind::Continuous, None) => {
                    return Err(Error::invalid(
                        "fixed xi for a continuous treatment requires sigma_v",
                    ))
                }
                (TreatmentKind::Continuous, Some(s)) if !(s.is_finite() && s > 0.0) => {
                    return Err(Error::invalid("fixed sigma_v must be positive"))
                }
                (TreatmentKind::Dichotomous, Some(_)) => {
                    return Err(Error::invalid(
                        "sigma_v is not a parameter of the dichotomous model",
                    ))
                }
                _ => {}
            }
            (sigma_v, rho)
        }
    };

    let packing = Packing {
        k_t: f_t.n_terms(),
        k_o: f_o.n_terms(),
        kind: data.treatment_kind,
        estimated,
        fixed_sigma,
        fixed_rho,
    };

    let xt = design_matrix(data, f_t);
    let xo = design_matrix(data, f_o);
    let n = data.n() as f64;
    let kind = data.treatment_kind;
    let objective = |x: &[f64]| -> f64 {
        let (alpha, beta, sigma, rho) = packing.unpack(x);
        let ll = match kind {
            TreatmentKind::Continuous => {
                rv_loglik_mat(&xt, &xo, &data.y, &data.w, &alpha, &beta, sigma, rho)
            }
            TreatmentKind::Dichotomous => {
                dich_loglik_mat(&xt, &xo, &data.y, &data.w, &alpha, &beta, rho)
            }
        };
        -ll / n
    };

    let opts = Options::default();
    let (wa, wb, ws, wr) = warm_start(data, f_t, f_o);
    let start1 = packing.pack(&wa, &wb, ws, if estimated { wr } else { fixed_rho });
    let mut best = minimize(objective, &start1, &opts);
    if !best.converged {
        let (na, nb, ns, nr) = neutral_start(data, f_t, f_o);
        let start2 = packing.pack(&na, &nb, ns, nr);
        if start2 != start1 {
            let retry = minimize(objective, &start2, &opts);
            if retry.converged || retry.f < best.f {
                best = retry;
            }
        }
    }

    let (alpha, beta, sigma, rho) = packing.unpack(&best.x);
    let loglik = -best.f * n;
    let converged = best.converged && loglik.is_finite() && loglik > 0.5 * LOGLIK_PENALTY;
    let xi = Some(Xi {
        sigma_v: match kind {
            TreatmentKind::Continuous => Some(sigma),
            TreatmentKind::Dichotomous => None,
        },
        rho,
        estimated,
    });

    Ok(FitResult {
        theta: Theta {
            alpha: alpha.as_slice().to_vec(),
            beta: beta.as_slice().to_vec(),
            xi,
        },
        loglik: Some(loglik),
        converged,
        n_params: liml_n_params(f_t, f_o, kind, estimated),
        n_obs: data.n(),
        iterations: best.iterations,
        treatment_formula: f_t.clone(),
        outcome_formula: f_o.clone(),
        method: FitMethod::Liml,
        two_sri: None,
    })
}

/// Likelihood ratio statistic -2(l_small - l_big) for two converged LIML fits
/// of nested formula pairs on the same data. Small negatives from optimizer
/// slack are floored at zero; anything materially negative is an error.
pub fn lr_statistic(small: &FitResult, big: &FitResult) -> Result<f64> {
    if small.method != FitMethod::Liml || big.method != FitMethod::Liml {
        return Err(Error::invalid("LR statistic is defined for LIML fits"));
    }
    if !small.converged || !big.converged {
        return Err(Error::invalid("LR statistic requires converged fits"));
    }
    if !small.treatment_formula.nests_in(&big.treatment_formula)
        || !small.outcome_formula.nests_in(&big.outcome_formula)
    {
        return Err(Error::invalid(
            "LR statistic requires the small pair to nest in the big pair",
        ));
    }
    let (ls, lb) = match (small.loglik, big.loglik) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid("LR statistic requires log likelihoods")),
    };
    let lambda = -2.0 * (ls - lb);
    if lambda < -1e-6 * (1.0 + lb.abs()) {
        return Err(Error::Other(format!(
            "negative LR statistic {lambda:.3e}: the big model fit worse than the nested one"
        )));
    }
    Ok(lambda.max(0.0))
}

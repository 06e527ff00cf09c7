//! Model fitting: joint maximum likelihood and the two-stage competitors.

mod liml;
mod loglik;
mod lstsq;
mod probit;
mod twostage;

pub use liml::{fit_liml, lr_statistic};
pub use loglik::{loglik_dichotomous, loglik_rivers_vuong, LOGLIK_PENALTY, PROB_FLOOR};
pub use twostage::{fit_2sls, fit_2sri};

pub(crate) use loglik::design_matrix;
pub(crate) use lstsq::fit_ls;
pub(crate) use probit::fit_probit;

use crate::model::{ModelFormula, TreatmentKind, Var};

/// Whether the error-dependence parameters are estimated alongside the
/// coefficients or held at supplied values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiMode {
    /// sigma_v applies to the continuous treatment only; the dichotomous
    /// first stage has unit scale by construction.
    Fixed { sigma_v: Option<f64>, rho: f64 },
    Estimated,
}

/// Error-dependence parameters attached to a joint-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Xi {
    pub sigma_v: Option<f64>,
    pub rho: f64,
    pub estimated: bool,
}

#[derive(Debug, Clone)]
pub struct Theta {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Present for joint-likelihood fits, absent for 2SLS/2SRI.
    pub xi: Option<Xi>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Liml,
    TwoSls,
    TwoSri,
}

/// Pieces of a 2SRI fit that later stages need: the fitted residual column
/// and its stage-2 coefficient, plus the stage-wise likelihoods that drive
/// stage-wise selection.
#[derive(Debug, Clone)]
pub struct TwoSriParts {
    pub resid_coef: f64,
    pub residuals: Vec<f64>,
    pub stage1_loglik: f64,
    pub stage1_n_params: usize,
    /// MLE residual scale of the continuous first stage; None for probit.
    pub stage1_sigma: Option<f64>,
    pub stage2_loglik: f64,
    pub stage2_n_params: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Theta,
    /// Joint log-likelihood for LIML fits; the stage-2 probit log-likelihood
    /// for 2SRI; absent for 2SLS.
    pub loglik: Option<f64>,
    pub converged: bool,
    pub n_params: usize,
    /// Rows in the dataset the fit was computed on.
    pub n_obs: usize,
    pub iterations: usize,
    pub treatment_formula: ModelFormula,
    pub outcome_formula: ModelFormula,
    pub method: FitMethod,
    pub two_sri: Option<TwoSriParts>,
}

impl FitResult {
    pub fn formula_pair(&self) -> (&str, &str) {
        (self.treatment_formula.label(), self.outcome_formula.label())
    }

    /// Coefficient on the treatment main effect in the outcome equation.
    pub fn w_coefficient(&self) -> Option<f64> {
        self.outcome_formula
            .main_index(Var::W)
            .map(|j| self.theta.beta[j])
    }
}

/// Free-parameter count entering the information criteria: coefficients of
/// both sides plus the estimated dependence parameters (sigma_v and rho for
/// a continuous treatment, rho alone for a dichotomous one).
pub fn liml_n_params(
    f_t: &ModelFormula,
    f_o: &ModelFormula,
    kind: TreatmentKind,
    xi_estimated: bool,
) -> usize {
    let xi = if xi_estimated {
        match kind {
            TreatmentKind::Continuous => 2,
            TreatmentKind::Dichotomous => 1,
        }
    } else {
        0
    };
    f_t.n_terms() + f_o.n_terms() + xi
}

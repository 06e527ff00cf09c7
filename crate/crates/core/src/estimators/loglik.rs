//! Joint log-likelihoods for the two treatment kinds.
//!
//! Continuous treatment (probit outcome, linear first stage with jointly
//! normal errors, V scaled by sigma): conditioning on v = w - x_t'alpha
//! shifts the outcome index, giving per observation
//!
//!   y ln Phi(m) + (1 - y) ln Phi(-m) - v^2/(2 s^2) - ln(s sqrt(2 pi)),
//!   m = (x_o'beta + rho v/s) / sqrt(1 - rho^2),
//!
//! with the y = 0 branch written as Phi(-m) because 1 - Phi(m) rounds to
//! zero long before the true tail probability underflows.
//!
//! Dichotomous treatment: (V, U) bivariate standard normal with correlation
//! rho; each (y, w) cell is one orthant probability, reduced to a single
//! bvn_cdf call by reflecting V, U, or both, so no cell is a difference.

use nalgebra::{DMatrix, DVector};

use crate::model::{Dataset, ModelFormula, Side, TreatmentKind};
use crate::stats::{bvn_cdf, norm_cdf};
use crate::{Error, Result};

/// Stand-in objective value when a likelihood cannot be evaluated.
pub const LOGLIK_PENALTY: f64 = -1e15;

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

const LN_SQRT_2PI: f64 = 0.9189385332046727;

pub(crate) fn design_matrix(data: &Dataset, formula: &ModelFormula) -> DMatrix<f64> {
    let n = data.n();
    let k = formula.n_terms();
    let mut m = DMatrix::zeros(n, k);
    for i in 0..n {
        let vals = data.vals(i);
        for (j, t) in formula.terms().iter().enumerate() {
            m[(i, j)] = t.value(&vals);
        }
    }
    m
}

fn check_sides(f_t: &ModelFormula, f_o: &ModelFormula) -> Result<()> {
    if f_t.side() != Side::Treatment || f_o.side() != Side::Outcome {
        return Err(Error::invalid("formula pair must be (treatment, outcome)"));
    }
    Ok(())
}

/// Continuous-treatment log-likelihood summed over observations. Returns the
/// penalty value instead of NaN/-inf when the parameters step outside the
/// domain (sigma <= 0, |rho| >= 1) or the evaluation goes non-finite.
pub fn loglik_rivers_vuong(
    data: &Dataset,
    f_t: &ModelFormula,
    f_o: &ModelFormula,
    alpha: &[f64],
    beta: &[f64],
    sigma_v: f64,
    rho: f64,
) -> Result<f64> {
    check_sides(f_t, f_o)?;
    if data.treatment_kind != TreatmentKind::Continuous {
        return Err(Error::invalid("rivers-vuong likelihood needs a continuous treatment"));
    }
    if alpha.len() != f_t.n_terms() || beta.len() != f_o.n_terms() {
        return Err(Error::invalid("coefficient length does not match formula"));
    }
    let xt = design_matrix(data, f_t);
    let xo = design_matrix(data, f_o);
    Ok(rv_loglik_mat(
        &xt,
        &xo,
        &data.y,
        &data.w,
        &DVector::from_column_slice(alpha),
        &DVector::from_column_slice(beta),
        sigma_v,
        rho,
    ))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn rv_loglik_mat(
    xt: &DMatrix<f64>,
    xo: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    sigma_v: f64,
    rho: f64,
) -> f64 {
    if !(sigma_v > 0.0 && sigma_v.is_finite() && rho.abs() < 1.0) {
        return LOGLIK_PENALTY;
    }
    let phi1 = xt * alpha;
    let phi2 = xo * beta;
    let inv_den = 1.0 / (1.0 - rho * rho).sqrt();
    let rho_over_s = rho / sigma_v;
    let inv_2s2 = 1.0 / (2.0 * sigma_v * sigma_v);
    let ln_norm = sigma_v.ln() + LN_SQRT_2PI;

    let mut ll = 0.0;
    for i in 0..y.len() {
        let v = w[i] - phi1[i];
        let m = (phi2[i] + rho_over_s * v) * inv_den;
        // the y = 0 complement goes through Phi(-m) to stay exact in the tail
        let p = if y[i] == 1.0 { norm_cdf(m) } else { norm_cdf(-m) };
        ll += p.max(PROB_FLOOR).ln() - v * v * inv_2s2 - ln_norm;
    }
    if ll.is_finite() {
        ll
    } else {
        LOGLIK_PENALTY
    }
}

/// Dichotomous-treatment log-likelihood summed over observations.
pub fn loglik_dichotomous(
    data: &Dataset,
    f_t: &ModelFormula,
    f_o: &ModelFormula,
    alpha: &[f64],
    beta: &[f64],
    rho: f64,
) -> Result<f64> {
    check_sides(f_t, f_o)?;
    if data.treatment_kind != TreatmentKind::Dichotomous {
        return Err(Error::invalid("four-cell likelihood needs a dichotomous treatment"));
    }
    if alpha.len() != f_t.n_terms() || beta.len() != f_o.n_terms() {
        return Err(Error::invalid("coefficient length does not match formula"));
    }
    let xt = design_matrix(data, f_t);
    let xo = design_matrix(data, f_o);
    Ok(dich_loglik_mat(
        &xt,
        &xo,
        &data.y,
        &data.w,
        &DVector::from_column_slice(alpha),
        &DVector::from_column_slice(beta),
        rho,
    ))
}

pub(crate) fn dich_loglik_mat(
    xt: &DMatrix<f64>,
    xo: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    rho: f64,
) -> f64 {
    if !(rho.is_finite() && rho.abs() < 1.0) {
        return LOGLIK_PENALTY;
    }
    let phi1 = xt * alpha;
    let phi2 = xo * beta;
    let mut ll = 0.0;
    for i in 0..y.len() {
        // W = 1 iff V > -t, Y = 1 iff U > -o; reflecting V, U, or both turns
        // every cell into a plain lower-orthant probability, and (-V, U) or
        // (V, -U) has correlation -rho
        let t = phi1[i];
        let o = phi2[i];
        let p = match (w[i] == 1.0, y[i] == 1.0) {
            (true, true) => bvn_cdf(t, o, rho),
            (true, false) => bvn_cdf(t, -o, -rho),
            (false, true) => bvn_cdf(-t, o, -rho),
            (false, false) => bvn_cdf(-t, -o, rho),
        };
        ll += p.max(PROB_FLOOR).ln();
    }
    if ll.is_finite() {
        ll
    } else {
        LOGLIK_PENALTY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        catalog_continuous_outcome, catalog_continuous_treatment, catalog_dichotomous_outcome,
        catalog_dichotomous_treatment,
    };
    use approx::assert_abs_diff_eq;

    fn one_row_continuous(y: f64, w: f64) -> Dataset {
        Dataset::new(
            TreatmentKind::Continuous,
            vec![y],
            vec![w],
            vec![0.4],
            vec![1.0],
            vec![-0.2],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn rivers_vuong_single_observation_anchor() {
        // all coefficients zero, sigma 1, rho 0, y = 1, w = 0:
        // ln Phi(0) - 0 - ln sqrt(2 pi) = ln(1/2) - 0.9189385...
        let data = one_row_continuous(1.0, 0.0);
        let f_t = catalog_continuous_treatment().get("a4").unwrap().clone();
        let f_o = catalog_continuous_outcome().get("b2").unwrap().clone();
        let ll = loglik_rivers_vuong(&data, &f_t, &f_o, &[0.0; 4], &[0.0; 4], 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(ll, -1.6120857137646178, epsilon = 1e-12);
    }

    #[test]
    fn dichotomous_single_observation_anchor() {
        // all coefficients zero, rho 0, y = 1, w = 1: each cell is 1/4
        let data = Dataset::new(
            TreatmentKind::Dichotomous,
            vec![1.0],
            vec![1.0],
            vec![0.4],
            vec![1.0],
            vec![-0.2],
            vec![1.0],
        )
        .unwrap();
        let f_t = catalog_dichotomous_treatment().get("a4").unwrap().clone();
        let f_o = catalog_dichotomous_outcome().get("b5").unwrap().clone();
        let ll = loglik_dichotomous(&data, &f_t, &f_o, &[0.0; 4], &[0.0; 5], 0.0).unwrap();
        assert_abs_diff_eq!(ll, -1.3862943611198906, epsilon = 1e-12);
    }

    #[test]
    fn dichotomous_cells_partition_unity() {
        // for any parameters the four cell probabilities must sum to 1;
        // evaluate all four (y, w) patterns on the same covariates
        let f_t = catalog_dichotomous_treatment().get("a4").unwrap().clone();
        let f_o = catalog_dichotomous_outcome().get("b5").unwrap().clone();
        let alpha = [0.3, -0.8, 0.5, 1.1];
        let beta = [-0.4, 0.9, 0.2, -0.6, 0.7];
        for rho in [-0.95, -0.3, 0.0, 0.6, 0.97] {
            let mut total = 0.0;
            for (y, w) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                let data = Dataset::new(
                    TreatmentKind::Dichotomous,
                    vec![y],
                    vec![w],
                    vec![0.9],
                    vec![1.0],
                    vec![-1.7],
                    vec![1.0],
                )
                .unwrap();
                let ll = loglik_dichotomous(&data, &f_t, &f_o, &alpha, &beta, rho).unwrap();
                total += ll.exp();
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn rho_zero_decouples_continuous_likelihood() {
        // at rho = 0 the joint likelihood is probit(y; beta) + normal(v; sigma)
        let data = Dataset::new(
            TreatmentKind::Continuous,
            vec![1.0, 0.0, 1.0, 1.0, 0.0],
            vec![0.5, -0.2, 1.9, 0.8, 2.4],
            vec![0.3, -1.1, 0.4, 0.0, 1.2],
            vec![1.0, 0.0, 0.0, 1.0, 1.0],
            vec![-0.4, 0.8, 1.5, -2.0, 0.3],
            vec![1.0, 0.0, 1.0, 0.0, 1.0],
        )
        .unwrap();
        let f_t = catalog_continuous_treatment().get("a4").unwrap().clone();
        let f_o = catalog_continuous_outcome().get("b2").unwrap().clone();
        let alpha = [0.9, 0.8, 0.7, 1.2];
        let beta = [0.2, 0.5, -0.3, 0.4];
        let sigma = 1.3;

        let joint = loglik_rivers_vuong(&data, &f_t, &f_o, &alpha, &beta, sigma, 0.0).unwrap();

        let xt = design_matrix(&data, &f_t);
        let xo = design_matrix(&data, &f_o);
        let mut probit = 0.0;
        let mut gauss = 0.0;
        for i in 0..data.n() {
            let eta: f64 = (0..4).map(|j| xo[(i, j)] * beta[j]).sum();
            let p = norm_cdf(eta);
            probit += if data.y[i] == 1.0 { p.ln() } else { (1.0 - p).ln() };
            let v = data.w[i] - (0..4).map(|j| xt[(i, j)] * alpha[j]).sum::<f64>();
            gauss += -v * v / (2.0 * sigma * sigma) - sigma.ln() - LN_SQRT_2PI;
        }
        assert_abs_diff_eq!(joint, probit + gauss, epsilon = 1e-10);
    }

    #[test]
    fn row_permutation_invariance() {
        let data = Dataset::new(
            TreatmentKind::Continuous,
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.5, -0.2, 1.9, 0.8],
            vec![0.3, -1.1, 0.4, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![-0.4, 0.8, 1.5, -2.0],
            vec![1.0, 0.0, 1.0, 0.0],
        )
        .unwrap();
        let perm = [2usize, 0, 3, 1];
        let pick = |col: &[f64]| perm.iter().map(|&i| col[i]).collect::<Vec<_>>();
        let shuffled = Dataset::new(
            TreatmentKind::Continuous,
            pick(&data.y),
            pick(&data.w),
            pick(&data.x1),
            pick(&data.x2),
            pick(&data.x3),
            pick(&data.z),
        )
        .unwrap();
        let f_t = catalog_continuous_treatment().get("a2").unwrap().clone();
        let f_o = catalog_continuous_outcome().get("b3").unwrap().clone();
        let a = [0.1, 0.6, -0.4];
        let b = [0.0, 0.3, 0.2, -0.1, 0.5];
        let l1 = loglik_rivers_vuong(&data, &f_t, &f_o, &a, &b, 0.9, 0.4).unwrap();
        let l2 = loglik_rivers_vuong(&shuffled, &f_t, &f_o, &a, &b, 0.9, 0.4).unwrap();
        assert_abs_diff_eq!(l1, l2, epsilon = 1e-12);
    }

    #[test]
    fn out_of_domain_parameters_hit_penalty() {
        let data = one_row_continuous(1.0, 0.5);
        let f_t = catalog_continuous_treatment().get("a1").unwrap().clone();
        let f_o = catalog_continuous_outcome().get("b1").unwrap().clone();
        for (sigma, rho) in [(0.0, 0.0), (-1.0, 0.0), (1.0, 1.0), (1.0, -1.5)] {
            let ll = loglik_rivers_vuong(&data, &f_t, &f_o, &[0.0; 2], &[0.0; 2], sigma, rho).unwrap();
            assert_eq!(ll, LOGLIK_PENALTY);
        }
        let data2 = Dataset::new(
            TreatmentKind::Dichotomous,
            vec![1.0],
            vec![0.0],
            vec![0.0],
            vec![0.0],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        let f_t2 = catalog_dichotomous_treatment().get("a4").unwrap().clone();
        let f_o2 = catalog_dichotomous_outcome().get("b1").unwrap().clone();
        assert_eq!(
            loglik_dichotomous(&data2, &f_t2, &f_o2, &[0.0; 4], &[0.0; 2], 1.0).unwrap(),
            LOGLIK_PENALTY
        );
    }

    #[test]
    fn length_mismatch_rejected() {
        let data = one_row_continuous(1.0, 0.5);
        let f_t = catalog_continuous_treatment().get("a4").unwrap().clone();
        let f_o = catalog_continuous_outcome().get("b2").unwrap().clone();
        assert!(loglik_rivers_vuong(&data, &f_t, &f_o, &[0.0; 3], &[0.0; 4], 1.0, 0.0).is_err());
        assert!(loglik_rivers_vuong(&data, &f_o, &f_t, &[0.0; 4], &[0.0; 4], 1.0, 0.0).is_err());
    }

    #[test]
    fn extreme_index_is_clamped_not_nan() {
        let data = one_row_continuous(1.0, 0.0);
        let f_t = catalog_continuous_treatment().get("a1").unwrap().clone();
        let f_o = catalog_continuous_outcome().get("b1").unwrap().clone();
        // beta intercept -60: Phi underflows to 0, log floored at -300-ish
        let ll = loglik_rivers_vuong(&data, &f_t, &f_o, &[0.0; 2], &[-60.0, 0.0], 1.0, 0.0).unwrap();
        assert!(ll.is_finite());
        assert!(ll < -600.0);
    }
}

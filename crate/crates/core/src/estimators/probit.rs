//! Probit maximum likelihood by Fisher scoring with step halving.

use nalgebra::{DMatrix, DVector};

use crate::stats::{norm_cdf, norm_pdf};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ProbitFit {
    pub coef: DVector<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn probit_loglik(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    let mut ll = 0.0;
    for i in 0..y.len() {
        let p = norm_cdf(eta[i]).clamp(1e-300, 1.0);
        let q = (1.0 - norm_cdf(eta[i])).clamp(1e-300, 1.0);
        ll += if y[i] == 1.0 { p.ln() } else { q.ln() };
    }
    ll
}

/// Fit y ~ Phi(x beta). `x` carries the intercept column already.
pub fn fit_probit(x: &DMatrix<f64>, y: &[f64]) -> Result<ProbitFit> {
    let (n, k) = x.shape();
    if y.len() != n || n == 0 {
        return Err(Error::invalid("probit: shape mismatch"));
    }
    // exact collinearity can survive the information-matrix Cholesky through
    // roundoff, so rank-check the design itself up front
    let sv = x.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if sv.iter().any(|s| *s <= smax * 1e-10 * n.max(k) as f64) {
        return Err(Error::degenerate(
            "probit: rank-deficient design (collinear columns)",
        ));
    }
    let max_iter = 60;
    let tol = 1e-9;

    let mut beta = DVector::zeros(k);
    let mut ll = probit_loglik(x, y, &beta);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        let eta = x * &beta;
        let mut score = DVector::zeros(k);
        let mut info = DMatrix::zeros(k, k);
        for i in 0..n {
            let p = norm_cdf(eta[i]).clamp(1e-12, 1.0 - 1e-12);
            let d = norm_pdf(eta[i]);
            let s_i = (y[i] - p) * d / (p * (1.0 - p));
            let w_i = d * d / (p * (1.0 - p));
            for a in 0..k {
                score[a] += x[(i, a)] * s_i;
                for b in a..k {
                    info[(a, b)] += x[(i, a)] * w_i * x[(i, b)];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }

        let chol = match info.clone().cholesky() {
            Some(c) => c,
            None => {
                return Err(Error::degenerate(
                    "probit: singular information matrix (collinear design or separation)",
                ))
            }
        };
        let mut delta = chol.solve(&score);

        // step halving if the full Newton step overshoots
        let mut ll_new = probit_loglik(x, y, &(&beta + &delta));
        let mut halvings = 0;
        while ll_new < ll && halvings < 30 {
            delta *= 0.5;
            ll_new = probit_loglik(x, y, &(&beta + &delta));
            halvings += 1;
        }
        beta += &delta;

        let rel = (ll_new - ll).abs() / (1.0 + ll_new.abs());
        ll = ll_new;
        if delta.amax() < tol || rel < 1e-13 {
            converged = true;
            break;
        }
    }

    Ok(ProbitFit {
        coef: beta,
        loglik: ll,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RngStream;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn recovers_coefficients_on_simulated_data() {
        let mut rng = RngStream::new(11, 0);
        let n = 4000;
        let (b0, b1, b2) = (0.3, -0.8, 0.5);
        let mut x = DMatrix::zeros(n, 3);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let x1: f64 = StandardNormal.sample(&mut rng);
            let x2: f64 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
            let u: f64 = StandardNormal.sample(&mut rng);
            x[(i, 0)] = 1.0;
            x[(i, 1)] = x1;
            x[(i, 2)] = x2;
            y[i] = if b0 + b1 * x1 + b2 * x2 + u >= 0.0 { 1.0 } else { 0.0 };
        }
        let fit = fit_probit(&x, &y).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.coef[0], b0, epsilon = 0.1);
        assert_abs_diff_eq!(fit.coef[1], b1, epsilon = 0.1);
        assert_abs_diff_eq!(fit.coef[2], b2, epsilon = 0.1);
        assert!(fit.loglik < 0.0);
    }

    #[test]
    fn intercept_only_matches_closed_form() {
        // MLE of intercept-only probit is Phi^{-1}(mean(y))
        let y = vec![1.0, 1.0, 1.0, 0.0];
        let x = DMatrix::from_element(4, 1, 1.0);
        let fit = fit_probit(&x, &y).unwrap();
        assert_abs_diff_eq!(norm_cdf(fit.coef[0]), 0.75, epsilon = 1e-8);
        let p: f64 = 0.75;
        let expect = 3.0 * p.ln() + (1.0 - p).ln();
        assert_abs_diff_eq!(fit.loglik, expect, epsilon = 1e-8);
    }

    #[test]
    fn collinear_design_is_degenerate() {
        let mut x = DMatrix::zeros(6, 2);
        for i in 0..6 {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = 2.0; // constant duplicate of the intercept
        }
        let y = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert!(fit_probit(&x, &y).is_err());
    }
}

//! Least squares with rank checking, plus the Gaussian log likelihood at the
//! MLE scale. Backs the 2SLS stages and the continuous 2SRI first stage.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub(crate) struct LsFit {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    /// sqrt(SSR / n), the MLE of the residual scale (not the unbiased s)
    pub sigma_mle: f64,
    /// Gaussian log likelihood profiled at sigma_mle
    pub loglik: f64,
}

/// Solves min ||y - X b|| by SVD. A design that is numerically rank deficient
/// (collinear columns, constant regressor duplicating the intercept) is
/// reported as degenerate data rather than silently resolved.
pub(crate) fn fit_ls(x: &DMatrix<f64>, y: &[f64]) -> Result<LsFit> {
    let n = x.nrows();
    let k = x.ncols();
    if y.len() != n {
        return Err(Error::invalid("response length does not match design rows"));
    }
    if n < k {
        return Err(Error::degenerate("fewer observations than coefficients"));
    }
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let smax = svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    let tol = smax * 1e-10 * n.max(k) as f64;
    if svd.rank(tol) < k {
        return Err(Error::degenerate(
            "rank-deficient design (collinear columns)",
        ));
    }
    let coef = svd
        .solve(&yv, tol)
        .map_err(|e| Error::degenerate(format!("least squares solve failed: {e}")))?;
    let residuals = &yv - x * &coef;
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let nf = n as f64;
    let sigma_mle = (ssr / nf).sqrt();
    let loglik = if sigma_mle > 0.0 {
        -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma_mle * sigma_mle).ln() + 1.0)
    } else {
        f64::INFINITY
    };
    Ok(LsFit {
        coef,
        residuals,
        sigma_mle,
        loglik,
    })
}

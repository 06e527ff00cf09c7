//! Standard logistic CDF and quantile.

/// Logistic CDF, computed on the side that avoids overflow.
pub fn logistic_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic quantile (logit).
pub fn logistic_quantile(p: f64) -> crate::Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(crate::Error::invalid(format!(
            "quantile needs p in (0, 1), got {p}"
        )));
    }
    Ok((p / (1.0 - p)).ln())
}

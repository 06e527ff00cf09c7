//! Standard normal density, CDF, and quantile.

use std::f64::consts::SQRT_2;

const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF via erfc; absolute error is at the ulp level, well
/// inside the 1e-12 contract.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile. Acklam's rational approximation polished with
/// one Halley step against norm_cdf, giving ~1e-15 relative accuracy.
/// Coefficient digits kept exactly as published.
#[allow(clippy::excessive_precision)]
pub fn norm_quantile(p: f64) -> crate::Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(crate::Error::invalid(format!(
            "quantile needs p in (0, 1), got {p}"
        )));
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley refinement.
    let e = norm_cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x -= u / (1.0 + 0.5 * x * u);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_known_values() {
        assert_abs_diff_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_cdf(1.0), 0.8413447460685429, epsilon = 1e-13);
        assert_abs_diff_eq!(norm_cdf(-1.96), 0.024997895148220435, epsilon = 1e-13);
        assert_abs_diff_eq!(norm_cdf(5.0), 0.9999997133484281, epsilon = 1e-13);
    }

    #[test]
    fn cdf_symmetry() {
        for &x in &[0.1, 0.7, 1.3, 2.9, 6.0] {
            assert_abs_diff_eq!(norm_cdf(x) + norm_cdf(-x), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn quantile_roundtrip() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let x = norm_quantile(p).unwrap();
            assert_abs_diff_eq!(norm_cdf(x), p, epsilon = 1e-13);
        }
        // tails
        for &p in &[1e-10, 1e-6, 1.0 - 1e-6] {
            let x = norm_quantile(p).unwrap();
            assert_abs_diff_eq!(norm_cdf(x) / p, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn quantile_rejects_bounds() {
        assert!(norm_quantile(0.0).is_err());
        assert!(norm_quantile(1.0).is_err());
        assert!(norm_quantile(f64::NAN).is_err());
    }
}

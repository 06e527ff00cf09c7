//! Scalar distributions, bivariate normal orthant probabilities, copula
//! sampling and calibration, and seeded RNG streams.

mod bvn;
mod copula;
mod logistic;
mod normal;
mod rng;

pub use bvn::bvn_cdf;
pub use copula::{
    calibrate_copula_param, clayton_cdf, copula_pearson_corr, sample_copula_pair, CopulaFamily,
    CopulaSpec, Margin, DEFAULT_T_DF,
};
pub use logistic::{logistic_cdf, logistic_quantile};
pub use normal::{norm_cdf, norm_pdf, norm_quantile};
pub use rng::RngStream;

/// Correlation constrained to the open interval (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation(f64);

impl Correlation {
    pub fn new(rho: f64) -> crate::Result<Self> {
        if rho.is_finite() && rho.abs() < 1.0 {
            Ok(Correlation(rho))
        } else {
            Err(crate::Error::invalid(format!(
                "correlation must lie in (-1, 1), got {rho}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_rejects_out_of_range() {
        assert!(Correlation::new(1.0).is_err());
        assert!(Correlation::new(-1.0).is_err());
        assert!(Correlation::new(f64::NAN).is_err());
        assert!(Correlation::new(0.999).is_ok());
    }
}

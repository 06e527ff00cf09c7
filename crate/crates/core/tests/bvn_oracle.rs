//! bvn_cdf against its closed forms and a brute 2-D quadrature oracle.

mod support;

use ivsel_core::stats::bvn_cdf;
use support::bvn_box;

// Phi(-8.75) ~ 1e-18, far below every comparison tolerance here.
const LO: f64 = -8.75;

#[test]
fn origin_matches_arcsine_closed_form() {
    for i in -9..=9i32 {
        let rho = f64::from(i) / 10.0;
        let want = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        let got = bvn_cdf(0.0, 0.0, rho);
        assert!(
            (got - want).abs() <= 1e-12,
            "rho={rho}: got {got}, closed form {want}"
        );
    }
}

#[test]
fn quadrature_oracle_grid() {
    let args = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let rhos = [-0.8, -0.4, 0.0, 0.4, 0.8];
    for rho in rhos {
        for h in args {
            for k in args {
                let want = bvn_box(LO, h, LO, k, rho, 2400);
                let got = bvn_cdf(h, k, rho);
                assert!(
                    (got - want).abs() <= 1e-8,
                    "({h}, {k}, {rho}): got {got}, quadrature {want}"
                );
            }
        }
    }
}

#[test]
fn upper_band_consistency_with_marginal() {
    // P(V <= h, U > k) computed two ways: by the marginal identity
    // bvn_cdf(h, inf) - bvn_cdf(h, k), and by integrating the density over
    // the band directly
    for (h, k, rho) in [
        (0.5, -0.5, 0.6),
        (-1.0, 1.0, -0.7),
        (2.0, 0.0, 0.3),
        (0.0, -2.0, -0.2),
    ] {
        let identity = bvn_cdf(h, f64::INFINITY, rho) - bvn_cdf(h, k, rho);
        let band = bvn_box(LO, h, k, k + 10.0, rho, 2400);
        assert!(
            (identity - band).abs() <= 1e-8,
            "({h}, {k}, {rho}): identity {identity}, band {band}"
        );
    }
}

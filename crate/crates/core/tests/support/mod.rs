//! Quadrature oracles shared by the integration tests. Everything here is
//! test-local and brute force on purpose: composite Simpson rules over
//! explicitly written densities, so the oracle shares no code path with the
//! closed-form likelihoods or the bvn machinery it judges.

pub const SQRT_2PI: f64 = 2.5066282746310002;

/// Composite Simpson over [a, b] with n subintervals (n is forced even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Density of N(mu, sd^2).
pub fn normal_density(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    (-0.5 * z * z).exp() / (sd * SQRT_2PI)
}

/// Standard bivariate normal density with correlation rho.
pub fn bvn_density(v: f64, u: f64, rho: f64) -> f64 {
    let s2 = 1.0 - rho * rho;
    let q = (v * v - 2.0 * rho * v * u + u * u) / s2;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * s2.sqrt())
}

/// Tensor Simpson integral of the bvn density over [va, vb] x [ua, ub].
pub fn bvn_box(va: f64, vb: f64, ua: f64, ub: f64, rho: f64, n: usize) -> f64 {
    simpson(|v| simpson(|u| bvn_density(v, u, rho), ua, ub, n), va, vb, n)
}

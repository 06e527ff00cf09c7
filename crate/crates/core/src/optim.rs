//! Quasi-Newton minimizer used by the likelihood fitters.
//!
//! BFGS on a dense inverse-Hessian with backtracking Armijo line search and
//! central-difference gradients. Callers hand in objectives scaled to O(1)
//! per observation (mean rather than summed log-likelihood); at that scale
//! the difference step h = 1e-6 (1 + |x_j|) keeps gradient roundoff near
//! 1e-9, far below the convergence tolerance.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Options {
    /// Max-norm gradient threshold.
    pub grad_tol: f64,
    /// Relative objective-change threshold.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            grad_tol: 1e-6,
            f_tol: 1e-10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    /// Max-norm of the gradient at the final point, kept for diagnostics.
    #[allow(dead_code)]
    pub grad_max: f64,
    pub iterations: usize,
    /// Gradient and objective-change criteria both met.
    pub converged: bool,
}

pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> DVector<f64> {
    let mut xp = x.to_vec();
    let mut g = DVector::zeros(x.len());
    for j in 0..x.len() {
        let h = 1e-6 * (1.0 + x[j].abs());
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(&xp);
        xp[j] = orig - h;
        let fm = f(&xp);
        xp[j] = orig;
        g[j] = (fp - fm) / (2.0 * h);
    }
    g
}

pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &Options) -> OptimResult {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    let mut g = numerical_gradient(&f, x.as_slice());
    let mut h_inv = DMatrix::<f64>::identity(n, n);

    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let grad_max = g.amax();
        if grad_max < opts.grad_tol && iter > 0 {
            converged = true;
            break;
        }

        let mut dir = -(&h_inv * &g);
        // fall back to steepest descent if the metric has gone bad
        if dir.dot(&g) >= 0.0 || !dir.iter().all(|v| v.is_finite()) {
            h_inv = DMatrix::identity(n, n);
            dir = -g.clone();
        }

        // Armijo backtracking
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut x_new = &x + step * &dir;
        let mut f_new = f(x_new.as_slice());
        let mut ok = false;
        for _ in 0..60 {
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                ok = true;
                break;
            }
            step *= 0.5;
            x_new = &x + step * &dir;
            f_new = f(x_new.as_slice());
        }
        if !ok {
            // no acceptable step along this direction; we are done moving
            converged = g.amax() < opts.grad_tol;
            break;
        }

        let g_new = numerical_gradient(&f, x_new.as_slice());
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        // BFGS update, skipped when curvature information is unusable
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H <- H + (sy + yHy) rho^2 s s' - rho (H y s' + s y' H)
            h_inv += (sy + yhy) * rho * rho * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }

        let f_drop = (fx - f_new).abs();
        x = x_new;
        g = g_new;
        let f_prev = fx;
        fx = f_new;

        if g.amax() < opts.grad_tol && f_drop <= opts.f_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let _ = f_prev;
    }

    OptimResult {
        grad_max: g.amax(),
        x: x.as_slice().to_vec(),
        f: fx,
        iterations,
        converged,
    }
}

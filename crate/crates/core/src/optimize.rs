//! Box-constrained quasi-Newton minimizer with numerical gradients.
//!
//! Small and dense on purpose: hyperparameter fits in this crate have at
//! most a handful of variables. BFGS curvature updates, gradient projection
//! onto the box, backtracking Armijo line search, central-difference
//! gradients.

#[derive(Debug, Clone)]
pub(crate) struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub converged: bool,
    #[allow(dead_code)]
    pub iterations: usize,
}

fn central_gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], bounds: &Bounds) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        let lo = (x[i] - h).max(bounds.lo[i]);
        let hi = (x[i] + h).min(bounds.hi[i]);
        if hi <= lo {
            grad[i] = 0.0;
            continue;
        }
        probe[i] = hi;
        let f_hi = f(&probe);
        probe[i] = lo;
        let f_lo = f(&probe);
        probe[i] = x[i];
        grad[i] = (f_hi - f_lo) / (hi - lo);
    }
    grad
}

/// Minimizes `f` inside `bounds` starting from `x0`.
pub(crate) fn minimize_bounded(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    bounds: &Bounds,
    max_iterations: usize,
    tolerance: f64,
) -> MinimizeResult {
    let d = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut fx = f(&x);
    let mut grad = central_gradient(f, &x, bounds);

    // inverse Hessian approximation
    let mut h_inv = vec![vec![0.0; d]; d];
    for (i, row) in h_inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..max_iterations {
        iterations = iter + 1;

        // projected-gradient stationarity test
        let mut stationarity = 0.0f64;
        for i in 0..d {
            let stepped = (x[i] - grad[i]).clamp(bounds.lo[i], bounds.hi[i]);
            stationarity = stationarity.max((stepped - x[i]).abs());
        }
        if stationarity <= tolerance {
            converged = true;
            break;
        }

        // direction = -H_inv * grad, projected away from active bounds
        let mut dir = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                dir[i] -= h_inv[i][j] * grad[j];
            }
        }
        for i in 0..d {
            let at_lo = x[i] <= bounds.lo[i] && dir[i] < 0.0;
            let at_hi = x[i] >= bounds.hi[i] && dir[i] > 0.0;
            if at_lo || at_hi {
                dir[i] = 0.0;
            }
        }
        let descent: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if descent >= 0.0 {
            // fall back to steepest descent when curvature is unusable
            for i in 0..d {
                dir[i] = -grad[i];
            }
        }

        // backtracking Armijo search on the projected path
        let mut alpha = 1.0;
        let mut x_new = x.clone();
        let mut f_new = fx;
        let mut improved = false;
        for _ in 0..40 {
            for i in 0..d {
                x_new[i] = x[i] + alpha * dir[i];
            }
            bounds.project(&mut x_new);
            f_new = f(&x_new);
            let slope: f64 = grad
                .iter()
                .zip(&x_new)
                .zip(&x)
                .map(|((g, xn), xo)| g * (xn - xo))
                .sum();
            if f_new <= fx + 1e-4 * slope.min(0.0) && f_new < fx {
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            converged = stationarity <= tolerance.max(1e-6);
            break;
        }

        let grad_new = central_gradient(f, &x_new, bounds);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if sy > 1e-12 * ss.sqrt() * yy.sqrt() {
            // BFGS update of the inverse Hessian
            let rho = 1.0 / sy;
            let mut hy = vec![0.0; d];
            for i in 0..d {
                for j in 0..d {
                    hy[i] += h_inv[i][j] * y[j];
                }
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..d {
                for j in 0..d {
                    h_inv[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (s[i] * hy[j] + hy[i] * s[j]);
                }
            }
        }

        x = x_new;
        fx = f_new;
        grad = grad_new;
    }

    MinimizeResult {
        x,
        value: fx,
        converged,
        iterations,
    }
}

/// Standard normal CDF via the Abramowitz-Stegun erf approximation;
/// plenty for acquisition ranking.
pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

pub(crate) fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

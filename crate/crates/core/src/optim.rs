//! BFGS quasi-Newton minimizer with a backtracking Armijo line search.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged when the gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// Converged when the accepted step's max-norm falls below this.
    pub step_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            step_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Objective value after each accepted iteration, starting with the
    /// initial point. Non-increasing by construction.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Minimizes `f`, which returns the value and gradient at a point.
///
/// Non-finite values are treated as +∞ during the line search, so the
/// objective may signal an inadmissible point that way.
pub fn bfgs<F>(f: F, x0: DVector<f64>, opts: BfgsOptions) -> Minimum
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut history = vec![fx];
    let mut iterations = 0;
    let mut reset = false;

    loop {
        let gnorm = g.amax();
        if gnorm < opts.grad_tol {
            return done(x, fx, gnorm, iterations, history, true);
        }
        if iterations >= opts.max_iter {
            return done(x, fx, gnorm, iterations, history, false);
        }

        let mut dir = -(&hinv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        // First iteration: keep the trial step modest in parameter space.
        let mut t = if iterations == 0 { (1.0 / dir.amax()).min(1.0) } else { 1.0 };
        let accepted = loop {
            let step = &dir * t;
            if step.amax() < opts.step_tol {
                break None;
            }
            let xn = &x + &step;
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * t * slope {
                break Some((xn, fn_, gn, step));
            }
            t *= 0.5;
        };

        let Some((xn, fn_, gn, step)) = accepted else {
            if !reset && iterations > 0 {
                // One retry along steepest descent before declaring a stall.
                hinv = DMatrix::identity(n, n);
                reset = true;
                continue;
            }
            return done(x, fx, gnorm, iterations, history, true);
        };
        reset = false;
        iterations += 1;

        let y = &gn - &g;
        let sy = step.dot(&y);
        if sy > 1e-12 * step.norm() * y.norm() {
            if iterations == 1 {
                // Scale the initial inverse Hessian.
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - &step * y.transpose() * rho;
            let right = &i - &y * step.transpose() * rho;
            hinv = &left * &hinv * &right + &step * step.transpose() * rho;
        }
        let small_step = step.amax() < opts.step_tol;
        x = xn;
        fx = fn_;
        g = gn;
        history.push(fx);
        if small_step {
            let gnorm = g.amax();
            return done(x, fx, gnorm, iterations, history, true);
        }
    }
}

fn done(x: DVector<f64>, value: f64, grad_norm: f64, iterations: usize, history: Vec<f64>, converged: bool) -> Minimum {
    Minimum {
        x,
        value,
        grad_norm,
        iterations,
        history,
        converged,
    }
}

pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maps unconstrained `(u, v)` to `(a, b)` with `a, b ≥ 0` and
/// `a + b = cap · σ(u) < cap`; also returns `∂(a, b)/∂(u, v)` row-major.
pub fn persistence_pair(u: f64, v: f64, cap: f64) -> ((f64, f64), [[f64; 2]; 2]) {
    let su = logistic(u);
    let sv = logistic(v);
    let s = cap * su;
    let ds = cap * su * (1.0 - su);
    let dsv = sv * (1.0 - sv);
    let a = s * sv;
    let b = s * (1.0 - sv);
    ((a, b), [[ds * sv, s * dsv], [ds * (1.0 - sv), -s * dsv]])
}

/// Inverse of [`persistence_pair`].
pub fn persistence_pair_inv(a: f64, b: f64, cap: f64) -> (f64, f64) {
    let s = (a + b) / cap;
    (logit(s), logit(a / (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ]);
            (v, g)
        };
        let m = bfgs(f, DVector::from_vec(vec![-1.2, 1.0]), BfgsOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn persistence_roundtrip_and_jacobian() {
        let ((a, b), jac) = persistence_pair(0.7, -0.3, 0.999);
        let (u, v) = persistence_pair_inv(a, b, 0.999);
        assert!((u - 0.7).abs() < 1e-12 && (v + 0.3).abs() < 1e-12);
        let h = 1e-6;
        let ((a1, b1), _) = persistence_pair(0.7 + h, -0.3, 0.999);
        let ((a0, b0), _) = persistence_pair(0.7 - h, -0.3, 0.999);
        assert!(((a1 - a0) / (2.0 * h) - jac[0][0]).abs() < 1e-8);
        assert!(((b1 - b0) / (2.0 * h) - jac[1][0]).abs() < 1e-8);
        let ((a1, b1), _) = persistence_pair(0.7, -0.3 + h, 0.999);
        let ((a0, b0), _) = persistence_pair(0.7, -0.3 - h, 0.999);
        assert!(((a1 - a0) / (2.0 * h) - jac[0][1]).abs() < 1e-8);
        assert!(((b1 - b0) / (2.0 * h) - jac[1][1]).abs() < 1e-8);
    }
}

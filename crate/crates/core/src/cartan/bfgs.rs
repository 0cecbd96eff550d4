//! Dense BFGS with a backtracking line search, sized for a few dozen angles.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    pub grad_tol: f64,
    pub max_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(f: F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut fx, g) = f(x.as_slice());
    let mut g = DVector::from_vec(g);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if inf_norm(&g) < opts.grad_tol {
            break;
        }
        iterations += 1;

        let mut d = -(&hinv * &g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            hinv.fill_with_identity();
            fresh = true;
            d = -g.clone();
            slope = g.dot(&d);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &d * alpha;
            let (fnew, gnew) = f(xn.as_slice());
            let gnew = DVector::from_vec(gnew);
            let armijo = fnew <= fx + 1e-4 * alpha * slope;
            // Near the optimum the decrease drops below round-off; a smaller
            // gradient is then the only usable signal.
            let flat = fnew <= fx + 1e-13 * fx.abs().max(1.0) && gnew.norm() < g.norm();
            if armijo || flat {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            alpha *= 0.5;
        }

        let Some((xn, fnew, gnew)) = accepted else {
            if fresh {
                break;
            }
            hinv.fill_with_identity();
            fresh = true;
            continue;
        };

        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > 1e-16 * s.norm() * y.norm() {
            if fresh {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yhy + rho) s s^T
            hinv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        x = xn;
        fx = fnew;
        g = gnew;
    }

    let grad_inf = inf_norm(&g);
    BfgsResult {
        x: x.as_slice().to_vec(),
        value: fx,
        grad_inf,
        iterations,
        converged: grad_inf < opts.grad_tol,
    }
}

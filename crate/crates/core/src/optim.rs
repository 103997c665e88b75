//! BFGS with a strong-Wolfe line search.
//!
//! The objective returns `f64::INFINITY` (or NaN) outside its domain; the
//! line search treats such trial points as overshooting and backtracks.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, norm2, norm_inf, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Convergence tolerance on the sup-norm of the gradient.
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Armijo constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-6,
            max_iter: 500,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfgsStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
    NonFiniteStart,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: BfgsStatus,
}

impl BfgsOutcome {
    pub fn converged(&self) -> bool {
        self.status == BfgsStatus::Converged
    }

    pub fn grad_norm(&self) -> f64 {
        norm_inf(&self.grad)
    }
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x, g);
        if v.is_finite() && g.iter().all(|d| d.is_finite()) {
            v
        } else {
            f64::INFINITY
        }
    }
}

/// Minimizes `f`, which writes the gradient into its second argument and
/// returns the value.
pub fn minimize<F>(f: F, x0: &[f64], opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut obj = Counted { f, evaluations: 0 };
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = obj.eval(&x, &mut g);
    if !fx.is_finite() {
        return BfgsOutcome {
            x,
            f: fx,
            grad: g,
            iterations: 0,
            evaluations: obj.evaluations,
            status: BfgsStatus::NonFiniteStart,
        };
    }
    let mut h_inv = Matrix::identity(n);
    let mut fresh = true;
    let mut status = BfgsStatus::MaxIterations;
    let mut iterations = 0;
    let mut g_new = vec![0.0; n];

    while iterations < opts.max_iter {
        if norm_inf(&g) <= opts.tol_grad {
            status = BfgsStatus::Converged;
            break;
        }
        iterations += 1;
        let mut d: Vec<f64> = h_inv.mul_vec(&g).iter().map(|v| -v).collect();
        if dot(&d, &g) >= 0.0 {
            h_inv = Matrix::identity(n);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if fresh { (1.0 / norm2(&g)).min(1.0) } else { 1.0 };
        let step = line_search(&mut obj, &x, fx, &g, &d, alpha0, opts, &mut g_new);
        let Some((alpha, f_new)) = step else {
            if fresh {
                status = BfgsStatus::LineSearchFailed;
                break;
            }
            h_inv = Matrix::identity(n);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = d.iter().map(|di| alpha * di).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        fx = f_new;
        g.copy_from_slice(&g_new);

        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            if fresh {
                h_inv = Matrix::identity(n).scale(sy / dot(&y, &y));
            }
            let rho = 1.0 / sy;
            let hy = h_inv.mul_vec(&y);
            let yhy = dot(&y, &hy);
            // H ← H - ρ(H y s' + s y' H) + (ρ² y'Hy + ρ) s s'
            h_inv.add_outer(-rho, &hy, &s);
            h_inv.add_outer(-rho, &s, &hy);
            h_inv.add_outer(rho * rho * yhy + rho, &s, &s);
            h_inv.symmetrize();
            fresh = false;
        }
    }
    if status == BfgsStatus::MaxIterations && norm_inf(&g) <= opts.tol_grad {
        status = BfgsStatus::Converged;
    }
    BfgsOutcome {
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations: obj.evaluations,
        status,
    }
}

/// Strong-Wolfe line search. On success writes the gradient at the accepted
/// point into `g_out` and returns `(alpha, f)`.
#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    obj: &mut Counted<F>,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    alpha0: f64,
    opts: &BfgsOptions,
    g_out: &mut [f64],
) -> Option<(f64, f64)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let dphi0 = dot(g0, d);
    if dphi0 >= 0.0 {
        return None;
    }
    let mut trial = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut phi = |alpha: f64, trial: &mut Vec<f64>, g: &mut Vec<f64>| -> (f64, f64) {
        for i in 0..n {
            trial[i] = x[i] + alpha * d[i];
        }
        let v = obj.eval(trial, g);
        (v, if v.is_finite() { dot(g, d) } else { f64::NAN })
    };

    let armijo = |alpha: f64, v: f64| v.is_finite() && v <= f0 + opts.c1 * alpha * dphi0;
    let curvature = |dv: f64| dv.abs() <= -opts.c2 * dphi0;

    // Bracketing phase. Endpoints carry (alpha, phi, phi').
    let mut prev = (0.0, f0, dphi0);
    let mut alpha = alpha0;
    let mut bracket = None;
    for i in 0..opts.max_line_search {
        let (v, dv) = phi(alpha, &mut trial, &mut g);
        if !armijo(alpha, v) || (i > 0 && v >= prev.1) {
            bracket = Some((prev, (alpha, v, dv)));
            break;
        }
        if curvature(dv) {
            g_out.copy_from_slice(&g);
            return Some((alpha, v));
        }
        if dv >= 0.0 {
            bracket = Some(((alpha, v, dv), prev));
            break;
        }
        prev = (alpha, v, dv);
        alpha *= 2.0;
        if alpha > 1e10 {
            return None;
        }
    }
    let (mut lo, mut hi) = bracket?;

    // Zoom phase: safeguarded cubic interpolation, bisection when the high
    // end is outside the domain.
    for _ in 0..opts.max_line_search {
        let width = hi.0 - lo.0;
        if width.abs() <= 1e-14 * lo.0.abs().max(1e-14) {
            break;
        }
        let mut a = cubic_minimizer(lo, hi).unwrap_or(lo.0 + 0.5 * width);
        let (g_lo, g_hi) = (lo.0 + 0.1 * width, hi.0 - 0.1 * width);
        let (min_a, max_a) = if g_lo < g_hi { (g_lo, g_hi) } else { (g_hi, g_lo) };
        if !(a >= min_a && a <= max_a) {
            a = lo.0 + 0.5 * width;
        }
        let (v, dv) = phi(a, &mut trial, &mut g);
        if !armijo(a, v) || v >= lo.1 {
            hi = (a, v, dv);
        } else {
            if curvature(dv) {
                g_out.copy_from_slice(&g);
                return Some((a, v));
            }
            if dv * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, v, dv);
        }
    }
    let (a_lo, f_lo) = (lo.0, lo.1);
    // Accept the best sufficient-decrease point found even if the curvature
    // condition was not met.
    if a_lo > 0.0 && f_lo < f0 {
        let (v, _) = phi(a_lo, &mut trial, &mut g);
        g_out.copy_from_slice(&g);
        return Some((a_lo, v));
    }
    None
}

/// Minimizer of the cubic interpolating values and slopes at two points.
fn cubic_minimizer(a: (f64, f64, f64), b: (f64, f64, f64)) -> Option<f64> {
    let (x1, f1, d1) = a;
    let (x2, f2, d2) = b;
    if ![f1, d1, f2, d2].iter().all(|v| v.is_finite()) {
        return None;
    }
    let d_1 = d1 + d2 - 3.0 * (f1 - f2) / (x1 - x2);
    let disc = d_1 * d_1 - d1 * d2;
    if disc < 0.0 {
        return None;
    }
    let d_2 = (x2 - x1).signum() * crate::math::sqrt(disc);
    let denom = d2 - d1 + 2.0 * d_2;
    if denom == 0.0 {
        return None;
    }
    let x = x2 - (x2 - x1) * (d2 + d_2 - d1) / denom;
    x.is_finite().then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(rosenbrock, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(out.converged(), "{:?}", out.status);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn respects_domain_barrier() {
        // f(x) = x - ln x on x > 0, infinite elsewhere; minimum at x = 1.
        let f = |x: &[f64], g: &mut [f64]| {
            if x[0] <= 0.0 {
                return f64::INFINITY;
            }
            g[0] = 1.0 - 1.0 / x[0];
            x[0] - crate::math::ln(x[0])
        };
        let out = minimize(f, &[5.0], &BfgsOptions::default());
        assert!(out.converged());
        assert!((out.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_in_few_iterations() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 20.0 * (x[1] + 1.0);
            (x[0] - 3.0) * (x[0] - 3.0) + 10.0 * (x[1] + 1.0) * (x[1] + 1.0)
        };
        let out = minimize(f, &[0.0, 0.0], &BfgsOptions::default());
        assert!(out.converged());
        assert!(out.iterations < 20);
    }

    #[test]
    fn infinite_start_is_reported() {
        let out = minimize(|_: &[f64], _: &mut [f64]| f64::INFINITY, &[0.0], &BfgsOptions::default());
        assert_eq!(out.status, BfgsStatus::NonFiniteStart);
    }
}

//! Gaussian pseudo-variance quasi-likelihood
//! `l_t(θ) = -½ log ν*_t(γ) - (Y_t - λ_t(ψ))² / (2 ν*_t(γ))`
//! with analytic score, Hessian and outer product of gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::filters::{walk, DerivLevel, FilterFamily};
use crate::linalg::Matrix;
use crate::math;
use crate::restriction::RestrictionSpec;
use crate::series::{ParamVector, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalLevel {
    Value,
    Score,
    Full,
}

/// Averaged quasi-likelihood and its derivatives.
///
/// `hessian` is the *negative* average second derivative. `hessian` and
/// `opg` are only populated at [`EvalLevel::Full`] (empty otherwise), and
/// `score` only from [`EvalLevel::Score`] upwards.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub loglik: f64,
    pub score: Vec<f64>,
    pub hessian: Matrix,
    pub opg: Matrix,
    /// One-based index of the first term in the average.
    pub t0: usize,
    pub n_terms: usize,
    pub clamped: bool,
}

pub fn evaluate(family: FilterFamily, theta: &ParamVector, series: &TimeSeries, level: EvalLevel) -> Result<ObjectiveEval> {
    evaluate_slice(family, &theta.to_vec(), series, level)
}

pub fn evaluate_slice(family: FilterFamily, theta: &[f64], series: &TimeSeries, level: EvalLevel) -> Result<ObjectiveEval> {
    if series.len() < family.min_len() {
        return Err(Error::TooShort {
            len: series.len(),
            min: family.min_len(),
        });
    }
    let m = family.dim();
    let deriv = match level {
        EvalLevel::Value => DerivLevel::None,
        EvalLevel::Score => DerivLevel::Grad,
        EvalLevel::Full => DerivLevel::GradHess,
    };
    let full = level == EvalLevel::Full;
    let mut loglik = 0.0;
    let mut score = vec![0.0; if level == EvalLevel::Value { 0 } else { m }];
    let mut hessian = if full { Matrix::zeros(m, m) } else { Matrix::zeros(0, 0) };
    let mut opg = hessian.clone();
    let mut s_t = vec![0.0; m];
    let mut n_terms = 0usize;

    let summary = walk(family, theta, series, deriv, |step| {
        n_terms += 1;
        let e = step.y - step.lambda;
        let nu = step.nu;
        let e2 = e * e;
        loglik += -0.5 * math::ln(nu) - e2 / (2.0 * nu);
        if level == EvalLevel::Value {
            return;
        }
        let w_mean = e / nu;
        let w_var = (e2 - nu) / (2.0 * nu * nu);
        for i in 0..m {
            s_t[i] = w_mean * step.dlambda[i] + w_var * step.dnu[i];
            score[i] += s_t[i];
        }
        if !full {
            return;
        }
        opg.add_outer(1.0, &s_t, &s_t);
        // Negative second derivative of l_t.
        let c_nn = e2 / (nu * nu * nu) - 0.5 / (nu * nu);
        let c_ln = e / (nu * nu);
        let c_ll = 1.0 / nu;
        hessian.add_outer(c_nn, step.dnu, step.dnu);
        hessian.add_outer(c_ll, step.dlambda, step.dlambda);
        hessian.add_outer(c_ln, step.dlambda, step.dnu);
        hessian.add_outer(c_ln, step.dnu, step.dlambda);
        if !step.linear {
            let c_d2l = -e / nu;
            let c_d2n = 0.5 / nu - e2 / (2.0 * nu * nu);
            let pairs = step.d2lambda.iter().zip(step.d2nu);
            for (h, (d2l, d2n)) in hessian.as_mut_slice().iter_mut().zip(pairs) {
                *h += c_d2l * d2l + c_d2n * d2n;
            }
        }
    })?;

    let n = n_terms as f64;
    loglik /= n;
    score.iter_mut().for_each(|s| *s /= n);
    if full {
        hessian = hessian.scale(1.0 / n);
        opg = opg.scale(1.0 / n);
        hessian.symmetrize();
        opg.symmetrize();
    }
    Ok(ObjectiveEval {
        loglik,
        score,
        hessian,
        opg,
        t0: family.first_index() + 1,
        n_terms,
        clamped: summary.clamped,
    })
}

/// Evaluates the objective in reduced coordinates `(ψ, γ₂)` by the chain
/// rule through the restriction map, including the curvature of nonlinear
/// links in the Hessian.
pub fn evaluate_restricted(spec: &RestrictionSpec, reduced: &[f64], series: &TimeSeries, level: EvalLevel) -> Result<ObjectiveEval> {
    let theta = spec.expand(reduced)?;
    let full = evaluate_slice(spec.family(), &theta, series, level)?;
    if spec.is_empty() {
        return Ok(full);
    }
    let jac = spec.jacobian(reduced);
    let jac_t = jac.transpose();
    let score = if level == EvalLevel::Value {
        Vec::new()
    } else {
        jac_t.mul_vec(&full.score)
    };
    let (hessian, opg) = if level == EvalLevel::Full {
        let mut h = jac_t.matmul(&full.hessian).matmul(&jac);
        h.add_scaled(-1.0, &spec.weighted_curvature(&full.score));
        let mut i = jac_t.matmul(&full.opg).matmul(&jac);
        h.symmetrize();
        i.symmetrize();
        (h, i)
    } else {
        (Matrix::zeros(0, 0), Matrix::zeros(0, 0))
    };
    Ok(ObjectiveEval {
        loglik: full.loglik,
        score,
        hessian,
        opg,
        t0: full.t0,
        n_terms: full.n_terms,
        clamped: full.clamped,
    })
}

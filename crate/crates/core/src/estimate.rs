//! PVQMLE fitting (unrestricted and restricted) and the comparison
//! estimators: CLSE, two-stage WLSE, Poisson QMLE and the exact
//! Poisson-INAR(1) maximum likelihood estimator.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{walk, DerivLevel, FilterFamily};
use crate::linalg::{norm_inf, Matrix};
use crate::math;
use crate::objective::{evaluate_restricted, EvalLevel};
use crate::optim::{minimize, BfgsOptions, BfgsOutcome};
use crate::restriction::RestrictionSpec;
use crate::series::{ParamVector, SampleSpace, TimeSeries};
use crate::transform::{Bound, Transform, INAR_A_MAX, POSITIVE_FLOOR};
use crate::NU_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTag {
    Pvqmle,
    PvqmleR,
    PoissonQmle,
    Clse,
    Wlse,
    WlseUnfeasible,
    MlePoissonInar1,
}

impl EstimatorTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pvqmle => "pvqmle",
            Self::PvqmleR => "pvqmle_r",
            Self::PoissonQmle => "poisson_qmle",
            Self::Clse => "clse",
            Self::Wlse => "wlse",
            Self::WlseUnfeasible => "wlse_unfeasible",
            Self::MlePoissonInar1 => "mle_poisson_inar1",
        }
    }
}

impl core::fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub bfgs: BfgsOptions,
    /// Jittered restarts tried after a failed first run.
    pub restarts: usize,
    /// Relative size of the multiplicative jitter on restart values.
    pub jitter: f64,
    /// Seed of the jitter generator.
    pub seed: u64,
    /// Upper bound of the free INAR variance slopes `b_h`;
    /// `f64::INFINITY` removes it.
    pub b_max: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bfgs: BfgsOptions::default(),
            restarts: 5,
            jitter: 0.1,
            seed: 0,
            b_max: INAR_A_MAX,
        }
    }
}

/// Weights of the two-stage weighted least squares estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum WlseWeights {
    /// `ω̂_LS + Σ_h â_h(1 - â_h) Y_{t-h}` from a first-stage CLSE fit.
    EstimatedBinomial,
    /// A known variance path, aligned with the series (unfeasible WLSE).
    TrueVariance(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub tag: EstimatorTag,
    pub family: FilterFamily,
    pub restriction: RestrictionSpec,
    /// Estimated coordinates: the full `θ̂` for PVQMLE fits, `ψ̂` for
    /// mean-only estimators.
    pub estimates: Vec<f64>,
    pub names: Vec<String>,
    /// Full `θ̂` with restrictions substituted back (PVQMLE fits only).
    pub theta_hat: Option<ParamVector>,
    /// Reduced `(ψ̂, γ̂₂)` of a restricted fit; equals `θ̂` when unrestricted.
    pub reduced_hat: Vec<f64>,
    /// Value of the averaged criterion the estimator maximizes.
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the gradient in optimizer coordinates (0 for closed forms).
    pub grad_norm: f64,
    pub clamped: bool,
    pub n_terms: usize,
    /// Restarts used beyond the first run.
    pub restarts: usize,
}

impl FitResult {
    /// Mean-parameter estimate `ψ̂`.
    pub fn psi(&self) -> &[f64] {
        &self.estimates[..self.family.p()]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.estimates[i])
    }
}

fn check_series(family: FilterFamily, series: &TimeSeries) -> Result<()> {
    if series.len() < family.min_len() {
        return Err(Error::TooShort {
            len: series.len(),
            min: family.min_len(),
        });
    }
    if !family.compatible_with(series.space()) {
        return Err(Error::InvalidSpec(alloc::format!(
            "family {} is not defined on {:?} data",
            family.name(),
            series.space()
        )));
    }
    Ok(())
}

fn jittered<R: Rng>(start: &[f64], transform: &Transform, jitter: f64, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = start
        .iter()
        .map(|&x| x * (1.0 + jitter * (2.0 * rng.random::<f64>() - 1.0)))
        .collect();
    transform.clamp_interior(&raw)
}

/// Runs BFGS in transformed coordinates from `start` and, when that fails,
/// from up to `opts.restarts` jittered copies of it. Returns the first
/// converged run or else the best one, plus the number of restarts used.
fn optimize<F>(mut neg_obj: F, start: &[f64], transform: &Transform, opts: &FitOptions) -> Result<(BfgsOutcome, usize)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<BfgsOutcome> = None;
    let mut used = 0;
    for attempt in 0..=opts.restarts {
        let x0 = if attempt == 0 {
            transform.clamp_interior(start)
        } else {
            jittered(start, transform, opts.jitter, &mut rng)
        };
        let u0 = transform.to_internal(&x0)?;
        let out = minimize(
            |u: &[f64], g: &mut [f64]| {
                let x = transform.to_external(u);
                let v = neg_obj(&x, g);
                for ((gi, b), &ui) in g.iter_mut().zip(transform.bounds()).zip(u) {
                    *gi *= b.derivative(ui);
                }
                v
            },
            &u0,
            &opts.bfgs,
        );
        used = attempt;
        let converged = out.converged();
        if best.as_ref().is_none_or(|b| out.f < b.f || (converged && !b.converged())) {
            best = Some(out);
        }
        if converged {
            break;
        }
    }
    Ok((best.expect("at least one run"), used))
}

/// Moves a full `θ` strictly inside the admissible set of the family.
fn admissible_start(family: FilterFamily, theta: &[f64]) -> Vec<f64> {
    let mut x = Transform::for_family(family).clamp_interior(theta);
    match family {
        FilterFamily::InarLinear { lags } => {
            let total: f64 = x[1..=lags].iter().sum();
            if total >= 0.95 {
                x[1..=lags].iter_mut().for_each(|a| *a *= 0.95 / total);
            }
        }
        FilterFamily::BetaVar => {
            for block in [0usize, 3] {
                let total: f64 = x[block..block + 3].iter().sum();
                if total >= 0.99 {
                    x[block..block + 3].iter_mut().for_each(|v| *v *= 0.98 / total);
                }
            }
        }
        FilterFamily::IngarchLinear => {}
    }
    x
}

/// Default starting `θ`: CLSE mean parameters and a moment regression of
/// squared CLSE residuals for INAR; a persistent GARCH-type guess otherwise.
pub fn default_start(family: FilterFamily, series: &TimeSeries) -> Result<Vec<f64>> {
    check_series(family, series)?;
    let mean = series.mean();
    let var = series.variance().max(1e-6);
    let theta = match family {
        FilterFamily::InarLinear { lags } => {
            let y = series.values();
            let first = family.first_index();
            let psi = match clse_coefficients(lags, y, None) {
                Ok(beta) => {
                    let mut psi = beta;
                    psi[0] = psi[0].max(0.1 * mean).max(1e-3);
                    psi[1..].iter_mut().for_each(|a| *a = a.clamp(0.01, 0.95));
                    psi
                }
                Err(_) => {
                    let mut psi = vec![0.5 * mean.max(1e-3)];
                    psi.extend(core::iter::repeat_n(0.5 / lags as f64, lags));
                    psi
                }
            };
            let sq: Vec<f64> = (first..y.len())
                .map(|t| {
                    let fit = psi[0] + (1..=lags).map(|h| psi[h] * y[t - h]).sum::<f64>();
                    (y[t] - fit) * (y[t] - fit)
                })
                .collect();
            let mut gamma = regress_on_lags(lags, y, &sq).unwrap_or_else(|_| {
                let mut g = vec![var];
                g.extend(core::iter::repeat_n(0.0, lags));
                g
            });
            gamma[0] = gamma[0].max(0.05 * var).max(1e-3);
            gamma[1..].iter_mut().for_each(|b| *b = b.max(0.01));
            let mut theta = psi;
            theta.extend(gamma);
            theta
        }
        FilterFamily::IngarchLinear => {
            let omega2 = (0.2 * var - 0.1 * mean).max(0.05 * var);
            vec![0.1 * mean.max(1e-3), 0.1, 0.8, omega2, 0.1, 0.8]
        }
        FilterFamily::BetaVar => {
            let phi = (mean * (1.0 - mean) / var - 1.0).max(1.0);
            let omega = 0.1 * mean;
            vec![omega, 0.1, 0.8, omega, 0.1, 0.8, phi]
        }
    };
    Ok(admissible_start(family, &theta))
}

/// Maximizes the pseudo-variance quasi-likelihood, optionally subject to a
/// restriction, by BFGS with jittered restarts.
///
/// Non-convergence is reported through [`FitResult::converged`].
pub fn fit_pvqmle(
    family: FilterFamily,
    series: &TimeSeries,
    restriction: Option<&RestrictionSpec>,
    start: Option<&ParamVector>,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_series(family, series)?;
    let spec = match restriction {
        Some(r) if r.family() != family => {
            return Err(Error::FamilyMismatch {
                restriction: r.name(),
                family: family.name(),
            })
        }
        Some(r) => r.clone(),
        None => RestrictionSpec::none(family),
    };
    let start_theta = match start {
        Some(s) => {
            let v = s.to_vec();
            family.validate_params(&v)?;
            v
        }
        None => default_start(family, series)?,
    };
    let start_theta = Transform::with_b_max(family, opts.b_max).clamp_interior(&start_theta);
    let transform = Transform::for_restriction(&spec, opts.b_max);
    let reduced_start = spec.reduce(&start_theta)?;

    let (out, restarts) = optimize(
        |x: &[f64], g: &mut [f64]| match evaluate_restricted(&spec, x, series, EvalLevel::Score) {
            Ok(e) if e.loglik.is_finite() => {
                for (gi, s) in g.iter_mut().zip(&e.score) {
                    *gi = -s;
                }
                -e.loglik
            }
            _ => f64::INFINITY,
        },
        &reduced_start,
        &transform,
        opts,
    )?;

    let reduced = transform.to_external(&out.x);
    let theta = spec.expand(&reduced)?;
    let eval = evaluate_restricted(&spec, &reduced, series, EvalLevel::Value)?;
    let theta_hat = family.params(&theta)?;
    Ok(FitResult {
        tag: if spec.is_empty() { EstimatorTag::Pvqmle } else { EstimatorTag::PvqmleR },
        family,
        restriction: spec,
        names: theta_hat.names.clone(),
        estimates: theta,
        theta_hat: Some(theta_hat),
        reduced_hat: reduced,
        loglik: eval.loglik,
        converged: out.converged(),
        iterations: out.iterations,
        grad_norm: out.grad_norm(),
        clamped: eval.clamped,
        n_terms: eval.n_terms,
        restarts,
    })
}

/// Regression of `target[t]` (aligned with `y`, entries before the first
/// usable index ignored) on `(1, Y_{t-1}, ..., Y_{t-lags})`, optionally
/// weighted by `1 / w_t`.
fn weighted_lag_regression(lags: usize, y: &[f64], target: &[f64], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let d = lags + 1;
    let mut xtx = Matrix::zeros(d, d);
    let mut xty = vec![0.0; d];
    let mut row = vec![0.0; d];
    for t in lags..y.len() {
        row[0] = 1.0;
        for h in 1..=lags {
            row[h] = y[t - h];
        }
        let w = weights.map_or(1.0, |w| 1.0 / w[t].max(NU_FLOOR));
        xtx.add_outer(w, &row, &row);
        for (acc, r) in xty.iter_mut().zip(&row) {
            *acc += w * r * target[t];
        }
    }
    xtx.solve_spd(&xty).ok_or(Error::SingularDesign)
}

fn clse_coefficients(lags: usize, y: &[f64], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    weighted_lag_regression(lags, y, y, weights)
}

fn regress_on_lags(lags: usize, y: &[f64], sq_from_first: &[f64]) -> Result<Vec<f64>> {
    let mut target = vec![0.0; lags];
    target.extend_from_slice(sq_from_first);
    weighted_lag_regression(lags, y, &target, None)
}

fn least_squares_result(
    tag: EstimatorTag,
    family: FilterFamily,
    series: &TimeSeries,
    psi: Vec<f64>,
    weights: Option<&[f64]>,
) -> FitResult {
    let FilterFamily::InarLinear { lags } = family else {
        unreachable!("least squares is only defined for INAR families")
    };
    let y = series.values();
    let n_terms = y.len() - lags;
    let criterion = (lags..y.len())
        .map(|t| {
            let e = y[t] - psi[0] - (1..=lags).map(|h| psi[h] * y[t - h]).sum::<f64>();
            e * e / weights.map_or(1.0, |w| w[t].max(NU_FLOOR))
        })
        .sum::<f64>()
        / n_terms as f64;
    FitResult {
        tag,
        family,
        restriction: RestrictionSpec::none(family),
        names: family.coordinate_names()[..family.p()].to_vec(),
        reduced_hat: psi.clone(),
        estimates: psi,
        theta_hat: None,
        loglik: -0.5 * criterion,
        converged: true,
        iterations: 0,
        grad_norm: 0.0,
        clamped: false,
        n_terms,
        restarts: 0,
    }
}

fn require_inar(family: FilterFamily, what: &str) -> Result<usize> {
    match family {
        FilterFamily::InarLinear { lags } => Ok(lags),
        other => Err(Error::InvalidSpec(alloc::format!(
            "{what} needs an INAR family, got {}",
            other.name()
        ))),
    }
}

/// Conditional least squares: regression of `Y_t` on an intercept and its lags.
pub fn fit_clse(family: FilterFamily, series: &TimeSeries) -> Result<FitResult> {
    let lags = require_inar(family, "CLSE")?;
    check_series(family, series)?;
    let psi = clse_coefficients(lags, series.values(), None)?;
    Ok(least_squares_result(EstimatorTag::Clse, family, series, psi, None))
}

/// Two-stage weighted least squares.
pub fn fit_wlse(family: FilterFamily, series: &TimeSeries, weights: &WlseWeights) -> Result<FitResult> {
    let lags = require_inar(family, "WLSE")?;
    check_series(family, series)?;
    let y = series.values();
    let (tag, w) = match weights {
        WlseWeights::EstimatedBinomial => {
            let first = clse_coefficients(lags, y, None)?;
            let w: Vec<f64> = (0..y.len())
                .map(|t| {
                    if t < lags {
                        return 1.0;
                    }
                    let v = first[0] + (1..=lags).map(|h| first[h] * (1.0 - first[h]) * y[t - h]).sum::<f64>();
                    v.max(NU_FLOOR)
                })
                .collect();
            (EstimatorTag::Wlse, w)
        }
        WlseWeights::TrueVariance(path) => {
            if path.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: y.len(),
                    found: path.len(),
                });
            }
            (EstimatorTag::WlseUnfeasible, path.iter().map(|v| v.max(NU_FLOOR)).collect())
        }
    };
    let psi = clse_coefficients(lags, y, Some(&w))?;
    Ok(least_squares_result(tag, family, series, psi, Some(&w)))
}

/// Averaged Poisson quasi-likelihood `Σ (Y_t log λ_t - λ_t) / n` and its
/// gradient in `ψ`.
pub fn poisson_qmle_objective(family: FilterFamily, psi: &[f64], series: &TimeSeries) -> Result<(f64, Vec<f64>)> {
    let p = family.p();
    if psi.len() != p {
        return Err(Error::DimensionMismatch { expected: p, found: psi.len() });
    }
    let mut theta = psi.to_vec();
    // The variance block is irrelevant here; any admissible value works.
    theta.push(1.0);
    theta.extend(core::iter::repeat_n(0.0, family.k() - 1));
    let mut value = 0.0;
    let mut grad = vec![0.0; p];
    let mut n = 0usize;
    let mut bad = false;
    walk(family, &theta, series, DerivLevel::Grad, |s| {
        n += 1;
        if !(s.lambda > 0.0) {
            bad = true;
            return;
        }
        value += s.y * math::ln(s.lambda) - s.lambda;
        let c = s.y / s.lambda - 1.0;
        for (g, d) in grad.iter_mut().zip(&s.dlambda[..p]) {
            *g += c * d;
        }
    })?;
    if bad {
        return Ok((f64::NEG_INFINITY, grad));
    }
    let n = n as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((value / n, grad))
}

/// Poisson quasi-maximum likelihood for the conditional mean.
pub fn fit_poisson_qmle(family: FilterFamily, series: &TimeSeries, opts: &FitOptions) -> Result<FitResult> {
    if family == FilterFamily::BetaVar {
        return Err(Error::InvalidSpec("Poisson QMLE needs a count family".into()));
    }
    check_series(family, series)?;
    let p = family.p();
    let start = default_start(family, series)?;
    let transform = Transform::for_family(family).truncate(p);
    let (out, restarts) = optimize(
        |x: &[f64], g: &mut [f64]| match poisson_qmle_objective(family, x, series) {
            Ok((v, grad)) if v.is_finite() => {
                for (gi, s) in g.iter_mut().zip(&grad) {
                    *gi = -s;
                }
                -v
            }
            _ => f64::INFINITY,
        },
        &start[..p],
        &transform,
        opts,
    )?;
    let psi = transform.to_external(&out.x);
    let (value, _) = poisson_qmle_objective(family, &psi, series)?;
    Ok(FitResult {
        tag: EstimatorTag::PoissonQmle,
        family,
        restriction: RestrictionSpec::none(family),
        names: family.coordinate_names()[..p].to_vec(),
        reduced_hat: psi.clone(),
        estimates: psi,
        theta_hat: None,
        loglik: value,
        converged: out.converged(),
        iterations: out.iterations,
        grad_norm: out.grad_norm(),
        clamped: false,
        n_terms: series.len() - family.first_index(),
        restarts,
    })
}

/// Log of the Poisson-INAR(1) transition pmf `P(Y_t = y | Y_{t-1} = x)`:
/// binomial thinning of `x` with survival `a` plus a Poisson(ω) innovation.
pub fn transition_log_pmf(y: u64, x: u64, a: f64, omega: f64) -> f64 {
    let (la, l1a, lw) = (math::ln(a), math::ln_1p(-a), math::ln(omega));
    let terms: Vec<f64> = (0..=y.min(x))
        .map(|k| log_term(k, y, x, la, l1a, lw, omega))
        .collect();
    math::log_sum_exp(&terms)
}

pub fn transition_pmf(y: u64, x: u64, a: f64, omega: f64) -> f64 {
    math::exp(transition_log_pmf(y, x, a, omega))
}

fn log_term(k: u64, y: u64, x: u64, la: f64, l1a: f64, lw: f64, omega: f64) -> f64 {
    let choose = math::ln_factorial(x) - math::ln_factorial(k) - math::ln_factorial(x - k);
    let binom = choose + k as f64 * la + if x > k { (x - k) as f64 * l1a } else { 0.0 };
    let pois = -omega + if y > k { (y - k) as f64 * lw } else { 0.0 } - math::ln_factorial(y - k);
    binom + pois
}

/// Log transition probability of one step and its gradient in `(ω, a)`.
pub(crate) fn mle_step(y: u64, x: u64, omega: f64, a: f64, terms: &mut Vec<f64>) -> (f64, [f64; 2]) {
    let (la, l1a, lw) = (math::ln(a), math::ln_1p(-a), math::ln(omega));
    terms.clear();
    terms.extend((0..=y.min(x)).map(|k| log_term(k, y, x, la, l1a, lw, omega)));
    let lse = math::log_sum_exp(terms);
    let mut grad = [0.0; 2];
    // Posterior weights of the number of survivors k.
    for (k, lt) in terms.iter().enumerate() {
        let w = math::exp(lt - lse);
        let k = k as f64;
        grad[0] += w * ((y as f64 - k) / omega - 1.0);
        grad[1] += w * (k / a - (x as f64 - k) / (1.0 - a));
    }
    (lse, grad)
}

/// Averaged exact conditional log-likelihood of a Poisson-INAR(1) with its
/// gradient in `(ω, a)`.
pub fn mle_objective(omega: f64, a: f64, series: &TimeSeries) -> (f64, [f64; 2]) {
    let y = series.values();
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    let mut terms = Vec::new();
    for t in 1..y.len() {
        let (v, g) = mle_step(y[t] as u64, y[t - 1] as u64, omega, a, &mut terms);
        value += v;
        grad[0] += g[0];
        grad[1] += g[1];
    }
    let n = (y.len() - 1) as f64;
    (value / n, [grad[0] / n, grad[1] / n])
}

/// Exact conditional maximum likelihood for the Poisson-INAR(1) model.
pub fn fit_mle_poisson_inar1(series: &TimeSeries, opts: &FitOptions) -> Result<FitResult> {
    let family = FilterFamily::INAR1;
    if series.space() != SampleSpace::Counts {
        return Err(Error::InvalidSpec("the Poisson-INAR(1) likelihood needs count data".into()));
    }
    check_series(family, series)?;
    let start = default_start(family, series)?;
    let transform = Transform::new(vec![
        Bound::Positive { lower: POSITIVE_FLOOR },
        Bound::Interval { lower: 0.0, upper: INAR_A_MAX },
    ]);
    let (out, restarts) = optimize(
        |x: &[f64], g: &mut [f64]| {
            let (v, grad) = mle_objective(x[0], x[1], series);
            g[0] = -grad[0];
            g[1] = -grad[1];
            -v
        },
        &start[..2],
        &transform,
        opts,
    )?;
    let psi = transform.to_external(&out.x);
    let (value, _) = mle_objective(psi[0], psi[1], series);
    Ok(FitResult {
        tag: EstimatorTag::MlePoissonInar1,
        family,
        restriction: RestrictionSpec::none(family),
        names: vec!["omega1".to_string(), "a".to_string()],
        reduced_hat: psi.clone(),
        estimates: psi,
        theta_hat: None,
        loglik: value,
        converged: out.converged(),
        iterations: out.iterations,
        grad_norm: norm_inf(&out.grad),
        clamped: false,
        n_terms: series.len() - 1,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate, DgpSpec, ThinningSpec};
    use crate::restriction::RestrictionKind;

    fn inar_series(a: f64, omega: f64, t: usize, seed: u64) -> TimeSeries {
        simulate(&DgpSpec::inar1(ThinningSpec::Binomial { a }, omega), t, seed).unwrap()
    }

    #[test]
    fn transition_pmf_edge_cases() {
        let omega: f64 = 1.7;
        assert!((transition_pmf(0, 0, 0.4, omega) - math::exp(-omega)).abs() < 1e-15);
        for y in 0..20u64 {
            let poisson = math::exp(-omega + y as f64 * math::ln(omega) - math::ln_factorial(y));
            assert!((transition_pmf(y, 0, 0.4, omega) - poisson).abs() < 1e-14);
        }
    }

    #[test]
    fn mle_gradient_matches_differences() {
        let s = inar_series(0.6, 2.0, 300, 4);
        let (omega, a) = (1.8, 0.55);
        let (_, g) = mle_objective(omega, a, &s);
        let h = 1e-6;
        let fd_w = (mle_objective(omega + h, a, &s).0 - mle_objective(omega - h, a, &s).0) / (2.0 * h);
        let fd_a = (mle_objective(omega, a + h, &s).0 - mle_objective(omega, a - h, &s).0) / (2.0 * h);
        assert!((g[0] - fd_w).abs() < 1e-6 * fd_w.abs().max(1.0));
        assert!((g[1] - fd_a).abs() < 1e-6 * fd_a.abs().max(1.0));
    }

    #[test]
    fn clse_rejects_constant_series() {
        let s = TimeSeries::from_counts(&[2; 30]).unwrap();
        assert_eq!(fit_clse(FilterFamily::INAR1, &s).unwrap_err(), Error::SingularDesign);
    }

    #[test]
    fn unit_weights_reduce_to_clse() {
        let s = inar_series(0.5, 2.0, 200, 1);
        let clse = fit_clse(FilterFamily::INAR1, &s).unwrap();
        let wlse = fit_wlse(FilterFamily::INAR1, &s, &WlseWeights::TrueVariance(vec![1.0; s.len()])).unwrap();
        for (a, b) in clse.estimates.iter().zip(&wlse.estimates) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(wlse.tag, EstimatorTag::WlseUnfeasible);
    }

    #[test]
    fn poisson_qmle_constant_mean_first_order_condition() {
        let s = inar_series(0.3, 2.0, 200, 2);
        // With a = 0 the score in ω is mean(Y/ω - 1), which vanishes at ω = ȳ
        // over the usable sample.
        let y = &s.values()[1..];
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        let (_, g) = poisson_qmle_objective(FilterFamily::INAR1, &[ybar, 0.0], &s).unwrap();
        assert!(g[0].abs() < 1e-12);
    }

    #[test]
    fn poisson_qmle_converges() {
        let s = inar_series(0.5, 2.0, 1000, 3);
        let fit = fit_poisson_qmle(FilterFamily::INAR1, &s, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.grad_norm <= 1e-6);
        assert!((fit.psi()[1] - 0.5).abs() < 0.1);
    }

    #[test]
    fn pvqmle_fits_are_deterministic_and_converge() {
        let s = inar_series(0.85, 3.0, 2000, 5);
        let opts = FitOptions::default();
        let a = fit_pvqmle(FilterFamily::INAR1, &s, None, None, &opts).unwrap();
        let b = fit_pvqmle(FilterFamily::INAR1, &s, None, None, &opts).unwrap();
        assert!(a.converged);
        assert_eq!(a.estimates, b.estimates);
        assert!((a.psi()[1] - 0.85).abs() < 0.05);

        let spec = RestrictionSpec::new(
            FilterFamily::INAR1,
            &[RestrictionKind::BinomialThinning, RestrictionKind::EquidispersedError],
        )
        .unwrap();
        let r = fit_pvqmle(FilterFamily::INAR1, &s, Some(&spec), None, &opts).unwrap();
        assert!(r.converged);
        assert_eq!(r.tag, EstimatorTag::PvqmleR);
        assert_eq!(r.reduced_hat.len(), 2);
        let theta = r.theta_hat.as_ref().unwrap();
        let a_hat = theta.psi[1];
        assert!((theta.gamma[1] - a_hat * (1.0 - a_hat)).abs() < 1e-15);
        assert_eq!(theta.gamma[0], theta.psi[0]);
    }

    #[test]
    fn restriction_family_mismatch() {
        let s = inar_series(0.5, 2.0, 100, 6);
        let spec = RestrictionSpec::new(FilterFamily::IngarchLinear, &[RestrictionKind::FullEqual]).unwrap();
        let err = fit_pvqmle(FilterFamily::INAR1, &s, Some(&spec), None, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::FamilyMismatch { .. }));
    }

    #[test]
    fn default_starts_are_admissible() {
        let s = inar_series(0.5, 2.0, 300, 7);
        for family in [FilterFamily::INAR1, FilterFamily::InarLinear { lags: 2 }, FilterFamily::IngarchLinear] {
            let x = default_start(family, &s).unwrap();
            family.validate_params(&x).unwrap();
        }
        let b = simulate(&DgpSpec::beta_ar(0.05, 0.2, 0.7, 20.0), 300, 8).unwrap();
        let x = default_start(FilterFamily::BetaVar, &b).unwrap();
        FilterFamily::BetaVar.validate_params(&x).unwrap();
    }
}

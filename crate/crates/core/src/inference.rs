//! Sandwich covariances, standard errors, the Wald restriction test and the
//! asymptotic variance-ratio study.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dgp::{simulate, DgpSpec, ThinningSpec};
use crate::error::{Error, Result};
use crate::estimate::{mle_step, EstimatorTag, FitResult, WlseWeights};
use crate::filters::{walk, DerivLevel, FilterFamily};
use crate::linalg::{dot, sym_inverse, Matrix};
use crate::math;
use crate::objective::{evaluate_restricted, evaluate_slice, EvalLevel, ObjectiveEval};
use crate::restriction::{RestrictionKind, RestrictionSpec};
use crate::series::TimeSeries;
use crate::NU_FLOOR;

/// Eigenvalues of `Ĥ` below this fraction of the largest are dropped.
pub const PSEUDO_INVERSE_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CovarianceResult {
    /// Asymptotic covariance `Ĥ⁻¹ Î Ĥ⁻¹` of `√n (θ̂ - θ₀)`.
    pub sigma: Matrix,
    /// `sqrt(diag(Σ̂) / n_terms)`.
    pub se: Vec<f64>,
    pub names: Vec<String>,
    pub n_terms: usize,
    pub condition_number: f64,
    /// Set when `Ĥ` was rank deficient and a pseudo-inverse was used.
    pub pseudo_inverse: bool,
    /// Set when `Ĥ` had a clearly negative eigenvalue.
    pub indefinite: bool,
}

impl CovarianceResult {
    /// True when the Hessian was not safely positive definite.
    pub fn degenerate(&self) -> bool {
        self.pseudo_inverse || self.indefinite
    }

    pub fn se_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.se[i])
    }
}

/// Sandwich `H⁻¹ I H⁻¹` with standard errors scaled by `1/√n_terms`.
pub fn sandwich_matrices(hessian: &Matrix, opg: &Matrix, n_terms: usize) -> CovarianceResult {
    let inv = sym_inverse(hessian, PSEUDO_INVERSE_CUTOFF);
    let mut sigma = inv.inverse.matmul(opg).matmul(&inv.inverse);
    sigma.symmetrize();
    let se = sigma
        .diagonal()
        .iter()
        .map(|v| math::sqrt(v.max(0.0) / n_terms as f64))
        .collect();
    CovarianceResult {
        sigma,
        se,
        names: Vec::new(),
        n_terms,
        condition_number: inv.condition_number,
        pseudo_inverse: inv.pseudo,
        indefinite: inv.indefinite,
    }
}

/// Sandwich covariance from a full-level objective evaluation.
pub fn sandwich(eval: &ObjectiveEval) -> CovarianceResult {
    sandwich_matrices(&eval.hessian, &eval.opg, eval.n_terms)
}

/// Covariance of the ψ-block of a restricted PVQMLE assembled from the
/// partitions of `D = H_R⁻¹` and `I_R` in reduced coordinates `(ψ, γ₂)`:
/// `D_ψ I_ψ D_ψ + D_ψγ₂ I_γ₂ψ D_ψ + D_ψ I_ψγ₂ D_γ₂ψ + D_ψγ₂ I_γ₂ D_γ₂ψ`,
/// with `H_R` and `I_R` built from the full-coordinate matrices in `full`
/// (evaluated at the expanded restricted estimate).
pub fn restricted_psi_covariance(spec: &RestrictionSpec, reduced: &[f64], full: &ObjectiveEval) -> Matrix {
    let jac = spec.jacobian(reduced);
    let jac_t = jac.transpose();
    let mut h_r = jac_t.matmul(&full.hessian).matmul(&jac);
    h_r.add_scaled(-1.0, &spec.weighted_curvature(&full.score));
    h_r.symmetrize();
    let i_r = jac_t.matmul(&full.opg).matmul(&jac);
    let d = sym_inverse(&h_r, PSEUDO_INVERSE_CUTOFF).inverse;

    let p = spec.family().p();
    let m_r = spec.reduced_dim();
    let psi: Vec<usize> = (0..p).collect();
    let g2: Vec<usize> = (p..m_r).collect();
    let d_psi = d.select(&psi, &psi);
    let d_psi_g2 = d.select(&psi, &g2);
    let d_g2_psi = d.select(&g2, &psi);
    let i_psi = i_r.select(&psi, &psi);
    let i_psi_g2 = i_r.select(&psi, &g2);
    let i_g2_psi = i_r.select(&g2, &psi);
    let i_g2 = i_r.select(&g2, &g2);

    let mut out = d_psi.matmul(&i_psi).matmul(&d_psi);
    if !g2.is_empty() {
        out.add_scaled(1.0, &d_psi_g2.matmul(&i_g2_psi).matmul(&d_psi));
        out.add_scaled(1.0, &d_psi.matmul(&i_psi_g2).matmul(&d_g2_psi));
        out.add_scaled(1.0, &d_psi_g2.matmul(&i_g2).matmul(&d_g2_psi));
    }
    out.symmetrize();
    out
}

/// Sandwich covariance of any fitted estimator at its estimate.
pub fn fit_covariance(fit: &FitResult, series: &TimeSeries) -> Result<CovarianceResult> {
    let mut cov = match fit.tag {
        EstimatorTag::Pvqmle | EstimatorTag::PvqmleR => {
            let eval = evaluate_restricted(&fit.restriction, &fit.reduced_hat, series, EvalLevel::Full)?;
            let mut cov = sandwich(&eval);
            cov.names = fit.restriction.reduced_names();
            cov
        }
        EstimatorTag::Clse => least_squares_covariance(fit.family, series, fit.psi(), None)?,
        EstimatorTag::Wlse => {
            let w = estimated_binomial_weights(fit.family, series)?;
            least_squares_covariance(fit.family, series, fit.psi(), Some(&w))?
        }
        EstimatorTag::WlseUnfeasible => {
            return Err(Error::InvalidSpec(
                "the unfeasible WLSE covariance needs its variance path; use wlse_covariance".into(),
            ))
        }
        EstimatorTag::PoissonQmle => poisson_qmle_covariance(fit.family, series, fit.psi())?,
        EstimatorTag::MlePoissonInar1 => mle_covariance(series, fit.psi()[0], fit.psi()[1]),
    };
    if cov.names.is_empty() {
        cov.names = fit.names[..cov.se.len()].to_vec();
    }
    Ok(cov)
}

fn estimated_binomial_weights(family: FilterFamily, series: &TimeSeries) -> Result<Vec<f64>> {
    let FilterFamily::InarLinear { lags } = family else {
        return Err(Error::InvalidSpec("WLSE needs an INAR family".into()));
    };
    let first = crate::estimate::fit_clse(family, series)?;
    let c = first.psi();
    let y = series.values();
    Ok((0..y.len())
        .map(|t| {
            if t < lags {
                return 1.0;
            }
            let v = c[0] + (1..=lags).map(|h| c[h] * (1.0 - c[h]) * y[t - h]).sum::<f64>();
            v.max(NU_FLOOR)
        })
        .collect())
}

/// Sandwich covariance of the (weighted) least squares estimator of `ψ`.
pub fn wlse_covariance(
    family: FilterFamily,
    series: &TimeSeries,
    psi: &[f64],
    weights: &WlseWeights,
) -> Result<CovarianceResult> {
    let w = match weights {
        WlseWeights::EstimatedBinomial => estimated_binomial_weights(family, series)?,
        WlseWeights::TrueVariance(path) => path.clone(),
    };
    least_squares_covariance(family, series, psi, Some(&w))
}

fn least_squares_covariance(
    family: FilterFamily,
    series: &TimeSeries,
    psi: &[f64],
    weights: Option<&[f64]>,
) -> Result<CovarianceResult> {
    let FilterFamily::InarLinear { lags } = family else {
        return Err(Error::InvalidSpec("least squares needs an INAR family".into()));
    };
    let y = series.values();
    let d = lags + 1;
    let mut h = Matrix::zeros(d, d);
    let mut i = Matrix::zeros(d, d);
    let mut x = vec![0.0; d];
    for t in lags..y.len() {
        x[0] = 1.0;
        for k in 1..=lags {
            x[k] = y[t - k];
        }
        let e = y[t] - dot(psi, &x);
        let w = weights.map_or(1.0, |w| 1.0 / w[t].max(NU_FLOOR));
        h.add_outer(w, &x, &x);
        i.add_outer(w * w * e * e, &x, &x);
    }
    let n = y.len() - lags;
    let mut cov = sandwich_matrices(&h.scale(1.0 / n as f64), &i.scale(1.0 / n as f64), n);
    cov.names = family.coordinate_names()[..d].to_vec();
    Ok(cov)
}

fn poisson_qmle_covariance(family: FilterFamily, series: &TimeSeries, psi: &[f64]) -> Result<CovarianceResult> {
    let p = family.p();
    let m = family.dim();
    let mut theta = psi.to_vec();
    theta.push(1.0);
    theta.extend(core::iter::repeat_n(0.0, family.k() - 1));
    let mut h = Matrix::zeros(p, p);
    let mut i = Matrix::zeros(p, p);
    let mut n = 0usize;
    walk(family, &theta, series, DerivLevel::GradHess, |s| {
        n += 1;
        let dl = &s.dlambda[..p];
        let c = s.y / s.lambda - 1.0;
        h.add_outer(s.y / (s.lambda * s.lambda), dl, dl);
        i.add_outer(c * c, dl, dl);
        for a in 0..p {
            for b in 0..p {
                h[(a, b)] -= c * s.d2lambda[a * m + b];
            }
        }
    })?;
    let mut cov = sandwich_matrices(&h.scale(1.0 / n as f64), &i.scale(1.0 / n as f64), n);
    cov.names = family.coordinate_names()[..p].to_vec();
    Ok(cov)
}

/// Sandwich covariance of the Poisson-INAR(1) MLE; the Hessian comes from
/// central differences of the analytic per-step scores.
fn mle_covariance(series: &TimeSeries, omega: f64, a: f64) -> CovarianceResult {
    let y = series.values();
    let n = y.len() - 1;
    let mut terms = Vec::new();
    let mut scores = |omega: f64, a: f64, opg: Option<&mut Matrix>| {
        let mut total = [0.0; 2];
        let mut opg = opg;
        for t in 1..y.len() {
            let (_, g) = mle_step(y[t] as u64, y[t - 1] as u64, omega, a, &mut terms);
            total[0] += g[0];
            total[1] += g[1];
            if let Some(m) = opg.as_deref_mut() {
                m.add_outer(1.0 / n as f64, &g, &g);
            }
        }
        [total[0] / n as f64, total[1] / n as f64]
    };
    let mut opg = Matrix::zeros(2, 2);
    scores(omega, a, Some(&mut opg));
    let mut h = Matrix::zeros(2, 2);
    let steps = [1e-5 * omega.max(1e-3), 1e-5 * a.min(1.0 - a).max(1e-4)];
    for j in 0..2 {
        let mut up = [omega, a];
        let mut down = [omega, a];
        up[j] += steps[j];
        down[j] -= steps[j];
        let gu = scores(up[0], up[1], None);
        let gd = scores(down[0], down[1], None);
        for r in 0..2 {
            h[(r, j)] = -(gu[r] - gd[r]) / (2.0 * steps[j]);
        }
    }
    h.symmetrize();
    let mut cov = sandwich_matrices(&h, &opg, n);
    cov.names = vec!["omega1".into(), "a".into()];
    cov
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub restriction: String,
    /// `r(θ̂) = Sγ̂ - g(ψ̂)`.
    pub r_hat: Vec<f64>,
}

impl WaldResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Wald statistic `n r'(R Σ̂ R')⁻¹ r` at an unrestricted estimate `theta`,
/// with `eval` the full-level objective evaluation at `theta`.
pub fn wald_statistic(theta: &[f64], eval: &ObjectiveEval, restriction: &RestrictionSpec) -> Result<WaldResult> {
    if restriction.is_empty() {
        return Err(Error::InvalidRestriction("nothing to test".into()));
    }
    let family = restriction.family();
    if theta.len() != family.dim() || eval.hessian.rows() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            found: eval.hessian.rows().min(theta.len()),
        });
    }
    let sigma = sandwich(eval).sigma;
    let r_hat = restriction.residual(theta);
    let r_jac = restriction.residual_jacobian(theta);
    let v = r_jac.matmul(&sigma).matmul(&r_jac.transpose());
    let solved = v
        .solve_spd(&r_hat)
        .ok_or_else(|| Error::SingularRestriction(restriction.name()))?;
    let statistic = (eval.n_terms as f64 * dot(&r_hat, &solved)).max(0.0);
    let dof = restriction.r();
    Ok(WaldResult {
        statistic,
        dof,
        p_value: math::chi2_sf(statistic, dof),
        restriction: restriction.name(),
        r_hat,
    })
}

/// Wald test of `restriction` based on an unrestricted PVQMLE fit.
pub fn wald_test(fit: &FitResult, eval: &ObjectiveEval, restriction: &RestrictionSpec) -> Result<WaldResult> {
    if fit.tag != EstimatorTag::Pvqmle {
        return Err(Error::InvalidSpec("the Wald test needs an unrestricted PVQMLE fit".into()));
    }
    if restriction.family() != fit.family {
        return Err(Error::FamilyMismatch {
            restriction: restriction.name(),
            family: fit.family.name(),
        });
    }
    wald_statistic(&fit.estimates, eval, restriction)
}

/// Runs each Wald test at an unrestricted PVQMLE fit.
pub fn wald_tests(fit: &FitResult, series: &TimeSeries, restrictions: &[RestrictionSpec]) -> Result<Vec<WaldResult>> {
    let eval = evaluate_slice(fit.family, &fit.estimates, series, EvalLevel::Full)?;
    restrictions.iter().map(|r| wald_test(fit, &eval, r)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRatio {
    pub a: f64,
    pub omega: f64,
    /// `log10[Var(â) / Var(â_R)]`.
    pub log10_ratio_a: f64,
    /// `log10[Var(ω̂) / Var(ω̂_R)]`.
    pub log10_ratio_omega: f64,
    pub degenerate: bool,
}

/// The restriction `b = a(1 - a)`, `ω₂ = ω₁` of the Poisson-INAR(1) model.
pub fn poisson_inar1_restriction() -> RestrictionSpec {
    RestrictionSpec::new(
        FilterFamily::INAR1,
        &[RestrictionKind::BinomialThinning, RestrictionKind::EquidispersedError],
    )
    .expect("valid restriction for INAR(1)")
}

/// Asymptotic variance ratio of the unrestricted and restricted PVQMLE on
/// one simulated Poisson-INAR(1) path, both sandwiches evaluated at the
/// true parameter.
pub fn variance_ratio_point(a: f64, omega: f64, t_long: usize, seed: u64) -> Result<VarianceRatio> {
    let spec = DgpSpec::inar1(ThinningSpec::Binomial { a }, omega);
    let series = simulate(&spec, t_long, seed)?;
    let theta = spec.true_theta();
    let full = sandwich(&evaluate_slice(FilterFamily::INAR1, &theta, &series, EvalLevel::Full)?);
    let restriction = poisson_inar1_restriction();
    let reduced = [omega, a];
    let restricted = sandwich(&evaluate_restricted(&restriction, &reduced, &series, EvalLevel::Full)?);
    let ratio = |i: usize| math::log10(full.sigma[(i, i)] / restricted.sigma[(i, i)]);
    Ok(VarianceRatio {
        a,
        omega,
        log10_ratio_a: ratio(1),
        log10_ratio_omega: ratio(0),
        degenerate: full.degenerate() || restricted.degenerate(),
    })
}

/// Variance ratios over a grid; point `i` uses seed `seed + i`.
pub fn variance_ratio_grid(grid: &[(f64, f64)], t_long: usize, seed: u64) -> Result<Vec<VarianceRatio>> {
    grid.iter()
        .enumerate()
        .map(|(i, &(a, omega))| variance_ratio_point(a, omega, t_long, seed + i as u64))
        .collect()
}

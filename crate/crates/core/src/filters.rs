//! Conditional-mean and pseudo-variance recursions with exact first and
//! second derivatives accumulated alongside the filter.
//!
//! Parameter layout, `θ = (ψ', γ')'`:
//!
//! | family              | ψ                      | γ                           |
//! |---------------------|------------------------|-----------------------------|
//! | `InarLinear{lags}`  | ω₁, a₁..a_p            | ω₂, b₁..b_p                 |
//! | `IngarchLinear`     | ω₁, α₁, β₁             | ω₂, α₂, β₂                  |
//! | `BetaVar`           | ω₁, α₁, β₁             | ω₂, α₂, β₂, φ               |
//!
//! `InarLinear`: `λ_t = ω₁ + Σ a_h Y_{t-h}`, `ν*_t = ω₂ + Σ b_h Y_{t-h}`.
//! `IngarchLinear`: `λ_t = ω₁ + α₁Y_{t-1} + β₁λ_{t-1}` and `ν*_t = μ_t` with
//! `μ_t = ω₂ + α₂Y_{t-1} + β₂μ_{t-1}`.
//! `BetaVar`: same mean, `ν*_t = μ_t(1-μ_t)/(1+φ)`.
//!
//! Recursive states start at the sample mean of the series.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::series::{ParamVector, SampleSpace, TimeSeries};
use crate::NU_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterFamily {
    InarLinear { lags: usize },
    IngarchLinear,
    BetaVar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivLevel {
    None,
    Grad,
    GradHess,
}

impl FilterFamily {
    pub const INAR1: FilterFamily = FilterFamily::InarLinear { lags: 1 };

    /// Number of mean parameters.
    pub fn p(&self) -> usize {
        match *self {
            FilterFamily::InarLinear { lags } => lags + 1,
            FilterFamily::IngarchLinear | FilterFamily::BetaVar => 3,
        }
    }

    /// Number of pseudo-variance parameters.
    pub fn k(&self) -> usize {
        match *self {
            FilterFamily::InarLinear { lags } => lags + 1,
            FilterFamily::IngarchLinear => 3,
            FilterFamily::BetaVar => 4,
        }
    }

    pub fn dim(&self) -> usize {
        self.p() + self.k()
    }

    /// Zero-based index of the first usable observation (`t₀ - 1`).
    pub fn first_index(&self) -> usize {
        match *self {
            FilterFamily::InarLinear { lags } => lags,
            FilterFamily::IngarchLinear | FilterFamily::BetaVar => 1,
        }
    }

    /// Minimum series length accepted for fitting: `t₀ + 5`.
    pub fn min_len(&self) -> usize {
        self.first_index() + 6
    }

    pub fn name(&self) -> String {
        match *self {
            FilterFamily::InarLinear { lags } => format!("inar({lags})"),
            FilterFamily::IngarchLinear => "ingarch(1,1)".to_string(),
            FilterFamily::BetaVar => "beta(1,1)".to_string(),
        }
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        match *self {
            FilterFamily::InarLinear { lags } => {
                let lag_name = |prefix: &str, h: usize| {
                    if lags == 1 {
                        prefix.to_string()
                    } else {
                        format!("{prefix}{h}")
                    }
                };
                let mut names = vec!["omega1".to_string()];
                names.extend((1..=lags).map(|h| lag_name("a", h)));
                names.push("omega2".to_string());
                names.extend((1..=lags).map(|h| lag_name("b", h)));
                names
            }
            FilterFamily::IngarchLinear => ["omega1", "alpha1", "beta1", "omega2", "alpha2", "beta2"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            FilterFamily::BetaVar => ["omega1", "alpha1", "beta1", "omega2", "alpha2", "beta2", "phi"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    pub fn params(&self, theta: &[f64]) -> Result<ParamVector> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: theta.len(),
            });
        }
        let p = self.p();
        ParamVector::new(theta[..p].to_vec(), theta[p..].to_vec(), self.coordinate_names())
    }

    pub fn compatible_with(&self, space: SampleSpace) -> bool {
        match self {
            FilterFamily::InarLinear { .. } | FilterFamily::IngarchLinear => true,
            FilterFamily::BetaVar => space == SampleSpace::UnitInterval,
        }
    }

    /// Checks that `θ` lies in the admissible set of the family.
    pub fn validate_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Inadmissible("non-finite coordinate".into()));
        }
        let names = self.coordinate_names();
        let bad = |i: usize, why: &str| Err(Error::Inadmissible(format!("{} = {} ({why})", names[i], theta[i])));
        match *self {
            FilterFamily::InarLinear { lags } => {
                let p = lags + 1;
                if theta[0] <= 0.0 {
                    return bad(0, "must be positive");
                }
                if theta[p] <= 0.0 {
                    return bad(p, "must be positive");
                }
                for h in 1..=lags {
                    if theta[h] < 0.0 {
                        return bad(h, "must be non-negative");
                    }
                    if theta[p + h] < 0.0 {
                        return bad(p + h, "must be non-negative");
                    }
                }
            }
            FilterFamily::IngarchLinear | FilterFamily::BetaVar => {
                for block in [0usize, 3] {
                    if theta[block] <= 0.0 {
                        return bad(block, "must be positive");
                    }
                    if theta[block + 1] < 0.0 {
                        return bad(block + 1, "must be non-negative");
                    }
                    if !(0.0..1.0).contains(&theta[block + 2]) {
                        return bad(block + 2, "must lie in [0, 1)");
                    }
                }
                if *self == FilterFamily::BetaVar {
                    if theta[6] <= 0.0 {
                        return bad(6, "must be positive");
                    }
                    for block in [0usize, 3] {
                        if theta[block] + theta[block + 1] + theta[block + 2] >= 1.0 {
                            return bad(block, "ω + α + β must be below 1");
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// One time step of the filter with derivatives w.r.t. the full `θ`.
///
/// `d2lambda` and `d2nu` are row-major `m × m` and are all zero unless the
/// walk was requested at [`DerivLevel::GradHess`].
pub(crate) struct Step<'a> {
    pub t: usize,
    pub y: f64,
    pub lambda: f64,
    pub nu: f64,
    pub dlambda: &'a [f64],
    pub dnu: &'a [f64],
    pub d2lambda: &'a [f64],
    pub d2nu: &'a [f64],
    pub linear: bool,
}

/// State of a linear recursion `x_t = ω + α Y_{t-1} + β x_{t-1}` and its
/// derivatives w.r.t. its own three coefficients.
#[derive(Clone)]
struct Garch11State {
    x: f64,
    dx: [f64; 3],
    d2x: [[f64; 3]; 3],
}

impl Garch11State {
    fn new(x0: f64) -> Self {
        Self {
            x: x0,
            dx: [0.0; 3],
            d2x: [[0.0; 3]; 3],
        }
    }

    fn advance(&mut self, coef: &[f64], y_prev: f64, level: DerivLevel) {
        let (omega, alpha, beta) = (coef[0], coef[1], coef[2]);
        let prev_x = self.x;
        let prev_dx = self.dx;
        self.x = omega + alpha * y_prev + beta * prev_x;
        if level == DerivLevel::None {
            return;
        }
        if level == DerivLevel::GradHess {
            let mut d2 = [[0.0; 3]; 3];
            for (i, row) in d2.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    let mut s = beta * self.d2x[i][j];
                    if i == 2 {
                        s += prev_dx[j];
                    }
                    if j == 2 {
                        s += prev_dx[i];
                    }
                    *v = s;
                }
            }
            self.d2x = d2;
        }
        self.dx = [
            1.0 + beta * prev_dx[0],
            y_prev + beta * prev_dx[1],
            prev_x + beta * prev_dx[2],
        ];
    }
}

pub(crate) struct WalkSummary {
    pub clamped: bool,
}

/// Streams the filter over `t = t₀..T`, calling `visit` at every usable step.
pub(crate) fn walk<F>(
    family: FilterFamily,
    theta: &[f64],
    series: &TimeSeries,
    level: DerivLevel,
    mut visit: F,
) -> Result<WalkSummary>
where
    F: FnMut(&Step<'_>),
{
    family.validate_params(theta)?;
    if !family.compatible_with(series.space()) {
        return Err(Error::InvalidSpec(format!(
            "family {} needs a unit-interval series, got {:?}",
            family.name(),
            series.space()
        )));
    }
    let y = series.values();
    let first = family.first_index();
    if y.len() <= first {
        return Err(Error::TooShort {
            len: y.len(),
            min: first + 1,
        });
    }
    let m = family.dim();
    let p = family.p();
    let mut dl = vec![0.0; m];
    let mut dn = vec![0.0; m];
    let mut d2l = vec![0.0; m * m];
    let mut d2n = vec![0.0; m * m];
    let mut clamped = false;

    match family {
        FilterFamily::InarLinear { lags } => {
            let (psi, gamma) = theta.split_at(p);
            for t in first..y.len() {
                let mut lambda = psi[0];
                let mut nu = gamma[0];
                for h in 1..=lags {
                    lambda += psi[h] * y[t - h];
                    nu += gamma[h] * y[t - h];
                }
                let mut nu_clamped = false;
                if nu < NU_FLOOR {
                    nu = NU_FLOOR;
                    nu_clamped = true;
                    clamped = true;
                }
                if level != DerivLevel::None {
                    dl[0] = 1.0;
                    dn[p] = if nu_clamped { 0.0 } else { 1.0 };
                    for h in 1..=lags {
                        dl[h] = y[t - h];
                        dn[p + h] = if nu_clamped { 0.0 } else { y[t - h] };
                    }
                }
                visit(&Step {
                    t,
                    y: y[t],
                    lambda,
                    nu,
                    dlambda: &dl,
                    dnu: &dn,
                    d2lambda: &d2l,
                    d2nu: &d2n,
                    linear: true,
                });
            }
        }
        FilterFamily::IngarchLinear | FilterFamily::BetaVar => {
            let start = series.mean();
            let mut mean_state = Garch11State::new(start);
            let mut var_state = Garch11State::new(start);
            let mean_coef = &theta[0..3];
            let var_coef = &theta[3..6];
            let phi = if family == FilterFamily::BetaVar { theta[6] } else { 0.0 };
            for t in first..y.len() {
                mean_state.advance(mean_coef, y[t - 1], level);
                var_state.advance(var_coef, y[t - 1], level);
                let lambda = mean_state.x;
                let mu = var_state.x;
                if level != DerivLevel::None {
                    dl[..3].copy_from_slice(&mean_state.dx);
                }
                if level == DerivLevel::GradHess {
                    for i in 0..3 {
                        for j in 0..3 {
                            d2l[i * m + j] = mean_state.d2x[i][j];
                        }
                    }
                }
                let mut nu;
                match family {
                    FilterFamily::IngarchLinear => {
                        nu = mu;
                        if level != DerivLevel::None {
                            dn[3..6].copy_from_slice(&var_state.dx);
                        }
                        if level == DerivLevel::GradHess {
                            for i in 0..3 {
                                for j in 0..3 {
                                    d2n[(3 + i) * m + 3 + j] = var_state.d2x[i][j];
                                }
                            }
                        }
                    }
                    _ => {
                        let c = 1.0 / (1.0 + phi);
                        let g = mu * (1.0 - mu);
                        let slope = (1.0 - 2.0 * mu) * c;
                        nu = g * c;
                        if level != DerivLevel::None {
                            for i in 0..3 {
                                dn[3 + i] = slope * var_state.dx[i];
                            }
                            dn[6] = -g * c * c;
                        }
                        if level == DerivLevel::GradHess {
                            // ∂²ν/∂μ² = -2c, ∂²ν/∂μ∂φ = -(1-2μ)c², ∂²ν/∂φ² = 2g c³.
                            for i in 0..3 {
                                for j in 0..3 {
                                    d2n[(3 + i) * m + 3 + j] = -2.0 * c * var_state.dx[i] * var_state.dx[j]
                                        + slope * var_state.d2x[i][j];
                                }
                                let cross = -(1.0 - 2.0 * mu) * c * c * var_state.dx[i];
                                d2n[(3 + i) * m + 6] = cross;
                                d2n[6 * m + 3 + i] = cross;
                            }
                            d2n[6 * m + 6] = 2.0 * g * c * c * c;
                        }
                    }
                }
                if !(nu >= NU_FLOOR) {
                    nu = NU_FLOOR;
                    clamped = true;
                    dn.iter_mut().for_each(|v| *v = 0.0);
                    d2n.iter_mut().for_each(|v| *v = 0.0);
                }
                visit(&Step {
                    t,
                    y: y[t],
                    lambda,
                    nu,
                    dlambda: &dl,
                    dnu: &dn,
                    d2lambda: &d2l,
                    d2nu: &d2n,
                    linear: false,
                });
            }
        }
    }
    Ok(WalkSummary { clamped })
}

/// Filtered conditional mean and pseudo-variance paths.
///
/// Entries before `valid_from` are `NaN` for the value paths and empty for
/// the derivative paths.
#[derive(Debug, Clone)]
pub struct FilteredPaths {
    pub lambda: Vec<f64>,
    pub nu_star: Vec<f64>,
    /// Zero-based index of the first usable observation.
    pub valid_from: usize,
    pub dlambda: Vec<Vec<f64>>,
    pub dnu: Vec<Vec<f64>>,
    pub d2lambda: Option<Vec<Matrix>>,
    pub d2nu: Option<Vec<Matrix>>,
    /// Set when the pseudo-variance floor was hit somewhere.
    pub clamped: bool,
}

impl FilteredPaths {
    /// Pearson residuals `(Y_t - λ_t) / sqrt(ν*_t)` for the usable range.
    pub fn pearson_residuals(&self, series: &TimeSeries) -> Vec<f64> {
        let y = series.values();
        (self.valid_from..y.len())
            .map(|t| (y[t] - self.lambda[t]) / crate::math::sqrt(self.nu_star[t]))
            .collect()
    }
}

pub fn run_filter(
    family: FilterFamily,
    theta: &ParamVector,
    series: &TimeSeries,
    derivs: DerivLevel,
) -> Result<FilteredPaths> {
    run_filter_slice(family, &theta.to_vec(), series, derivs)
}

pub fn run_filter_slice(
    family: FilterFamily,
    theta: &[f64],
    series: &TimeSeries,
    derivs: DerivLevel,
) -> Result<FilteredPaths> {
    let n = series.len();
    let m = family.dim();
    let first = family.first_index();
    let mut lambda = vec![f64::NAN; n];
    let mut nu_star = vec![f64::NAN; n];
    let mut dlambda = vec![Vec::new(); n];
    let mut dnu = vec![Vec::new(); n];
    let mut d2lambda = (derivs == DerivLevel::GradHess).then(|| vec![Matrix::zeros(0, 0); n]);
    let mut d2nu = (derivs == DerivLevel::GradHess).then(|| vec![Matrix::zeros(0, 0); n]);
    let summary = walk(family, theta, series, derivs, |s| {
        lambda[s.t] = s.lambda;
        nu_star[s.t] = s.nu;
        if derivs != DerivLevel::None {
            dlambda[s.t] = s.dlambda.to_vec();
            dnu[s.t] = s.dnu.to_vec();
        }
        if let (Some(h_l), Some(h_n)) = (d2lambda.as_mut(), d2nu.as_mut()) {
            h_l[s.t] = Matrix::from_row_major(m, m, s.d2lambda.to_vec());
            h_n[s.t] = Matrix::from_row_major(m, m, s.d2nu.to_vec());
        }
    })?;
    Ok(FilteredPaths {
        lambda,
        nu_star,
        valid_from: first,
        dlambda,
        dnu,
        d2lambda,
        d2nu,
        clamped: summary.clamped,
    })
}

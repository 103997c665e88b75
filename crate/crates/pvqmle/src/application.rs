//! Fit, test and diagnose a single observed series.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use pvqmle_core::estimate::{
    fit_clse, fit_mle_poisson_inar1, fit_poisson_qmle, fit_pvqmle, fit_wlse, FitOptions, FitResult, WlseWeights,
};
use pvqmle_core::filters::{run_filter_slice, DerivLevel};
use pvqmle_core::inference::{fit_covariance, wald_tests, CovarianceResult, WaldResult};
use pvqmle_core::{FilterFamily, RestrictionSpec, SampleSpace, TimeSeries};
use serde::Serialize;

use crate::io::write_filtered;
use crate::{Error, Result};

/// Parses `inar1`, `inar2`, `inar(3)`, `ingarch` or `beta`.
pub fn parse_family(name: &str) -> Result<FilterFamily> {
    let lower = name.trim().to_ascii_lowercase();
    let family = match lower.as_str() {
        "ingarch" | "ingarch(1,1)" => FilterFamily::IngarchLinear,
        "beta" | "beta(1,1)" => FilterFamily::BetaVar,
        s if s.starts_with("inar") => {
            let digits = s[4..].trim_matches(|c| c == '(' || c == ')' || c == ':');
            let lags = if digits.is_empty() { 1 } else { digits.parse().unwrap_or(0) };
            if lags == 0 {
                return Err(Error::Config(format!("cannot parse INAR order in {name:?}")));
            }
            FilterFamily::InarLinear { lags }
        }
        _ => return Err(Error::Config(format!("unknown family {name:?}; use inar<p>, ingarch or beta"))),
    };
    Ok(family)
}

pub fn family_space(family: FilterFamily) -> SampleSpace {
    match family {
        FilterFamily::BetaVar => SampleSpace::UnitInterval,
        _ => SampleSpace::Counts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliEstimator {
    Pvqmle,
    Clse,
    Wlse,
    PoissonQmle,
    Mle,
}

impl CliEstimator {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "pvqmle" => Self::Pvqmle,
            "clse" | "ls" => Self::Clse,
            "wlse" => Self::Wlse,
            "poisson_qmle" | "qmle" => Self::PoissonQmle,
            "mle" => Self::Mle,
            other => return Err(Error::Config(format!("unknown estimator {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub restarts: usize,
    pub clamped: bool,
    pub degenerate_hessian: bool,
    pub condition_number: f64,
}

/// Serializable summary of one fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub estimator: String,
    pub family: String,
    pub restriction: String,
    pub n: usize,
    pub n_terms: usize,
    pub loglik: f64,
    /// Free coordinates with sandwich standard errors.
    pub coefficients: Vec<Coefficient>,
    /// The full parameter vector with restrictions substituted back.
    pub theta: Option<Vec<Coefficient>>,
    pub convergence: Convergence,
}

impl FitReport {
    pub fn from_fit(fit: &FitResult, cov: &CovarianceResult, n: usize) -> Self {
        let reduced = if fit.theta_hat.is_some() { &fit.reduced_hat } else { &fit.estimates };
        let coefficients = cov
            .names
            .iter()
            .zip(reduced)
            .zip(&cov.se)
            .map(|((name, &estimate), &se)| Coefficient {
                name: name.clone(),
                estimate,
                se,
            })
            .collect();
        let theta = fit.theta_hat.as_ref().map(|p| {
            p.named()
                .map(|(name, estimate)| Coefficient {
                    name: name.to_string(),
                    estimate,
                    se: cov.se_of(name).unwrap_or(f64::NAN),
                })
                .collect()
        });
        FitReport {
            estimator: fit.tag.as_str().to_string(),
            family: fit.family.name(),
            restriction: fit.restriction.name(),
            n,
            n_terms: fit.n_terms,
            loglik: fit.loglik,
            coefficients,
            theta,
            convergence: Convergence {
                converged: fit.converged,
                iterations: fit.iterations,
                grad_norm: fit.grad_norm,
                restarts: fit.restarts,
                clamped: fit.clamped,
                degenerate_hessian: cov.degenerate(),
                condition_number: cov.condition_number,
            },
        }
    }
}

/// Fits one estimator and attaches sandwich standard errors.
pub fn fit_with_se(
    family: FilterFamily,
    series: &TimeSeries,
    estimator: CliEstimator,
    restriction: &RestrictionSpec,
    opts: &FitOptions,
) -> Result<(FitResult, FitReport)> {
    if estimator != CliEstimator::Pvqmle && !restriction.is_empty() {
        return Err(Error::Config("restrictions only apply to the pvqmle estimator".into()));
    }
    let fit = match estimator {
        CliEstimator::Pvqmle => fit_pvqmle(family, series, (!restriction.is_empty()).then_some(restriction), None, opts)?,
        CliEstimator::Clse => fit_clse(family, series)?,
        CliEstimator::Wlse => fit_wlse(family, series, &WlseWeights::EstimatedBinomial)?,
        CliEstimator::PoissonQmle => fit_poisson_qmle(family, series, opts)?,
        CliEstimator::Mle => {
            if family != FilterFamily::INAR1 {
                return Err(Error::Config("the exact MLE is only available for inar1".into()));
            }
            fit_mle_poisson_inar1(series, opts)?
        }
    };
    let cov = fit_covariance(&fit, series)?;
    let report = FitReport::from_fit(&fit, &cov, series.len());
    Ok((fit, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub restriction: String,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub r_hat: Vec<f64>,
}

impl From<&WaldResult> for TestReport {
    fn from(w: &WaldResult) -> Self {
        TestReport {
            restriction: w.restriction.clone(),
            statistic: w.statistic,
            dof: w.dof,
            p_value: w.p_value,
            r_hat: w.r_hat.clone(),
        }
    }
}

/// Unrestricted fit plus Wald tests of each restriction.
pub fn run_tests(
    family: FilterFamily,
    series: &TimeSeries,
    restrictions: &[RestrictionSpec],
    opts: &FitOptions,
) -> Result<(FitResult, Vec<TestReport>)> {
    let fit = fit_pvqmle(family, series, None, None, opts)?;
    let tests = wald_tests(&fit, series, restrictions)?;
    Ok((fit, tests.iter().map(TestReport::from).collect()))
}

#[derive(Debug, Clone, Serialize)]
pub struct AcfPoint {
    pub lag: usize,
    pub acf: f64,
    /// Half-width `1.96/√n` of the white-noise band.
    pub band: f64,
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn sample_acf(x: &[f64], max_lag: usize) -> Vec<AcfPoint> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let band = 1.96 / (n as f64).sqrt();
    (1..=max_lag.min(n.saturating_sub(1)))
        .map(|lag| {
            let c: f64 = (lag..n).map(|t| (x[t] - mean) * (x[t - lag] - mean)).sum();
            AcfPoint {
                lag,
                acf: if c0 > 0.0 { c / c0 } else { 0.0 },
                band,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ApplicationReport {
    pub family: String,
    pub n: usize,
    pub level: f64,
    pub unrestricted: FitReport,
    pub tests: Vec<TestReport>,
    /// Restricted fits for the restrictions not rejected at `level`.
    pub restricted: Vec<FitReport>,
    pub residual_acf: Vec<AcfPoint>,
}

pub const ACF_LAGS: usize = 20;

/// The full pipeline: unrestricted fit with standard errors, every Wald
/// test, restricted refits where the test does not reject, and the ACF of
/// the unrestricted Pearson residuals.
pub fn run_application(
    family: FilterFamily,
    series: &TimeSeries,
    restrictions: &[RestrictionSpec],
    level: f64,
    opts: &FitOptions,
) -> Result<(ApplicationReport, FitResult)> {
    let none = RestrictionSpec::none(family);
    let (fit, unrestricted) = fit_with_se(family, series, CliEstimator::Pvqmle, &none, opts)?;
    let tests: Vec<TestReport> = wald_tests(&fit, series, restrictions)?.iter().map(TestReport::from).collect();
    let mut restricted = Vec::new();
    for (spec, test) in restrictions.iter().zip(&tests) {
        if test.p_value >= level {
            restricted.push(fit_with_se(family, series, CliEstimator::Pvqmle, spec, opts)?.1);
        }
    }
    let paths = run_filter_slice(family, &fit.estimates, series, DerivLevel::None)?;
    let residual_acf = sample_acf(&paths.pearson_residuals(series), ACF_LAGS);
    let report = ApplicationReport {
        family: family.name(),
        n: series.len(),
        level,
        unrestricted,
        tests,
        restricted,
        residual_acf,
    };
    Ok((report, fit))
}

/// Writes `report.json`, `residual_acf.csv` and `filtered.csv`.
pub fn write_application(report: &ApplicationReport, fit: &FitResult, series: &TimeSeries, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut f = BufWriter::new(File::create(out_dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut f, report)?;
    writeln!(f)?;
    let mut w = csv::Writer::from_path(out_dir.join("residual_acf.csv"))?;
    for p in &report.residual_acf {
        w.serialize(p)?;
    }
    w.flush()?;
    let paths = run_filter_slice(fit.family, &fit.estimates, series, DerivLevel::None)?;
    write_filtered(BufWriter::new(File::create(out_dir.join("filtered.csv"))?), &paths)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names() {
        assert_eq!(parse_family("inar1").unwrap(), FilterFamily::INAR1);
        assert_eq!(parse_family("INAR(2)").unwrap(), FilterFamily::InarLinear { lags: 2 });
        assert_eq!(parse_family("inar").unwrap(), FilterFamily::INAR1);
        assert_eq!(parse_family("beta").unwrap(), FilterFamily::BetaVar);
        assert!(parse_family("inar0").is_err());
        assert!(parse_family("arma").is_err());
    }

    #[test]
    fn acf_of_alternating_series() {
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let acf = sample_acf(&x, 2);
        assert!((acf[0].acf + 0.99).abs() < 1e-12);
        assert!((acf[1].acf - 0.98).abs() < 1e-12);
        assert!((acf[0].band - 0.196).abs() < 1e-12);
    }
}

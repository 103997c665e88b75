//! Declarative Monte Carlo experiments: estimator bias/RMSE tables,
//! Wald test rejection rates, power curves and variance-ratio grids.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use pvqmle_core::dgp::{inject_outlier, simulate, DgpSpec, Innovation, Process, ThinningSpec};
use pvqmle_core::estimate::{
    fit_clse, fit_mle_poisson_inar1, fit_poisson_qmle, fit_pvqmle, fit_wlse, FitOptions, FitResult, WlseWeights,
};
use pvqmle_core::inference::{variance_ratio_point, wald_test, VarianceRatio};
use pvqmle_core::objective::{evaluate_slice, EvalLevel};
use pvqmle_core::{FilterFamily, RestrictionSpec, TimeSeries};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Estimators a Monte Carlo run can include.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Pvqmle,
    Clse,
    Wlse,
    /// WLSE weighted by the true conditional variance of the DGP.
    WlseUnfeasible,
    PoissonQmle,
    Mle,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pvqmle => "pvqmle",
            Self::Clse => "clse",
            Self::Wlse => "wlse",
            Self::WlseUnfeasible => "wlse_unfeasible",
            Self::PoissonQmle => "poisson_qmle",
            Self::Mle => "mle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub estimator: Estimator,
    /// Restriction name such as `binomial+equidispersion`; PVQMLE only.
    #[serde(default = "none_name")]
    pub restriction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub restriction: String,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variants {
    /// Replace the middle observation by `round(mean + 3 sd)`.
    #[serde(default)]
    pub inject_outlier: bool,
    /// Set the INAR(1) thinning mean to 0.99.
    #[serde(default)]
    pub near_unit_root: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dgp: DgpSpec,
    pub sample_sizes: Vec<usize>,
    pub n_reps: usize,
    #[serde(default)]
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default)]
    pub tests: Vec<TestConfig>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub variants: Variants,
    /// Also write per-replication estimates and test statistics.
    #[serde(default)]
    pub persist_reps: bool,
}

fn none_name() -> String {
    "none".into()
}

fn default_levels() -> Vec<f64> {
    vec![0.01, 0.05, 0.10]
}

pub const NEAR_UNIT_ROOT_A: f64 = 0.99;

impl McConfig {
    /// The DGP after applying parameter variants.
    pub fn effective_dgp(&self) -> Result<DgpSpec> {
        let mut dgp = self.dgp.clone();
        if self.variants.near_unit_root {
            let Process::Inar { thinning, .. } = &mut dgp.process else {
                return Err(Error::Config("near_unit_root needs an INAR(1) DGP".into()));
            };
            if thinning.len() != 1 {
                return Err(Error::Config("near_unit_root needs an INAR(1) DGP".into()));
            }
            thinning[0] = match thinning[0] {
                ThinningSpec::Binomial { .. } => ThinningSpec::Binomial { a: NEAR_UNIT_ROOT_A },
                ThinningSpec::Poisson { .. } => ThinningSpec::Poisson { a: NEAR_UNIT_ROOT_A },
                ThinningSpec::Geometric { .. } => ThinningSpec::Geometric { a: NEAR_UNIT_ROOT_A },
                ThinningSpec::NegBin { v, .. } => ThinningSpec::NegBin { a: NEAR_UNIT_ROOT_A, v },
                ThinningSpec::BiNb { .. } => {
                    return Err(Error::Config("near_unit_root is not defined for BiNB thinning".into()))
                }
            };
        }
        dgp.validate()?;
        Ok(dgp)
    }

    pub fn validate(&self) -> Result<Plan> {
        if self.n_reps == 0 {
            return Err(Error::Config("n_reps must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::Config("sample_sizes must not be empty".into()));
        }
        let dgp = self.effective_dgp()?;
        let family = dgp.family();
        if let Some(&t) = self.sample_sizes.iter().find(|&&t| t < family.min_len()) {
            return Err(Error::Config(format!(
                "sample size {t} is below the minimum {} for {}",
                family.min_len(),
                family.name()
            )));
        }
        if self.variants.inject_outlier && !matches!(dgp.process, Process::Inar { .. }) {
            return Err(Error::Config("inject_outlier needs a count DGP".into()));
        }
        let mut estimators = Vec::new();
        for e in &self.estimators {
            let restriction = RestrictionSpec::parse(family, &e.restriction)?;
            let inar = matches!(family, FilterFamily::InarLinear { .. });
            let ok = match e.estimator {
                Estimator::Pvqmle => true,
                Estimator::Clse | Estimator::Wlse | Estimator::WlseUnfeasible => inar,
                Estimator::PoissonQmle => inar || family == FilterFamily::IngarchLinear,
                Estimator::Mle => {
                    family == FilterFamily::INAR1
                        && matches!(
                            dgp.process,
                            Process::Inar {
                                innovation: Innovation::Poisson { .. },
                                ..
                            }
                        )
                }
            };
            if !ok {
                return Err(Error::Config(format!(
                    "estimator {} is not available for {}",
                    e.estimator.as_str(),
                    family.name()
                )));
            }
            if e.estimator != Estimator::Pvqmle && !restriction.is_empty() {
                return Err(Error::Config(format!(
                    "restrictions only apply to pvqmle, not {}",
                    e.estimator.as_str()
                )));
            }
            estimators.push((e.estimator, restriction));
        }
        let mut tests = Vec::new();
        for t in &self.tests {
            let restriction = RestrictionSpec::parse(family, &t.restriction)?;
            if restriction.is_empty() {
                return Err(Error::Config("a test needs a non-empty restriction".into()));
            }
            if t.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
                return Err(Error::Config(format!("levels of {} must lie in (0, 1)", t.restriction)));
            }
            tests.push((restriction, t.levels.clone()));
        }
        Ok(Plan {
            dgp,
            family,
            estimators,
            tests,
        })
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Plan {
    pub dgp: DgpSpec,
    pub family: FilterFamily,
    pub estimators: Vec<(Estimator, RestrictionSpec)>,
    pub tests: Vec<(RestrictionSpec, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepOutcome<T> {
    Ok(T),
    NotConverged,
    Failed(String),
}

impl<T> RepOutcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            RepOutcome::Ok(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldDraw {
    pub statistic: f64,
    pub p_value: f64,
}

/// Everything computed in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub t: usize,
    pub rep: usize,
    pub seed: u64,
    /// One entry per configured estimator: names and estimates.
    pub estimates: Vec<RepOutcome<(Vec<String>, Vec<f64>)>>,
    /// One entry per configured test.
    pub tests: Vec<RepOutcome<WaldDraw>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateCell {
    pub t: usize,
    pub estimator: String,
    pub restriction: String,
    pub coordinate: String,
    pub truth: f64,
    pub n_reps: usize,
    pub n_converged: usize,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Monte Carlo standard error of the bias.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionCell {
    pub t: usize,
    pub test: String,
    pub dof: usize,
    pub level: f64,
    pub n_valid: usize,
    pub n_rejected: usize,
    pub rate: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub config: McConfig,
    pub estimates: Vec<EstimateCell>,
    pub rejections: Vec<RejectionCell>,
    pub reps: Vec<RepRecord>,
    pub failures: usize,
    pub elapsed_secs: f64,
}

impl McResult {
    pub fn estimate(&self, t: usize, estimator: &str, restriction: &str, coordinate: &str) -> Option<&EstimateCell> {
        self.estimates
            .iter()
            .find(|c| c.t == t && c.estimator == estimator && c.restriction == restriction && c.coordinate == coordinate)
    }

    pub fn rejection(&self, t: usize, test: &str, level: f64) -> Option<&RejectionCell> {
        self.rejections
            .iter()
            .find(|c| c.t == t && c.test == test && c.level == level)
    }

    /// Wald statistics of test `index` at sample size `t`, valid reps only.
    pub fn wald_draws(&self, t: usize, index: usize) -> Vec<f64> {
        self.reps
            .iter()
            .filter(|r| r.t == t)
            .filter_map(|r| r.tests[index].ok().map(|w| w.statistic))
            .collect()
    }
}

fn fit_one(
    estimator: Estimator,
    restriction: &RestrictionSpec,
    family: FilterFamily,
    dgp: &DgpSpec,
    series: &TimeSeries,
    opts: &FitOptions,
) -> pvqmle_core::Result<FitResult> {
    match estimator {
        Estimator::Pvqmle => {
            let r = (!restriction.is_empty()).then_some(restriction);
            fit_pvqmle(family, series, r, None, opts)
        }
        Estimator::Clse => fit_clse(family, series),
        Estimator::Wlse => fit_wlse(family, series, &WlseWeights::EstimatedBinomial),
        Estimator::WlseUnfeasible => fit_wlse(family, series, &WlseWeights::TrueVariance(true_variance_path(dgp, series))),
        Estimator::PoissonQmle => fit_poisson_qmle(family, series, opts),
        Estimator::Mle => fit_mle_poisson_inar1(series, opts),
    }
}

/// True conditional variance `V(Y_t | F_{t-1})` of an INAR DGP along a path.
pub fn true_variance_path(dgp: &DgpSpec, series: &TimeSeries) -> Vec<f64> {
    let theta = dgp.true_theta();
    let FilterFamily::InarLinear { lags } = dgp.family() else {
        return vec![1.0; series.len()];
    };
    let p = lags + 1;
    let y = series.values();
    (0..y.len())
        .map(|t| {
            if t < lags {
                return 1.0;
            }
            theta[p] + (1..=lags).map(|h| theta[p + h] * y[t - h]).sum::<f64>()
        })
        .collect()
}

fn outcome_of(fit: pvqmle_core::Result<FitResult>) -> RepOutcome<FitResult> {
    match fit {
        Ok(f) if f.converged => RepOutcome::Ok(f),
        Ok(_) => RepOutcome::NotConverged,
        Err(e) => RepOutcome::Failed(e.to_string()),
    }
}

/// Runs one replication of a validated plan.
pub fn run_rep(plan: &Plan, variants: Variants, t: usize, rep: usize, seed: u64) -> RepRecord {
    let failed = |msg: String| RepRecord {
        t,
        rep,
        seed,
        estimates: plan.estimators.iter().map(|_| RepOutcome::Failed(msg.clone())).collect(),
        tests: plan.tests.iter().map(|_| RepOutcome::Failed(msg.clone())).collect(),
    };
    let series = match simulate(&plan.dgp, t, seed) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let series = if variants.inject_outlier {
        match inject_outlier(&series) {
            Ok(s) => s,
            Err(e) => return failed(e.to_string()),
        }
    } else {
        series
    };
    let opts = FitOptions {
        seed,
        ..FitOptions::default()
    };
    let mut unrestricted: Option<RepOutcome<FitResult>> = None;
    let estimates = plan
        .estimators
        .iter()
        .map(|(est, restriction)| {
            let outcome = outcome_of(fit_one(*est, restriction, plan.family, &plan.dgp, &series, &opts));
            if *est == Estimator::Pvqmle && restriction.is_empty() && unrestricted.is_none() {
                unrestricted = Some(outcome.clone());
            }
            match outcome {
                RepOutcome::Ok(f) => RepOutcome::Ok((f.names, f.estimates)),
                RepOutcome::NotConverged => RepOutcome::NotConverged,
                RepOutcome::Failed(m) => RepOutcome::Failed(m),
            }
        })
        .collect();

    let tests = if plan.tests.is_empty() {
        Vec::new()
    } else {
        let base = unrestricted.unwrap_or_else(|| outcome_of(fit_pvqmle(plan.family, &series, None, None, &opts)));
        match base {
            RepOutcome::Ok(fit) => match evaluate_slice(plan.family, &fit.estimates, &series, EvalLevel::Full) {
                Ok(eval) => plan
                    .tests
                    .iter()
                    .map(|(restriction, _)| match wald_test(&fit, &eval, restriction) {
                        Ok(w) => RepOutcome::Ok(WaldDraw {
                            statistic: w.statistic,
                            p_value: w.p_value,
                        }),
                        Err(e) => RepOutcome::Failed(e.to_string()),
                    })
                    .collect(),
                Err(e) => plan.tests.iter().map(|_| RepOutcome::Failed(e.to_string())).collect(),
            },
            RepOutcome::NotConverged => plan.tests.iter().map(|_| RepOutcome::NotConverged).collect(),
            RepOutcome::Failed(m) => plan.tests.iter().map(|_| RepOutcome::Failed(m.clone())).collect(),
        }
    };
    RepRecord {
        t,
        rep,
        seed,
        estimates,
        tests,
    }
}

/// Runs every replication in parallel and aggregates; rep `i` uses seed
/// `base_seed + i` at every sample size.
pub fn run_mc(config: &McConfig) -> Result<McResult> {
    let start = Instant::now();
    let plan = config.validate()?;
    let jobs: Vec<(usize, usize)> = config
        .sample_sizes
        .iter()
        .flat_map(|&t| (0..config.n_reps).map(move |i| (t, i)))
        .collect();
    let reps: Vec<RepRecord> = jobs
        .par_iter()
        .map(|&(t, i)| run_rep(&plan, config.variants, t, i, config.base_seed.wrapping_add(i as u64)))
        .collect();
    let (estimates, rejections) = aggregate(config, &plan, &reps);
    let failures = reps
        .iter()
        .map(|r| {
            r.estimates.iter().filter(|e| e.ok().is_none()).count() + r.tests.iter().filter(|e| e.ok().is_none()).count()
        })
        .sum();
    Ok(McResult {
        config: config.clone(),
        estimates,
        rejections,
        reps,
        failures,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn aggregate(config: &McConfig, plan: &Plan, reps: &[RepRecord]) -> (Vec<EstimateCell>, Vec<RejectionCell>) {
    let truth: BTreeMap<String, f64> = plan
        .family
        .coordinate_names()
        .into_iter()
        .zip(plan.dgp.true_theta())
        .collect();
    let mut estimates = Vec::new();
    let mut rejections = Vec::new();
    for &t in &config.sample_sizes {
        let at_t: Vec<&RepRecord> = reps.iter().filter(|r| r.t == t).collect();
        for (k, (est, restriction)) in plan.estimators.iter().enumerate() {
            let ok: Vec<&(Vec<String>, Vec<f64>)> = at_t.iter().filter_map(|r| r.estimates[k].ok()).collect();
            let names = match ok.first() {
                Some((names, _)) => names.clone(),
                None => continue,
            };
            for (j, name) in names.iter().enumerate() {
                let Some(&true_value) = truth.get(name) else { continue };
                let values: Vec<f64> = ok.iter().map(|(_, v)| v[j]).collect();
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let mse = values.iter().map(|v| (v - true_value).powi(2)).sum::<f64>() / n;
                let var = if values.len() > 1 {
                    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                estimates.push(EstimateCell {
                    t,
                    estimator: est.as_str().to_string(),
                    restriction: restriction.name(),
                    coordinate: name.clone(),
                    truth: true_value,
                    n_reps: at_t.len(),
                    n_converged: values.len(),
                    mean,
                    bias: mean - true_value,
                    rmse: mse.sqrt(),
                    mc_se: (var / n).sqrt(),
                });
            }
        }
        for (k, (restriction, levels)) in plan.tests.iter().enumerate() {
            let p_values: Vec<f64> = at_t.iter().filter_map(|r| r.tests[k].ok().map(|w| w.p_value)).collect();
            for &level in levels {
                let n_valid = p_values.len();
                let n_rejected = p_values.iter().filter(|&&p| p < level).count();
                let rate = if n_valid > 0 { n_rejected as f64 / n_valid as f64 } else { f64::NAN };
                rejections.push(RejectionCell {
                    t,
                    test: restriction.name(),
                    dof: restriction.r(),
                    level,
                    n_valid,
                    n_rejected,
                    rate,
                    mc_se: (rate * (1.0 - rate) / n_valid.max(1) as f64).sqrt(),
                });
            }
        }
    }
    (estimates, rejections)
}

fn write_rows<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RepEstimateRow<'a> {
    t: usize,
    rep: usize,
    seed: u64,
    estimator: &'a str,
    restriction: String,
    status: &'a str,
    coordinate: &'a str,
    estimate: f64,
}

#[derive(Serialize)]
struct RepTestRow<'a> {
    t: usize,
    rep: usize,
    seed: u64,
    test: String,
    status: &'a str,
    statistic: f64,
    p_value: f64,
}

fn status<T>(o: &RepOutcome<T>) -> &'static str {
    match o {
        RepOutcome::Ok(_) => "ok",
        RepOutcome::NotConverged => "not_converged",
        RepOutcome::Failed(_) => "failed",
    }
}

/// Writes `estimates.csv`, `rejections.csv`, `summary.json` and, when
/// requested, `rep_estimates.csv` and `rep_tests.csv` into `out_dir`.
pub fn write_mc(result: &McResult, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_rows(&out_dir.join("estimates.csv"), &result.estimates)?;
    write_rows(&out_dir.join("rejections.csv"), &result.rejections)?;
    if result.config.persist_reps {
        let plan = result.config.validate()?;
        let mut est_rows = Vec::new();
        let mut test_rows = Vec::new();
        for r in &result.reps {
            for (k, (est, restriction)) in plan.estimators.iter().enumerate() {
                match &r.estimates[k] {
                    RepOutcome::Ok((names, values)) => {
                        for (name, value) in names.iter().zip(values) {
                            est_rows.push(RepEstimateRow {
                                t: r.t,
                                rep: r.rep,
                                seed: r.seed,
                                estimator: est.as_str(),
                                restriction: restriction.name(),
                                status: "ok",
                                coordinate: name,
                                estimate: *value,
                            });
                        }
                    }
                    other => est_rows.push(RepEstimateRow {
                        t: r.t,
                        rep: r.rep,
                        seed: r.seed,
                        estimator: est.as_str(),
                        restriction: restriction.name(),
                        status: status(other),
                        coordinate: "",
                        estimate: f64::NAN,
                    }),
                }
            }
            for (k, (restriction, _)) in plan.tests.iter().enumerate() {
                let (statistic, p_value) = r.tests[k].ok().map_or((f64::NAN, f64::NAN), |w| (w.statistic, w.p_value));
                test_rows.push(RepTestRow {
                    t: r.t,
                    rep: r.rep,
                    seed: r.seed,
                    test: restriction.name(),
                    status: status(&r.tests[k]),
                    statistic,
                    p_value,
                });
            }
        }
        write_rows(&out_dir.join("rep_estimates.csv"), &est_rows)?;
        write_rows(&out_dir.join("rep_tests.csv"), &test_rows)?;
    }
    let summary = serde_json::json!({
        "base_seed": result.config.base_seed,
        "n_reps": result.config.n_reps,
        "sample_sizes": result.config.sample_sizes,
        "failures": result.failures,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_secs": result.elapsed_secs,
        "config": result.config,
    });
    let mut f = BufWriter::new(File::create(out_dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut f, &summary)?;
    writeln!(f)?;
    Ok(())
}

/// Power study for the equidispersion test `b = a` under negative binomial
/// thinning with increasing overdispersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub a: f64,
    pub omega: f64,
    pub sample_sizes: Vec<usize>,
    /// Overdispersion percentages `1 - a/b`.
    pub pcts: Vec<f64>,
    pub n_reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "poisson_name")]
    pub restriction: String,
}

fn default_level() -> f64 {
    0.05
}

fn poisson_name() -> String {
    "poisson".into()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerPoint {
    pub t: usize,
    pub pct: f64,
    pub b: f64,
    /// Negative binomial size parameter; infinite at the equidispersed null.
    pub v: f64,
    pub n_valid: usize,
    pub rate: f64,
}

/// Maps an overdispersion percentage to `(b, v)` with `b = a/(1 - pct)`
/// and `v = a²/(b - a)`.
pub fn overdispersion_to_v(a: f64, pct: f64) -> (f64, f64) {
    let b = a / (1.0 - pct);
    let v = if pct == 0.0 { f64::INFINITY } else { a * a / (b - a) };
    (b, v)
}

pub fn run_power_curve(config: &PowerConfig) -> Result<Vec<PowerPoint>> {
    let mut out = Vec::new();
    for &pct in &config.pcts {
        if !(0.0..1.0).contains(&pct) {
            return Err(Error::Config(format!("overdispersion {pct} must lie in [0, 1)")));
        }
        let (b, v) = overdispersion_to_v(config.a, pct);
        let thinning = if pct == 0.0 {
            ThinningSpec::Poisson { a: config.a }
        } else {
            ThinningSpec::NegBin { a: config.a, v }
        };
        let mc = McConfig {
            dgp: DgpSpec::inar1(thinning, config.omega),
            sample_sizes: config.sample_sizes.clone(),
            n_reps: config.n_reps,
            estimators: Vec::new(),
            tests: vec![TestConfig {
                restriction: config.restriction.clone(),
                levels: vec![config.level],
            }],
            base_seed: config.base_seed,
            variants: Variants::default(),
            persist_reps: false,
        };
        let result = run_mc(&mc)?;
        for cell in &result.rejections {
            out.push(PowerPoint {
                t: cell.t,
                pct,
                b,
                v,
                n_valid: cell.n_valid,
                rate: cell.rate,
            });
        }
    }
    Ok(out)
}

pub fn write_power(points: &[PowerPoint], path: &Path) -> Result<()> {
    write_rows(path, points)
}

/// Variance ratios over a grid of `(a, ω)`, evaluated in parallel; point
/// `i` uses seed `seed + i`.
pub fn variance_ratio_grid(grid: &[(f64, f64)], t_long: usize, seed: u64) -> Result<Vec<VarianceRatio>> {
    grid.par_iter()
        .enumerate()
        .map(|(i, &(a, omega))| variance_ratio_point(a, omega, t_long, seed.wrapping_add(i as u64)).map_err(Error::from))
        .collect()
}

#[derive(Serialize)]
struct RatioRow {
    a: f64,
    omega: f64,
    log10_ratio_a: f64,
    log10_ratio_omega: f64,
    degenerate: bool,
}

pub fn write_variance_ratios(points: &[VarianceRatio], path: &Path) -> Result<()> {
    let rows: Vec<RatioRow> = points
        .iter()
        .map(|p| RatioRow {
            a: p.a,
            omega: p.omega,
            log10_ratio_a: p.log10_ratio_a,
            log10_ratio_omega: p.log10_ratio_omega,
            degenerate: p.degenerate,
        })
        .collect();
    write_rows(path, &rows)
}

/// Kolmogorov distance between the empirical CDF of `draws` and `cdf`.
pub fn ks_distance(draws: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

//! Seedable simulators for INAR(p) and beta autoregressive processes.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`, so a
//! `(spec, T, seed)` triple reproduces the same series on every platform.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Beta, Binomial, Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterFamily;
use crate::math;
use crate::series::{SampleSpace, TimeSeries};

/// Draws discarded before the retained sample starts.
pub const DEFAULT_BURN_IN: usize = 500;

/// Bounds for beta draws so the unit-interval series never hits 0 or 1.
const UNIT_EPS: f64 = 1e-10;

/// Thinning operator `a ∘ N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThinningSpec {
    /// Binomial survival: `Binomial(N, a)`.
    Binomial { a: f64 },
    /// Equidispersed: `Poisson(a N)`.
    #[serde(alias = "poisson_thin")]
    Poisson { a: f64 },
    /// Sum of `N` geometrics on {0, 1, ...} with mean `a`.
    #[serde(alias = "geometric_thin")]
    Geometric { a: f64 },
    /// Aggregate negative binomial draw with mean `aN` and variance `(a + a²/v) N`.
    #[serde(alias = "negbin", alias = "neg_bin_thin")]
    NegBin { a: f64, v: f64 },
    /// Sum of `N` independent Bernoulli(π) + Geometric(mean μ) counts.
    #[serde(alias = "binb")]
    BiNb { mu: f64, pi: f64 },
}

impl ThinningSpec {
    /// Mean of a single count, `a`.
    pub fn mean_slope(&self) -> f64 {
        match *self {
            Self::Binomial { a } | Self::Poisson { a } | Self::Geometric { a } | Self::NegBin { a, .. } => a,
            Self::BiNb { mu, pi } => mu + pi,
        }
    }

    /// Variance per count, `b`.
    pub fn variance_slope(&self) -> f64 {
        match *self {
            Self::Binomial { a } => a * (1.0 - a),
            Self::Poisson { a } => a,
            Self::Geometric { a } => a + a * a,
            Self::NegBin { a, v } => a + a * a / v,
            Self::BiNb { mu, pi } => pi * (1.0 - pi) + mu * (1.0 + mu),
        }
    }

    /// Overdispersion percentage `1 - a/b`.
    pub fn overdispersion(&self) -> f64 {
        1.0 - self.mean_slope() / self.variance_slope()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Binomial { a } => a > 0.0 && a < 1.0,
            Self::Poisson { a } | Self::Geometric { a } => a > 0.0 && a.is_finite(),
            Self::NegBin { a, v } => a > 0.0 && a.is_finite() && v > 0.0 && v.is_finite(),
            Self::BiNb { mu, pi } => mu >= 0.0 && (0.0..=1.0).contains(&pi) && mu + pi > 0.0 && mu + pi < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid thinning parameters {self:?}")))
        }
    }
}

/// Innovation law of an INAR process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    Poisson { omega: f64 },
    /// Negative binomial with mean `omega` and variance `omega + omega²/size`.
    #[serde(alias = "negbin")]
    NegBin { omega: f64, size: f64 },
}

impl Innovation {
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Poisson { omega } | Self::NegBin { omega, .. } => omega,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Poisson { omega } => omega,
            Self::NegBin { omega, size } => omega + omega * omega / size,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Poisson { omega } => omega > 0.0 && omega.is_finite(),
            Self::NegBin { omega, size } => omega > 0.0 && omega.is_finite() && size > 0.0 && size.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid innovation parameters {self:?}")))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            Self::Poisson { omega } => poisson(omega, rng),
            Self::NegBin { omega, size } => negbin(omega, size, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Process {
    /// INAR(p); the order is the number of thinning operators.
    Inar { thinning: Vec<ThinningSpec>, innovation: Innovation },
    /// `Y_t | F_{t-1} ~ Beta(λ_t φ, (1-λ_t) φ)` with `λ_t = ω + α Y_{t-1} + β λ_{t-1}`.
    BetaAr { omega: f64, alpha: f64, beta: f64, phi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub process: Process,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl DgpSpec {
    pub fn new(process: Process) -> Self {
        Self { process, burn_in: DEFAULT_BURN_IN }
    }

    /// INAR(1) with Poisson innovations.
    pub fn inar1(thinning: ThinningSpec, omega: f64) -> Self {
        Self::new(Process::Inar {
            thinning: vec![thinning],
            innovation: Innovation::Poisson { omega },
        })
    }

    pub fn beta_ar(omega: f64, alpha: f64, beta: f64, phi: f64) -> Self {
        Self::new(Process::BetaAr { omega, alpha, beta, phi })
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Checks parameter ranges and stationarity.
    pub fn validate(&self) -> Result<()> {
        match &self.process {
            Process::Inar { thinning, innovation } => {
                if thinning.is_empty() {
                    return Err(Error::InvalidSpec("INAR process needs at least one lag".into()));
                }
                for t in thinning {
                    t.validate()?;
                }
                innovation.validate()?;
                let total: f64 = thinning.iter().map(ThinningSpec::mean_slope).sum();
                if total >= 1.0 {
                    return Err(Error::NonStationary(format!("sum of thinning means is {total}")));
                }
            }
            &Process::BetaAr { omega, alpha, beta, phi } => {
                let ranges = [omega, alpha, beta].iter().all(|v| *v >= 0.0 && v.is_finite()) && omega > 0.0;
                if !ranges || !(phi > 0.0 && phi.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "invalid beta autoregression parameters ({omega}, {alpha}, {beta}, {phi})"
                    )));
                }
                if omega + alpha + beta >= 1.0 {
                    return Err(Error::NonStationary(format!("omega + alpha + beta = {}", omega + alpha + beta)));
                }
            }
        }
        Ok(())
    }

    pub fn space(&self) -> SampleSpace {
        match self.process {
            Process::Inar { .. } => SampleSpace::Counts,
            Process::BetaAr { .. } => SampleSpace::UnitInterval,
        }
    }

    /// Filter family that nests this process.
    pub fn family(&self) -> FilterFamily {
        match &self.process {
            Process::Inar { thinning, .. } => FilterFamily::InarLinear { lags: thinning.len() },
            Process::BetaAr { .. } => FilterFamily::BetaVar,
        }
    }

    /// True parameter vector in the layout of [`DgpSpec::family`].
    pub fn true_theta(&self) -> Vec<f64> {
        match &self.process {
            Process::Inar { thinning, innovation } => {
                let mut theta = vec![innovation.mean()];
                theta.extend(thinning.iter().map(ThinningSpec::mean_slope));
                theta.push(innovation.variance());
                theta.extend(thinning.iter().map(ThinningSpec::variance_slope));
                theta
            }
            &Process::BetaAr { omega, alpha, beta, phi } => vec![omega, alpha, beta, omega, alpha, beta, phi],
        }
    }

    /// Stationary mean of the process.
    pub fn stationary_mean(&self) -> f64 {
        match &self.process {
            Process::Inar { thinning, innovation } => {
                innovation.mean() / (1.0 - thinning.iter().map(ThinningSpec::mean_slope).sum::<f64>())
            }
            &Process::BetaAr { omega, alpha, beta, .. } => omega / (1.0 - alpha - beta),
        }
    }
}

/// One draw of `a ∘ n`.
pub fn thin<R: Rng + ?Sized>(spec: &ThinningSpec, n: u64, rng: &mut R) -> u64 {
    if n == 0 {
        return 0;
    }
    match *spec {
        ThinningSpec::Binomial { a } => Binomial::new(n, a).expect("validated binomial").sample(rng),
        ThinningSpec::Poisson { a } => poisson(a * n as f64, rng),
        ThinningSpec::Geometric { a } => {
            let g = Geometric::new(1.0 / (1.0 + a)).expect("validated geometric");
            (0..n).map(|_| g.sample(rng)).sum()
        }
        ThinningSpec::NegBin { a, v } => negbin(a * n as f64, v * n as f64, rng),
        ThinningSpec::BiNb { mu, pi } => {
            let b = Bernoulli::new(pi).expect("validated bernoulli");
            let g = Geometric::new(1.0 / (1.0 + mu)).expect("validated geometric");
            (0..n).map(|_| u64::from(b.sample(rng)) + g.sample(rng)).sum()
        }
    }
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(lambda).expect("positive poisson mean").sample(rng);
    x as u64
}

/// Negative binomial with the given mean and size, drawn as a Poisson–gamma mixture.
fn negbin<R: Rng + ?Sized>(mean: f64, size: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let rate: f64 = Gamma::new(size, mean / size).expect("positive gamma shape").sample(rng);
    poisson(rate, rng)
}

/// Simulates `t` observations after discarding `spec.burn_in` draws.
pub fn simulate(spec: &DgpSpec, t: usize, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    if t < 2 {
        return Err(Error::TooShort { len: t, min: 2 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = spec.burn_in + t;
    let values = match &spec.process {
        Process::Inar { thinning, innovation } => simulate_inar(thinning, innovation, total, &mut rng),
        &Process::BetaAr { omega, alpha, beta, phi } => simulate_beta(omega, alpha, beta, phi, total, &mut rng),
    };
    TimeSeries::new(values[spec.burn_in..].to_vec(), spec.space())
}

fn simulate_inar<R: Rng + ?Sized>(thinning: &[ThinningSpec], innovation: &Innovation, total: usize, rng: &mut R) -> Vec<f64> {
    let p = thinning.len();
    // Leading zeros are the pre-sample values Y_0 = ... = Y_{1-p} = 0.
    let mut y = vec![0u64; p + total];
    for t in p..p + total {
        let mut next = innovation.draw(rng);
        for (h, spec) in thinning.iter().enumerate() {
            next += thin(spec, y[t - 1 - h], rng);
        }
        y[t] = next;
    }
    y[p..].iter().map(|&v| v as f64).collect()
}

fn simulate_beta<R: Rng + ?Sized>(omega: f64, alpha: f64, beta: f64, phi: f64, total: usize, rng: &mut R) -> Vec<f64> {
    let mut lambda = omega / (1.0 - alpha - beta);
    let mut y_prev = lambda;
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        lambda = omega + alpha * y_prev + beta * lambda;
        let mu = lambda.clamp(UNIT_EPS, 1.0 - UNIT_EPS);
        let draw: f64 = Beta::new(mu * phi, (1.0 - mu) * phi).expect("positive beta shapes").sample(rng);
        let y = draw.clamp(UNIT_EPS, 1.0 - UNIT_EPS);
        out.push(y);
        y_prev = y;
    }
    out
}

/// Replaces the middle observation by `round(mean + 3 sd)` of the series.
pub fn inject_outlier(series: &TimeSeries) -> Result<TimeSeries> {
    if series.space() != SampleSpace::Counts {
        return Err(Error::InvalidSpec("outlier injection needs a count series".into()));
    }
    let value = math::round(series.mean() + 3.0 * math::sqrt(series.variance()));
    let mut values = series.values().to_vec();
    let mid = values.len() / 2;
    values[mid] = value;
    TimeSeries::new(values, SampleSpace::Counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(spec: ThinningSpec, n: u64, draws: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..draws).map(|_| thin(&spec, n, &mut rng) as f64).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (draws - 1) as f64;
        (mean, var)
    }

    #[test]
    fn zero_count_thins_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for spec in [
            ThinningSpec::Binomial { a: 0.5 },
            ThinningSpec::Poisson { a: 0.5 },
            ThinningSpec::Geometric { a: 0.5 },
            ThinningSpec::NegBin { a: 0.5, v: 2.0 },
            ThinningSpec::BiNb { mu: 0.2, pi: 0.3 },
        ] {
            assert_eq!(thin(&spec, 0, &mut rng), 0);
        }
    }

    #[test]
    fn binomial_moments() {
        let (m, v) = moments(ThinningSpec::Binomial { a: 0.5 }, 10, 1_000_000, 7);
        assert!((m - 5.0).abs() < 0.01, "{m}");
        assert!((v - 2.5).abs() < 0.02, "{v}");
    }

    #[test]
    fn poisson_thinning_moments() {
        let (m, v) = moments(ThinningSpec::Poisson { a: 0.75 }, 4, 1_000_000, 8);
        assert!((m - 3.0).abs() < 0.01, "{m}");
        assert!((v - 3.0).abs() < 0.03, "{v}");
    }

    #[test]
    fn geometric_moments() {
        let (m, v) = moments(ThinningSpec::Geometric { a: 0.5 }, 8, 1_000_000, 9);
        assert!((m - 4.0).abs() < 0.01, "{m}");
        assert!((v - 6.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn every_thinning_matches_its_slopes() {
        let n = 10u64;
        let draws = 1_000_000;
        for (i, spec) in [
            ThinningSpec::Binomial { a: 0.3 },
            ThinningSpec::Poisson { a: 0.6 },
            ThinningSpec::Geometric { a: 0.4 },
            ThinningSpec::NegBin { a: 0.5, v: 1.5 },
            ThinningSpec::BiNb { mu: 0.25, pi: 0.35 },
        ]
        .into_iter()
        .enumerate()
        {
            let (m, v) = moments(spec, n, draws, 100 + i as u64);
            let mean = spec.mean_slope() * n as f64;
            let var = spec.variance_slope() * n as f64;
            let se_mean = math::sqrt(var / draws as f64);
            // Var of the sample variance is (μ4 - σ⁴)/N; excess kurtosis stays below 4 here.
            let se_var = math::sqrt(6.0 * var * var / draws as f64 + var / draws as f64);
            assert!((m - mean).abs() < 3.0 * se_mean, "{spec:?}: mean {m} vs {mean}");
            assert!((v - var).abs() < 3.0 * se_var, "{spec:?}: var {v} vs {var}");
        }
    }

    #[test]
    fn binb_ratio() {
        let spec = ThinningSpec::BiNb { mu: 0.2, pi: 0.3 };
        let ratio = spec.variance_slope() / spec.mean_slope();
        assert!((ratio - (1.0 + 0.2 - 0.3)).abs() < 1e-14);
    }

    #[test]
    fn stationary_means() {
        let spec = DgpSpec::inar1(ThinningSpec::Binomial { a: 0.01 }, 2.0);
        let s = simulate(&spec, 100_000, 3).unwrap();
        assert!((s.mean() - 2.0 / 0.99).abs() < 0.03);

        let spec = DgpSpec::inar1(ThinningSpec::Poisson { a: 0.75 }, 1.0);
        let s = simulate(&spec, 100_000, 4).unwrap();
        assert!((s.mean() - 4.0).abs() < 0.05, "{}", s.mean());

        let spec = DgpSpec::beta_ar(0.01, 0.163, 0.822, 22.2);
        let s = simulate(&spec, 100_000, 5).unwrap();
        assert!(s.values().iter().all(|&y| y > 0.0 && y < 1.0));
        assert!((s.mean() - 0.01 / (1.0 - 0.163 - 0.822)).abs() < 0.02, "{}", s.mean());
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let spec = DgpSpec::inar1(ThinningSpec::Binomial { a: 0.5 }, 2.0);
        let a = simulate(&spec, 50, 11).unwrap();
        let b = simulate(&spec, 50, 11).unwrap();
        let c = simulate(&spec, 50, 12).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn inar1_regression_slope() {
        let spec = DgpSpec::inar1(ThinningSpec::Binomial { a: 0.6 }, 1.5);
        let s = simulate(&spec, 100_000, 21).unwrap();
        let y = s.values();
        let (x, z) = (&y[..y.len() - 1], &y[1..]);
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let mz = z.iter().sum::<f64>() / n;
        let sxz: f64 = x.iter().zip(z).map(|(a, b)| (a - mx) * (b - mz)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxz / sxx;
        let intercept = mz - slope * mx;
        assert!((slope - 0.6).abs() < 0.01, "{slope}");
        assert!((intercept - 1.5).abs() < 0.05, "{intercept}");
    }

    #[test]
    fn beta_conditional_variance_tracks_law() {
        let (omega, alpha, beta, phi) = (0.05, 0.3, 0.6, 10.0);
        let spec = DgpSpec::beta_ar(omega, alpha, beta, phi);
        let s = simulate(&spec, 200_000, 31).unwrap();
        let y = s.values();
        let mut lambda = omega / (1.0 - alpha - beta);
        let mut pairs = Vec::with_capacity(y.len());
        for t in 1..y.len() {
            lambda = omega + alpha * y[t - 1] + beta * lambda;
            pairs.push((lambda, y[t]));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for chunk in pairs.chunks(pairs.len() / 5) {
            if chunk.len() < 1000 {
                continue;
            }
            let n = chunk.len() as f64;
            let implied: f64 = chunk.iter().map(|(l, _)| l * (1.0 - l) / (1.0 + phi)).sum::<f64>() / n;
            let resid: f64 = chunk.iter().map(|(l, y)| (y - l) * (y - l)).sum::<f64>() / n;
            assert!((resid / implied - 1.0).abs() < 0.1, "{resid} vs {implied}");
        }
    }

    #[test]
    fn rejects_nonstationary() {
        let spec = DgpSpec::new(Process::Inar {
            thinning: vec![ThinningSpec::Binomial { a: 0.6 }, ThinningSpec::Binomial { a: 0.5 }],
            innovation: Innovation::Poisson { omega: 1.0 },
        });
        assert!(matches!(simulate(&spec, 10, 0), Err(Error::NonStationary(_))));
        assert!(simulate(&DgpSpec::beta_ar(0.1, 0.5, 0.5, 3.0), 10, 0).is_err());
    }

    #[test]
    fn outlier_injection() {
        let flat = TimeSeries::new(vec![4.0; 4], SampleSpace::Counts).unwrap();
        assert_eq!(inject_outlier(&flat).unwrap().values(), flat.values());

        let s = TimeSeries::new(vec![2.0, 4.0, 6.0], SampleSpace::Counts).unwrap();
        let out = inject_outlier(&s).unwrap();
        assert_eq!(out.values(), &[2.0, 10.0, 6.0]);

        let spec = DgpSpec::inar1(ThinningSpec::Binomial { a: 0.5 }, 2.0);
        let s = simulate(&spec, 101, 1).unwrap();
        let out = inject_outlier(&s).unwrap();
        let diffs = s.values().iter().zip(out.values()).filter(|(a, b)| a != b).count();
        assert_eq!(diffs, 1);

        let unit = TimeSeries::new(vec![0.2, 0.4], SampleSpace::UnitInterval).unwrap();
        assert!(inject_outlier(&unit).is_err());
    }

    #[test]
    fn true_theta_layout() {
        let spec = DgpSpec::inar1(ThinningSpec::Binomial { a: 0.85 }, 3.0);
        assert_eq!(spec.burn_in, DEFAULT_BURN_IN);
        assert_eq!(spec.true_theta(), vec![3.0, 0.85, 3.0, 0.85 * 0.15]);
        assert_eq!(spec.family(), FilterFamily::INAR1);
    }
}

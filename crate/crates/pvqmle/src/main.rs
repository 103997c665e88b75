use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use pvqmle::application::{
    family_space, fit_with_se, parse_family, run_application, run_tests, write_application, CliEstimator,
};
use pvqmle::experiments::{
    run_mc, run_power_curve, variance_ratio_grid, write_mc, write_power, write_variance_ratios, McConfig, PowerConfig,
};
use pvqmle::io::{inline_or_file, load_csv, save_csv};
use pvqmle_core::dgp::{simulate, DgpSpec};
use pvqmle_core::{FilterFamily, FitOptions, RestrictionSpec, TimeSeries};

#[derive(Parser)]
#[command(name = "pvqmle", version, about = "Pseudo-variance QMLE for count and bounded time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a series from a DGP given as JSON (inline or a file path).
    Simulate {
        #[arg(long)]
        dgp: String,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one estimator and report estimates with sandwich standard errors.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        family: String,
        #[arg(long, default_value = "none")]
        restriction: String,
        #[arg(long, default_value = "pvqmle")]
        estimator: String,
        /// Map the data from [lo, hi] onto the unit interval, e.g. `-1,1`.
        #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
        rescale: Option<(f64, f64)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Upper bound of the free INAR variance slopes; `inf` removes it.
        #[arg(long, default_value_t = pvqmle_core::FitOptions::default().b_max)]
        b_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wald tests of restrictions at the unrestricted PVQMLE.
    Test {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        family: String,
        /// Restriction names; join components with `+` for a joint test.
        #[arg(long = "restriction", required = true, num_args = 1..)]
        restrictions: Vec<String>,
        #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
        rescale: Option<(f64, f64)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Upper bound of the free INAR variance slopes; `inf` removes it.
        #[arg(long, default_value_t = pvqmle_core::FitOptions::default().b_max)]
        b_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// log10 variance ratios of unrestricted versus restricted PVQMLE.
    Varratio {
        /// JSON list of `[a, omega]` pairs, inline or a file path.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 10_000)]
        tlong: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment from a JSON config.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Power curve of the equidispersion-of-thinning test.
    Power {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline on one series: fit, tests, restricted refits, residual ACF.
    App {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        family: String,
        #[arg(long = "restriction", num_args = 1..)]
        restrictions: Vec<String>,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
        rescale: Option<(f64, f64)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Upper bound of the free INAR variance slopes; `inf` removes it.
        #[arg(long, default_value_t = pvqmle_core::FitOptions::default().b_max)]
        b_max: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo < hi) {
        return Err("lo must be below hi".into());
    }
    Ok((lo, hi))
}

fn load(data: &PathBuf, family: FilterFamily, rescale: Option<(f64, f64)>) -> anyhow::Result<TimeSeries> {
    let series = match rescale {
        Some((lo, hi)) => load_csv(data, pvqmle_core::SampleSpace::Reals)?.rescale_to_unit(lo, hi)?,
        None => load_csv(data, family_space(family))?,
    };
    Ok(series)
}

fn emit(json: &impl serde::Serialize, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(json)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn opts(seed: u64, b_max: f64) -> anyhow::Result<FitOptions> {
    if !(b_max > 0.0) {
        bail!("--b-max must be positive");
    }
    Ok(FitOptions {
        seed,
        b_max,
        ..FitOptions::default()
    })
}

fn restrictions(family: FilterFamily, names: &[String]) -> anyhow::Result<Vec<RestrictionSpec>> {
    names
        .iter()
        .map(|n| RestrictionSpec::parse(family, n).with_context(|| format!("restriction {n:?}")))
        .collect()
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate { dgp, t, seed, out } => {
            let spec: DgpSpec = serde_json::from_str(&inline_or_file(&dgp)?).context("parsing --dgp")?;
            let series = simulate(&spec, t, seed)?;
            save_csv(&out, &series)?;
        }
        Command::Fit {
            data,
            family,
            restriction,
            estimator,
            rescale,
            seed,
            b_max,
            out,
        } => {
            let family = parse_family(&family)?;
            let series = load(&data, family, rescale)?;
            let restriction = RestrictionSpec::parse(family, &restriction)?;
            let (_, report) = fit_with_se(family, &series, CliEstimator::parse(&estimator)?, &restriction, &opts(seed, b_max)?)?;
            emit(&report, out.as_ref())?;
        }
        Command::Test {
            data,
            family,
            restrictions: names,
            rescale,
            seed,
            b_max,
            out,
        } => {
            let family = parse_family(&family)?;
            let series = load(&data, family, rescale)?;
            let specs = restrictions(family, &names)?;
            let (fit, tests) = run_tests(family, &series, &specs, &opts(seed, b_max)?)?;
            if !fit.converged {
                eprintln!("warning: the unrestricted fit did not converge");
            }
            emit(&tests, out.as_ref())?;
        }
        Command::Varratio { grid, tlong, seed, out } => {
            let grid: Vec<(f64, f64)> = serde_json::from_str(&inline_or_file(&grid)?).context("parsing --grid")?;
            let points = variance_ratio_grid(&grid, tlong, seed)?;
            write_variance_ratios(&points, &out)?;
        }
        Command::Mc { config, out_dir } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg: McConfig = serde_json::from_str(&text).context("parsing the Monte Carlo config")?;
            let result = run_mc(&cfg)?;
            write_mc(&result, &out_dir)?;
            if result.failures > 0 {
                eprintln!("{} fits or tests did not converge or failed", result.failures);
            }
        }
        Command::Power { config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg: PowerConfig = serde_json::from_str(&text).context("parsing the power config")?;
            write_power(&run_power_curve(&cfg)?, &out)?;
        }
        Command::App {
            data,
            family,
            restrictions: names,
            level,
            rescale,
            seed,
            b_max,
            out_dir,
        } => {
            if !(level > 0.0 && level < 1.0) {
                bail!("--level must lie in (0, 1)");
            }
            let family = parse_family(&family)?;
            let series = load(&data, family, rescale)?;
            let specs = restrictions(family, &names)?;
            let (report, fit) = run_application(family, &series, &specs, level, &opts(seed, b_max)?)?;
            write_application(&report, &fit, &series, &out_dir)?;
        }
    }
    Ok(())
}

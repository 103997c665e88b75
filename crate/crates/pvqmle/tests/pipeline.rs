use std::process::Command;

use proptest::prelude::*;
use pvqmle::application::{run_application, write_application};
use pvqmle::experiments::{run_mc, Estimator, EstimatorConfig, McConfig, TestConfig, Variants};
use pvqmle::io::{read_series, write_series};
use pvqmle_core::dgp::{simulate, DgpSpec, Innovation, Process, ThinningSpec};
use pvqmle_core::estimate::fit_pvqmle;
use pvqmle_core::inference::fit_covariance;
use pvqmle_core::{FilterFamily, FitOptions, RestrictionSpec, SampleSpace, TimeSeries};

proptest! {
    #[test]
    fn count_series_round_trip(values in proptest::collection::vec(0u64..10_000, 2..200)) {
        let s = TimeSeries::from_counts(&values).unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &s).unwrap();
        prop_assert_eq!(read_series(buf.as_slice(), SampleSpace::Counts).unwrap(), s);
    }

    #[test]
    fn unit_series_round_trip(values in proptest::collection::vec(1e-9f64..1.0 - 1e-9, 2..100)) {
        let s = TimeSeries::new(values, SampleSpace::UnitInterval).unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &s).unwrap();
        prop_assert_eq!(read_series(buf.as_slice(), SampleSpace::UnitInterval).unwrap(), s);
    }
}

fn small_config(base_seed: u64) -> McConfig {
    McConfig {
        dgp: DgpSpec::inar1(ThinningSpec::Binomial { a: 0.6 }, 2.0),
        sample_sizes: vec![300],
        n_reps: 200,
        estimators: vec![
            EstimatorConfig {
                estimator: Estimator::Pvqmle,
                restriction: "none".into(),
            },
            EstimatorConfig {
                estimator: Estimator::Clse,
                restriction: "none".into(),
            },
        ],
        tests: vec![TestConfig {
            restriction: "binomial".into(),
            levels: vec![0.05, 0.1],
        }],
        base_seed,
        variants: Variants::default(),
        persist_reps: false,
    }
}

#[test]
fn aggregate_invariants_and_seed_independence() {
    let first = run_mc(&small_config(0)).unwrap();
    let second = run_mc(&small_config(10_000)).unwrap();
    for r in [&first, &second] {
        for c in &r.estimates {
            assert!(c.rmse >= c.bias.abs());
            assert!(c.n_converged <= c.n_reps);
        }
        for c in &r.rejections {
            assert!((0.0..=1.0).contains(&c.rate));
        }
    }
    for (a, b) in first.estimates.iter().zip(&second.estimates) {
        let combined = (a.mc_se.powi(2) + b.mc_se.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 4.0 * combined, "{}: {} vs {}", a.coordinate, a.mean, b.mean);
    }
}

#[test]
fn mc_config_json_round_trip() {
    let json = r#"{
        "dgp": {"process": {"kind": "inar", "thinning": [{"kind": "neg_bin", "a": 0.75, "v": 3.0}],
                            "innovation": {"kind": "poisson", "omega": 1.0}}},
        "sample_sizes": [100],
        "n_reps": 3,
        "estimators": [{"estimator": "pvqmle", "restriction": "poisson"}],
        "tests": [{"restriction": "poisson"}],
        "variants": {"inject_outlier": true}
    }"#;
    let cfg: McConfig = serde_json::from_str(json).unwrap();
    assert_eq!(cfg.tests[0].levels, vec![0.01, 0.05, 0.10]);
    let back: McConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    let result = run_mc(&cfg).unwrap();
    assert_eq!(result.reps.len(), 3);
}

#[test]
fn geometric_application_round_trip() {
    let original = simulate(&DgpSpec::inar1(ThinningSpec::Geometric { a: 0.5 }, 2.0), 4000, 21).unwrap();
    let family = FilterFamily::INAR1;
    let geometric = RestrictionSpec::parse(family, "geometric").unwrap();
    let opts = FitOptions::default();
    let (report, fit) = run_application(family, &original, std::slice::from_ref(&geometric), 0.05, &opts).unwrap();
    assert_eq!(report.residual_acf.len(), 20);
    let dir = tempfile::tempdir().unwrap();
    write_application(&report, &fit, &original, dir.path()).unwrap();
    for f in ["report.json", "residual_acf.csv", "filtered.csv"] {
        assert!(dir.path().join(f).exists());
    }

    // Simulate from the fitted geometric model and refit.
    let restricted = fit_pvqmle(family, &original, Some(&geometric), None, &opts).unwrap();
    let theta = restricted.theta_hat.clone().unwrap();
    let (omega1, a, omega2) = (theta.get("omega1").unwrap(), theta.get("a").unwrap(), theta.get("omega2").unwrap());
    let innovation = if omega2 > omega1 {
        Innovation::NegBin {
            omega: omega1,
            size: omega1 * omega1 / (omega2 - omega1),
        }
    } else {
        Innovation::Poisson { omega: omega1 }
    };
    let fitted = DgpSpec::new(Process::Inar {
        thinning: vec![ThinningSpec::Geometric { a }],
        innovation,
    });
    let replay = simulate(&fitted, 4000, 22).unwrap();
    let refit = fit_pvqmle(family, &replay, Some(&geometric), None, &opts).unwrap();
    let cov = fit_covariance(&refit, &replay).unwrap();
    for (i, name) in cov.names.iter().enumerate() {
        let truth = theta.get(name).unwrap();
        let est = refit.reduced_hat[i];
        assert!((est - truth).abs() <= 2.0 * cov.se[i], "{name}: {est} vs {truth} (se {})", cov.se[i]);
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_pvqmle")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn cli_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).to_str().unwrap().to_string();
    let dgp = r#"{"process":{"kind":"inar","thinning":[{"kind":"binomial","a":0.5}],"innovation":{"kind":"poisson","omega":2.0}}}"#;
    cli(&["simulate", "--dgp", dgp, "--t", "500", "--seed", "4", "--out", &p("y.csv")]);

    cli(&["fit", "--data", &p("y.csv"), "--family", "inar1", "--out", &p("fit.json")]);
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["coefficients"].as_array().unwrap().len(), 4);
    assert_eq!(fit["convergence"]["converged"], true);

    let out = cli(&["fit", "--data", &p("y.csv"), "--family", "inar1", "--estimator", "mle"]);
    let mle: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(mle["estimator"], "mle_poisson_inar1");

    cli(&[
        "test", "--data", &p("y.csv"), "--family", "inar1", "--restriction", "binomial", "poisson", "--out", &p("t.json"),
    ]);
    let tests: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("t.json")).unwrap()).unwrap();
    assert_eq!(tests.as_array().unwrap().len(), 2);

    cli(&["varratio", "--grid", "[[0.5, 1.0]]", "--tlong", "2000", "--out", &p("vr.csv")]);
    assert!(std::fs::read_to_string(p("vr.csv")).unwrap().starts_with("a,omega,log10_ratio_a,log10_ratio_omega"));

    let cfg = r#"{"dgp":{"process":{"kind":"inar","thinning":[{"kind":"binomial","a":0.5}],"innovation":{"kind":"poisson","omega":2.0}}},
                 "sample_sizes":[100],"n_reps":4,"estimators":[{"estimator":"clse"}],"tests":[{"restriction":"binomial"}]}"#;
    std::fs::write(p("mc.json"), cfg).unwrap();
    for run in ["a", "b"] {
        cli(&["mc", "--config", &p("mc.json"), "--out-dir", &p(run)]);
    }
    for f in ["estimates.csv", "rejections.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["base_seed"], 0);

    let power = r#"{"a":0.75,"omega":1.0,"sample_sizes":[100],"pcts":[0.0,0.2],"n_reps":4}"#;
    std::fs::write(p("power.json"), power).unwrap();
    cli(&["power", "--config", &p("power.json"), "--out", &p("power.csv")]);
    assert_eq!(std::fs::read_to_string(p("power.csv")).unwrap().lines().count(), 3);

    cli(&["app", "--data", &p("y.csv"), "--family", "inar1", "--restriction", "binomial", "--out-dir", &p("app")]);
    assert!(dir.path().join("app/report.json").exists());
}

#[test]
fn cli_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "y\n1\n-2\n3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pvqmle"))
        .args(["fit", "--data", data.to_str().unwrap(), "--family", "inar1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));
}

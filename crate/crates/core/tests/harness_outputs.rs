use std::fs;
use std::process::Command;

use proptest::prelude::*;
use qhahn_core::harness::{read_xi_csv, run_tw_experiment, EmpiricalDistribution, ExperimentConfig};

/// `sup |F_hat - F|` evaluated at every sample and just below it, O(n^2).
fn ks_brute(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for &v in xs {
        let le = xs.iter().filter(|&&s| s <= v).count() as f64 / n;
        let lt = xs.iter().filter(|&&s| s < v).count() as f64 / n;
        d = d.max((le - f(v)).abs()).max((lt - f(v)).abs());
    }
    d
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

proptest! {
    #[test]
    fn ks_matches_brute_force(raw in prop::collection::vec(-40i32..40, 1..200)) {
        // coarse values force ties
        let xs: Vec<f64> = raw.iter().map(|&k| k as f64 / 8.0).collect();
        let fast = EmpiricalDistribution::new(&xs).ks(logistic);
        prop_assert!((fast - ks_brute(&xs, logistic)).abs() < 1e-15);
    }
}

fn config(dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"params":{{"q":0.2,"mu":0.4,"nu":0.3}},"theta":0.4,"c":0.5,"x_grid":[-1.0,0.0],
            "n_list":[20,60],"replicas":40,"seed":17,"out_dir":{:?}}}"#,
        dir.to_str().unwrap()
    ))
    .unwrap()
}

#[test]
fn outputs_are_byte_identical_across_runs_and_pools() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_tw_experiment(&config(a.path())).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    pool.install(|| run_tw_experiment(&config(b.path())).unwrap());
    for name in ["xi_N20.csv", "xi_N60.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn csv_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (ens, report) = run_tw_experiment(&config(dir.path())).unwrap();
    for s in &ens.per_n {
        let (xs, xis) = read_xi_csv(&dir.path().join(format!("xi_N{}.csv", s.n))).unwrap();
        assert_eq!(xs, s.positions);
        assert_eq!(xis, s.xi);
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 17);
    assert_eq!(summary["per_n"][1]["tau_realized"], report.per_n[1].tau_realized);
    assert!(summary["conditions"]["munu"].as_bool().unwrap());
}

fn qhahn(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qhahn")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn cli_exit_codes() {
    let (code, out) = qhahn(&["coeffs", "--q", "0.2", "--mu", "0.4", "--nu", "0.3", "--theta", "0.4"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["coefficients"]["kappa"].as_f64().unwrap() - 17.176184181360647).abs() < 1e-9);
    assert_eq!(qhahn(&["coeffs", "--q", "0.2", "--mu", "0.3", "--nu", "0.4", "--theta", "0.4"]).0, 3);
    assert_eq!(qhahn(&["verify", "--level", "qspecial"]).0, 0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"params":{"q":0.2,"mu":0.4,"nu":0.3},"theta":0.4,"n_list":[20],"replicas":10,"seed":1}"#)
        .unwrap();
    // too few replicas for a statistical run
    assert_eq!(qhahn(&["experiment", "--config", cfg.to_str().unwrap()]).0, 3);
    fs::write(&cfg, "{}").unwrap();
    assert_eq!(qhahn(&["experiment", "--config", cfg.to_str().unwrap()]).0, 3);
}

#[test]
fn cli_simulate_is_reproducible() {
    let args = [
        "simulate",
        "--q",
        "0.2",
        "--mu",
        "0.4",
        "--nu",
        "0.3",
        "--theta",
        "0.4",
        "--N",
        "30",
        "--replicas",
        "8",
        "--seed",
        "5",
    ];
    let (code, a) = qhahn(&args);
    assert_eq!(code, 0);
    assert_eq!(a, qhahn(&args).1);
    assert_eq!(a.lines().count(), 9);
    assert!(a.starts_with("replica,N,tau,X_N,xi\n0,30,515,"));
}

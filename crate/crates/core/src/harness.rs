//! Experiment orchestration: seeded ensembles, empirical distributions, the
//! Kolmogorov-Smirnov distance to `F_GUE`, law-of-large-numbers and
//! fluctuation-exponent checks, and the verification suite.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::asymptotics::{identity_checks, steep_descent_check, taylor_check, DescentContour};
use crate::dynamics::{
    jump_weights, measure_current, simulate_checkpoints, CurrentConfig, Gap, InitialCondition, TableCache,
    DEFAULT_TAIL_TOL,
};
use crate::error::{Error, Result};
use crate::fredholm::{f_gue, f_gue_via_contour, mellin_barnes_check, tw_table, TwTable};
use crate::qspecial::{q_binomial_theorem_check, QSeriesConfig};
use crate::scaling::{
    coefficients, kappa_derivative, kpz_quantities, scaling_maps, stationary_density_current, theta_from_kappa, xi_of,
    Conditions, ModelParams, ScalingCoefficients,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub q: f64,
    pub mu: f64,
    pub nu: f64,
}

/// Pass thresholds of the statistical checks. These are empirical budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest accepted KS distance at the reference size.
    pub ks_max: f64,
    /// Relative slack allowed when KS should not increase with `N`.
    pub ks_slack: f64,
    /// Largest accepted `|mean(xi_N) - E[TW]|`.
    pub mean_tol: f64,
    pub slope_min: f64,
    pub slope_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { ks_max: 0.10, ks_slack: 0.20, mean_tol: 0.15, slope_min: 0.25, slope_max: 0.42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ParamsConfig,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub x_grid: Vec<f64>,
    pub n_list: Vec<u64>,
    /// Replicas for every `N`, unless overridden per `N` below.
    pub replicas: u64,
    /// Optional per-`N` replica counts, aligned with `n_list`.
    #[serde(default)]
    pub replicas_per_n: Option<Vec<u64>>,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(self.params.q, self.params.mu, self.params.nu).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks the invariants that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.to_string()));
        match (self.theta, self.kappa) {
            (Some(_), Some(_)) | (None, None) => return cfg("exactly one of theta and kappa must be given"),
            _ => {}
        }
        if self.n_list.is_empty() || self.n_list[0] == 0 {
            return cfg("n_list must be nonempty with positive entries");
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return cfg("n_list must be strictly increasing");
        }
        if let Some(per) = &self.replicas_per_n {
            if per.len() != self.n_list.len() {
                return cfg("replicas_per_n must align with n_list");
            }
        }
        if self.replicas == 0 {
            return cfg("replicas must be positive");
        }
        self.model()?;
        Ok(())
    }

    /// `validate` plus the replica floor of the statistical subcommands.
    pub fn validate_statistical(&self, min_replicas: u64) -> Result<()> {
        self.validate()?;
        if (0..self.n_list.len()).any(|k| self.replicas_for(k) < min_replicas) {
            return Err(Error::Config(format!("statistical checks need at least {min_replicas} replicas per N")));
        }
        Ok(())
    }

    pub fn replicas_for(&self, k: usize) -> u64 {
        self.replicas_per_n.as_ref().map_or(self.replicas, |v| v[k])
    }

    pub fn theta(&self) -> Result<f64> {
        match (self.theta, self.kappa) {
            (Some(t), None) => Ok(t),
            (None, Some(k)) => theta_from_kappa(&self.model()?, k),
            _ => Err(Error::Config("exactly one of theta and kappa must be given".into())),
        }
    }
}

/// Sorted samples with the right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    pub samples: Vec<f64>,
    pub n: usize,
}

impl EmpiricalDistribution {
    pub fn new(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Self { n: s.len(), samples: s }
    }

    /// `#{samples <= x} / n`
    pub fn cdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.n as f64
    }

    /// `#{samples < x} / n`
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s < x) as f64 / self.n as f64
    }

    /// `sup_x |F_hat(x) - F(x)|` for a continuous `F`, evaluated on both sides
    /// of every jump so repeated values are handled.
    pub fn ks(&self, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.n as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.n {
            let v = self.samples[i];
            let mut j = i;
            while j < self.n && self.samples[j] == v {
                j += 1;
            }
            let fv = f(v);
            d = d.max((j as f64 / n - fv).abs()).max((i as f64 / n - fv).abs());
            i = j;
        }
        d
    }
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Samples of `X_N(tau(N,c))` for each `N`, replica by replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NSamples {
    pub n: u64,
    pub tau_requested: f64,
    pub tau_realized: u64,
    pub positions: Vec<i64>,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub params: ModelParams,
    pub coeffs: ScalingCoefficients,
    pub c: f64,
    pub seed: u64,
    pub conditions: Conditions,
    pub per_n: Vec<NSamples>,
    pub tail_hits: u64,
}

/// Simulates the ensemble of the config. Replica `r` is one trajectory of
/// `max{N : r < replicas(N)}` particles, read off at `(N, floor tau(N,c))`
/// for every `N` that uses replica `r`; labels above `N` never influence
/// `X_N`, so each marginal is exact. Replicas run in parallel and are
/// collected in replica order.
pub fn run_ensemble(config: &ExperimentConfig) -> Result<Ensemble> {
    config.validate()?;
    let params = config.model()?;
    let theta = config.theta()?;
    let coeffs = coefficients(&params, theta)?;
    let cache = TableCache::new(&params)?;
    let c = config.c;
    let taus: Vec<(f64, u64)> = config
        .n_list
        .iter()
        .map(|&n| {
            let t = scaling_maps(&coeffs, n, c, 0.0).tau;
            (t, t.max(0.0).floor() as u64)
        })
        .collect();
    let max_rep = (0..config.n_list.len()).map(|k| config.replicas_for(k)).max().unwrap();
    let runs = (0..max_rep)
        .into_par_iter()
        .map(|r| {
            let used: Vec<usize> = (0..config.n_list.len()).filter(|&k| r < config.replicas_for(k)).collect();
            let n_max = used.iter().map(|&k| config.n_list[k]).max().unwrap() as usize;
            let cps: Vec<(usize, u64)> = used.iter().map(|&k| (config.n_list[k] as usize, taus[k].1)).collect();
            let run = simulate_checkpoints(&cache, n_max, InitialCondition::Step, &cps, config.seed, r)?;
            Ok((used, run))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut per_n: Vec<NSamples> = config
        .n_list
        .iter()
        .zip(&taus)
        .map(|(&n, &(tr, t))| NSamples { n, tau_requested: tr, tau_realized: t, positions: vec![], xi: vec![] })
        .collect();
    let mut tail_hits = 0;
    for (used, run) in runs {
        tail_hits += run.tail_hits;
        for (slot, &k) in used.iter().enumerate() {
            let x = run.positions[slot];
            let s = &mut per_n[k];
            s.positions.push(x);
            s.xi.push(xi_of(&coeffs, x, s.n, c));
        }
    }
    Ok(Ensemble { params, coeffs, c, seed: config.seed, conditions: params.conditions(theta), per_n, tail_hits })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NSummary {
    pub n: u64,
    pub replicas: usize,
    pub tau_requested: f64,
    pub tau_realized: u64,
    pub mean: f64,
    pub sd: f64,
    pub ks: f64,
    pub ks_pass: bool,
    /// `P(xi_N <= x)` on the configured grid.
    pub cdf_on_grid: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwReport {
    pub version: &'static str,
    pub params: ModelParams,
    pub theta: f64,
    pub c: f64,
    pub seed: u64,
    pub conditions: Conditions,
    pub tolerances: Tolerances,
    pub tw_mean: f64,
    pub per_n: Vec<NSummary>,
    /// KS does not grow by more than the slack between consecutive `N`.
    pub ks_nonincreasing: bool,
    pub tail_hits: u64,
    pub pass: bool,
}

pub fn tw_summary(ens: &Ensemble, table: &TwTable, x_grid: &[f64], tol: &Tolerances) -> TwReport {
    let per_n: Vec<NSummary> = ens
        .per_n
        .iter()
        .map(|s| {
            let (mean, sd) = mean_sd(&s.xi);
            let emp = EmpiricalDistribution::new(&s.xi);
            let ks = emp.ks(|x| table.cdf(x));
            NSummary {
                n: s.n,
                replicas: s.xi.len(),
                tau_requested: s.tau_requested,
                tau_realized: s.tau_realized,
                mean,
                sd,
                ks,
                ks_pass: ks <= tol.ks_max,
                cdf_on_grid: x_grid.iter().map(|&x| (x, emp.cdf(x))).collect(),
            }
        })
        .collect();
    let ks_nonincreasing = per_n.windows(2).all(|w| w[1].ks <= w[0].ks * (1.0 + tol.ks_slack));
    let pass = ks_nonincreasing && per_n.last().is_some_and(|s| s.ks_pass);
    TwReport {
        version: env!("CARGO_PKG_VERSION"),
        params: ens.params,
        theta: ens.coeffs.theta,
        c: ens.c,
        seed: ens.seed,
        conditions: ens.conditions,
        tolerances: *tol,
        tw_mean: table.moments().0,
        per_n,
        ks_nonincreasing,
        tail_hits: ens.tail_hits,
        pass,
    }
}

/// Writes `xi_N<k>.csv` for every `N` (flushed per file) and `summary.json`.
pub fn write_outputs(dir: &Path, ens: &Ensemble, report: &TwReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    for s in &ens.per_n {
        let mut out = String::from("replica,X_N,xi\n");
        for (r, (x, xi)) in s.positions.iter().zip(&s.xi).enumerate() {
            writeln!(out, "{r},{x},{xi}").unwrap();
        }
        fs::write(dir.join(format!("xi_N{}.csv", s.n)), out)?;
    }
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(())
}

/// Reads back a `xi_N<k>.csv` file as `(X_N, xi)` columns.
pub fn read_xi_csv(path: &Path) -> Result<(Vec<i64>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut xis = Vec::new();
    for line in text.lines().skip(1) {
        let mut it = line.split(',');
        let bad = || Error::Io(format!("malformed row {line:?}"));
        it.next().ok_or_else(bad)?;
        xs.push(it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?);
        xis.push(it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?);
    }
    Ok((xs, xis))
}

/// Full experiment: ensemble, per-`N` statistics against `F_GUE`, and the
/// output files when `out_dir` is set.
pub fn run_tw_experiment(config: &ExperimentConfig) -> Result<(Ensemble, TwReport)> {
    let ens = run_ensemble(config)?;
    let report = tw_summary(&ens, tw_table(), &config.x_grid, &config.tolerances);
    if let Some(dir) = &config.out_dir {
        write_outputs(dir, &ens, &report)?;
    }
    Ok((ens, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnRow {
    pub n: u64,
    pub replicas: usize,
    pub mean_x_over_n: f64,
    pub stderr: f64,
    pub target: f64,
    pub allowance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnReport {
    pub rows: Vec<LlnRow>,
    pub pass: bool,
}

/// `|mean(X_N/N) - (f-1)| < 3 SE + 2|chi^{1/3}/log q| N^{-2/3}` on the first
/// `replicas` samples of every `N`.
pub fn lln_from(ens: &Ensemble, replicas: usize) -> Result<LlnReport> {
    if ens.c != 0.0 {
        return Err(Error::Config("the law of large numbers check needs c = 0".into()));
    }
    // recomputed here rather than taken from the ensemble
    let co = coefficients(&ens.params, ens.coeffs.theta)?;
    let target = co.f - 1.0;
    let scale = 2.0 * (co.chi.cbrt() / co.log_q).abs();
    let rows: Vec<LlnRow> = ens
        .per_n
        .iter()
        .map(|s| {
            let k = replicas.min(s.positions.len());
            let v: Vec<f64> = s.positions[..k].iter().map(|&x| x as f64 / s.n as f64).collect();
            let (mean, sd) = mean_sd(&v);
            let stderr = sd / (k as f64).sqrt();
            let allowance = 3.0 * stderr + scale * (s.n as f64).powf(-2.0 / 3.0);
            LlnRow {
                n: s.n,
                replicas: k,
                mean_x_over_n: mean,
                stderr,
                target,
                allowance,
                pass: (mean - target).abs() < allowance,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(LlnReport { rows, pass })
}

pub fn lln_check(config: &ExperimentConfig) -> Result<LlnReport> {
    config.validate_statistical(100)?;
    if config.c != 0.0 {
        return Err(Error::Config("the law of large numbers check needs c = 0".into()));
    }
    lln_from(&run_ensemble(config)?, usize::MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub sds: Vec<(u64, f64)>,
    /// `exp` of the intercept with the slope pinned to 1/3.
    pub prefactor_at_one_third: f64,
    /// `|chi^{1/3}/log q| sd(TW)`
    pub prefactor_predicted: f64,
    pub pass: bool,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

fn sd_of(xs: &[i64], idx: impl Iterator<Item = usize>) -> f64 {
    let v: Vec<f64> = idx.map(|i| xs[i] as f64).collect();
    mean_sd(&v).1
}

/// Least squares of `log sd(X_N)` on `log N` with a percentile bootstrap CI
/// from `resamples` replica resamples (shared across `N`, since one
/// trajectory serves several `N`).
pub fn exponent_fit_from(
    ens: &Ensemble,
    table: &TwTable,
    resamples: usize,
    seed: u64,
    tol: &Tolerances,
) -> ExponentFit {
    let logn: Vec<f64> = ens.per_n.iter().map(|s| (s.n as f64).ln()).collect();
    let sds: Vec<f64> = ens.per_n.iter().map(|s| sd_of(&s.positions, 0..s.positions.len())).collect();
    let logsd: Vec<f64> = sds.iter().map(|s| s.ln()).collect();
    let (slope, intercept, r2) = least_squares(&logn, &logsd);
    let reps = ens.per_n.iter().map(|s| s.positions.len()).min().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes: Vec<f64> = (0..resamples)
        .map(|_| {
            let idx: Vec<usize> = (0..reps).map(|_| rng.gen_range(0..reps)).collect();
            let ys: Vec<f64> = ens.per_n.iter().map(|s| sd_of(&s.positions, idx.iter().copied()).ln()).collect();
            least_squares(&logn, &ys).0
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    let pct = |p: f64| slopes[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let pinned = logsd.iter().zip(&logn).map(|(s, n)| s - n / 3.0).sum::<f64>() / logn.len() as f64;
    let (m1, m2) = table.moments();
    let co = ens.coeffs;
    ExponentFit {
        slope,
        intercept,
        r2,
        ci_low: pct(0.025),
        ci_high: pct(0.975),
        sds: ens.per_n.iter().map(|s| s.n).zip(sds).collect(),
        prefactor_at_one_third: pinned.exp(),
        prefactor_predicted: (co.chi.cbrt() / co.log_q).abs() * (m2 - m1 * m1).sqrt(),
        pass: (tol.slope_min..=tol.slope_max).contains(&slope),
    }
}

pub fn exponent_fit(config: &ExperimentConfig) -> Result<ExponentFit> {
    config.validate_statistical(2000)?;
    let (lo, hi) = (config.n_list[0], *config.n_list.last().unwrap());
    if config.n_list.len() < 4 || hi < 10 * lo {
        return Err(Error::Config("exponent fit needs at least 4 values of N spanning a decade".into()));
    }
    let ens = run_ensemble(config)?;
    Ok(exponent_fit_from(&ens, tw_table(), 1000, config.seed, &config.tolerances))
}

// ---------------------------------------------------------------------------
// Verification suite

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Numerical,
    Statistical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub category: Category,
    pub pass: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub version: &'static str,
    pub level: Level,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl VerifyReport {
    /// 0 pass, 1 statistical failure, 2 numerical failure.
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().any(|c| !c.pass && c.category == Category::Numerical) {
            2
        } else if self.checks.iter().any(|c| !c.pass) {
            1
        } else {
            0
        }
    }
}

pub fn reference_params() -> ModelParams {
    ModelParams::new(0.2, 0.4, 0.3).expect("valid parameters")
}

pub const REFERENCE_THETA: f64 = 0.4;

fn record(checks: &mut Vec<CheckResult>, name: &str, category: Category, outcome: Result<(bool, Value)>) {
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, json!({ "error": e.to_string() })));
    checks.push(CheckResult { name: name.to_string(), category, pass, detail });
}

/// Parameters with `q <= nu < mu <= 1/2` and `theta` below its bound.
pub fn draw_valid_params(rng: &mut ChaCha8Rng) -> (ModelParams, f64) {
    let q = rng.gen_range(0.05..0.45);
    let nu = rng.gen_range(q..0.48);
    let mu = rng.gen_range(nu + 0.01..=0.5);
    let p = ModelParams::new(q, mu, nu).expect("drawn in range");
    let theta = rng.gen_range(0.02..0.98 * p.theta_bound().min(3.0));
    (p, theta)
}

pub fn verify_qspecial(checks: &mut Vec<CheckResult>) {
    record(
        checks,
        "qspecial.q_binomial",
        Category::Numerical,
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let q = rng.gen_range(0.05..0.95);
                let cfg = QSeriesConfig::with_q(q)?;
                worst = worst.max(q_binomial_theorem_check(rng.gen_range(0.0..0.99), rng.gen_range(0.0..0.95), &cfg)?);
            }
            Ok((worst < 1e-10, json!({ "max_residual": worst })))
        })(),
    );
}

pub fn verify_quick(checks: &mut Vec<CheckResult>) {
    let p = reference_params();
    verify_qspecial(checks);

    record(
        checks,
        "scaling.identities",
        Category::Numerical,
        (|| {
            let k = kpz_quantities(&p, REFERENCE_THETA)?;
            let c = coefficients(&p, REFERENCE_THETA)?;
            let h = 1e-5;
            let fd = (coefficients(&p, REFERENCE_THETA + h)?.kappa - coefficients(&p, REFERENCE_THETA - h)?.kappa)
                / (2.0 * h);
            let dk = (fd - kappa_derivative(&c)).abs() / kappa_derivative(&c).abs();
            Ok((
                k.coeff_check_rel < 1e-9 && dk < 1e-6 && c.chi > 0.0,
                json!({ "kpz_rel": k.coeff_check_rel, "dkappa_rel": dk, "chi": c.chi }),
            ))
        })(),
    );

    record(
        checks,
        "asymptotics.reference",
        Category::Numerical,
        (|| {
            let c = coefficients(&p, REFERENCE_THETA)?;
            let id = identity_checks(&p, &c, &p.series())?;
            let t = taylor_check(&p, &c, 0.0, 0.0, 1e-3)?;
            let dc = steep_descent_check(&p, &c, DescentContour::C, 4096)?.monotone;
            let dd = steep_descent_check(&p, &c, DescentContour::D, 4096)?.monotone;
            let two_chi = 2.0 * c.chi;
            let pass = id.f_identity_residual < 1e-8
                && id.one_identity_residual < 1e-8
                && t.d1.abs() < 1e-6 * two_chi
                && t.d2.abs() < 1e-6 * two_chi
                && t.d3_residual < 1e-6
                && dc
                && dd;
            Ok((pass, json!({ "identities": id, "taylor": t, "descent_c": dc, "descent_d": dd })))
        })(),
    );

    record(
        checks,
        "asymptotics.sweep",
        Category::Numerical,
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let mut failures = 0;
            let mut worst_id: f64 = 0.0;
            for _ in 0..20 {
                let (q, theta) = draw_valid_params(&mut rng);
                let c = coefficients(&q, theta)?;
                let id = identity_checks(&q, &c, &q.series())?;
                worst_id = worst_id.max(id.f_identity_residual).max(id.one_identity_residual);
                for kind in [DescentContour::C, DescentContour::D] {
                    if !steep_descent_check(&q, &c, kind, 1024)?.monotone {
                        failures += 1;
                    }
                }
            }
            Ok((
                failures == 0 && worst_id < 1e-8,
                json!({ "descent_failures": failures, "max_identity_residual": worst_id }),
            ))
        })(),
    );

    record(
        checks,
        "dynamics.normalization",
        Category::Numerical,
        (|| {
            let mut worst: f64 = 0.0;
            for m in [Gap::Finite(0), Gap::Finite(7), Gap::Finite(50), Gap::Infinite] {
                let t = jump_weights(&p, m, DEFAULT_TAIL_TOL)?;
                worst = worst.max((t.weights.iter().sum::<f64>() + t.tail_mass - 1.0).abs());
            }
            Ok((worst < 1e-12, json!({ "max_residual": worst })))
        })(),
    );

    record(
        checks,
        "dynamics.stationary",
        Category::Statistical,
        (|| {
            let alpha = p.q.powf(REFERENCE_THETA);
            let m = measure_current(&p, alpha, &CurrentConfig { n_sites: 500, n_steps: 100, replicas: 32, seed: 3 })?;
            let pass =
                (m.rho_hat - m.rho_exact).abs() < 3.0 * m.stderr_rho && (m.j_hat - m.j_exact).abs() < 3.0 * m.stderr_j;
            Ok((pass, serde_json::to_value(m).unwrap()))
        })(),
    );

    record(
        checks,
        "fredholm.tw_chain",
        Category::Numerical,
        (|| {
            let c = coefficients(&p, REFERENCE_THETA)?;
            let mut worst: f64 = 0.0;
            for x in [-3.0, 0.0, 2.0] {
                let f = f_gue(x, 60)?;
                worst = worst.max((f - f_gue(x, 120)?).abs()).max((f - f_gue_via_contour(x, 0.0, &c, 16)?).abs());
            }
            Ok((worst < 1e-6, json!({ "max_gap": worst })))
        })(),
    );

    record(
        checks,
        "fredholm.q_laplace_identity",
        Category::Numerical,
        (|| {
            let mut rows = Vec::new();
            let mut pass = true;
            for (n, tau, tol) in [(1, 0, 1e-6), (1, 5, 1e-6), (2, 3, 1e-5)] {
                let m = mellin_barnes_check(&p, n, tau, -0.7, None, (48, 16))?;
                pass &= m.gap < tol;
                rows.push(m);
            }
            Ok((pass, serde_json::to_value(rows).unwrap()))
        })(),
    );
}

/// The shared ensemble design of the statistical checks: 5000 replicas for
/// `N` in `{250, 500, 1000, 2000}` and 2000 at `N = 4000`.
pub fn acceptance_ensemble_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        params: ParamsConfig { q: 0.2, mu: 0.4, nu: 0.3 },
        theta: Some(REFERENCE_THETA),
        kappa: None,
        c: 0.0,
        x_grid: vec![-3.0, -2.0, -1.0, 0.0, 1.0],
        n_list: vec![250, 500, 1000, 2000, 4000],
        replicas: 2000,
        replicas_per_n: Some(vec![5000, 5000, 5000, 5000, 2000]),
        seed,
        out_dir: None,
        tolerances: Tolerances::default(),
    }
}

pub fn verify_full(checks: &mut Vec<CheckResult>) {
    verify_quick(checks);
    let cfg = acceptance_ensemble_config(2024);
    let ens = match run_ensemble(&cfg) {
        Ok(e) => e,
        Err(e) => {
            record(checks, "harness.ensemble", Category::Numerical, Err(e));
            return;
        }
    };
    record(
        checks,
        "harness.lln",
        Category::Statistical,
        (|| {
            let r = lln_from(&ens, 100)?;
            Ok((r.pass, serde_json::to_value(r).unwrap()))
        })(),
    );
    let table = tw_table();
    let trimmed = trim_to(&ens, 2000);
    let fit = exponent_fit_from(&trimmed, table, 1000, cfg.seed, &cfg.tolerances);
    record(checks, "harness.exponent", Category::Statistical, Ok((fit.pass, serde_json::to_value(fit).unwrap())));
    let rep = tw_summary(&ens, table, &cfg.x_grid, &cfg.tolerances);
    record(
        checks,
        "harness.tracy_widom",
        Category::Statistical,
        Ok((tw_criteria(&rep).0, serde_json::to_value(rep).unwrap())),
    );
}

/// The first `k` replicas of every `N`.
pub fn trim_to(ens: &Ensemble, k: usize) -> Ensemble {
    let mut out = ens.clone();
    for s in &mut out.per_n {
        s.positions.truncate(k);
        s.xi.truncate(k);
    }
    out
}

/// KS at `N = 2000` within budget, KS not increasing along `{250, 1000, 4000}`
/// and the sample mean at `N = 2000` close to the `F_GUE` mean.
pub fn tw_criteria(rep: &TwReport) -> (bool, Value) {
    let get = |n: u64| rep.per_n.iter().find(|s| s.n == n);
    let (Some(a), Some(b), Some(c), Some(d)) = (get(250), get(1000), get(2000), get(4000)) else {
        return (false, json!({ "error": "missing N" }));
    };
    let tol = rep.tolerances;
    let ks_ok = c.ks <= tol.ks_max;
    let mono = b.ks <= a.ks * (1.0 + tol.ks_slack) && d.ks <= b.ks * (1.0 + tol.ks_slack);
    let mean_gap = (c.mean - rep.tw_mean).abs();
    let pass = ks_ok && mono && mean_gap < tol.mean_tol;
    (
        pass,
        json!({ "ks_2000": c.ks, "ks_250": a.ks, "ks_1000": b.ks, "ks_4000": d.ks, "mean_2000": c.mean, "tw_mean": rep.tw_mean, "mean_gap": mean_gap }),
    )
}

pub fn verify_all(level: Level) -> VerifyReport {
    let mut checks = Vec::new();
    match level {
        Level::Quick => verify_quick(&mut checks),
        Level::Full => verify_full(&mut checks),
    }
    let pass = checks.iter().all(|c| c.pass);
    VerifyReport { version: env!("CARGO_PKG_VERSION"), level, checks, pass }
}

/// Exact stationary density at `alpha` (re-exported for reports).
pub fn stationary_targets(params: &ModelParams, alpha: f64) -> Result<(f64, f64)> {
    let s = stationary_density_current(params, alpha)?;
    Ok((s.rho, s.j))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            params: ParamsConfig { q: 0.2, mu: 0.4, nu: 0.3 },
            theta: Some(0.4),
            kappa: None,
            c: 0.0,
            x_grid: vec![0.0],
            n_list: vec![20, 40],
            replicas: 30,
            replicas_per_n: None,
            seed: 9,
            out_dir: None,
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn config_validation() {
        assert!(small_config().validate().is_ok());
        let mut c = small_config();
        c.kappa = Some(20.0);
        assert!(c.validate().unwrap_err().is_config());
        c.theta = None;
        assert!(c.validate().is_ok());
        let mut c = small_config();
        c.n_list = vec![40, 40];
        assert!(c.validate().is_err());
        c.n_list = vec![0, 4];
        assert!(c.validate().is_err());
        assert!(small_config().validate_statistical(100).is_err());
        let json =
            r#"{"params":{"q":0.2,"mu":0.4,"nu":0.3},"theta":0.4,"n_list":[10],"replicas":5,"seed":1,"bogus":1}"#;
        assert!(ExperimentConfig::from_json(json).unwrap_err().is_config());
        let json = r#"{"params":{"q":0.2,"mu":0.4,"nu":0.3},"theta":0.4,"n_list":[10],"replicas":5,"seed":1}"#;
        assert_eq!(ExperimentConfig::from_json(json).unwrap().tolerances, Tolerances::default());
    }

    #[test]
    fn empirical_cdf_and_ties() {
        let e = EmpiricalDistribution::new(&[3.0, 1.0, 2.0, 2.0]);
        assert_eq!(e.cdf(0.5), 0.0);
        assert_eq!(e.cdf(2.0), 0.75);
        assert_eq!(e.cdf_left(2.0), 0.25);
        assert_eq!(e.cdf(3.0), 1.0);
        // uniform CDF on [0, 4]: the jump at 2 goes from 1/4 to 3/4 against 1/2
        let d = e.ks(|x| (x / 4.0).clamp(0.0, 1.0));
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ensemble_is_reproducible_and_thread_count_independent() {
        let cfg = small_config();
        let a = run_ensemble(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_ensemble(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.per_n[0].positions.len(), 30);
        assert_eq!(a.per_n[1].tau_realized, (a.coeffs.kappa * 40.0).floor() as u64);
    }

    #[test]
    fn per_n_replicas_share_trajectories() {
        let mut cfg = small_config();
        cfg.replicas_per_n = Some(vec![50, 30]);
        let ens = run_ensemble(&cfg).unwrap();
        assert_eq!(ens.per_n[0].positions.len(), 50);
        assert_eq!(ens.per_n[1].positions.len(), 30);
        let base = run_ensemble(&small_config()).unwrap();
        assert_eq!(&ens.per_n[0].positions[..30], &base.per_n[0].positions[..]);
    }

    #[test]
    fn lln_rejects_nonzero_c() {
        let mut cfg = small_config();
        cfg.c = 0.5;
        let ens = run_ensemble(&cfg).unwrap();
        assert!(lln_from(&ens, 10).unwrap_err().is_config());
    }

    #[test]
    fn least_squares_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 1.0).collect();
        let (s, i, r2) = least_squares(&x, &y);
        assert!((s - 0.5).abs() < 1e-15 && (i + 1.0).abs() < 1e-15 && (r2 - 1.0).abs() < 1e-15);
    }
}

//! Command-line front end. Exit codes: 0 success, 1 statistical failure,
//! 2 numerical failure, 3 configuration error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use qhahn_core::asymptotics::{steep_descent_check, DescentContour};
use qhahn_core::dynamics::{measure_current, simulate, CurrentConfig, InitialCondition, TableCache};
use qhahn_core::fredholm::{f_gue, mellin_barnes_check};
use qhahn_core::harness::{
    exponent_fit, lln_check, run_tw_experiment, verify_all, verify_qspecial, ExperimentConfig, Level, VerifyReport,
};
use qhahn_core::scaling::{
    coefficients, macroscopic_curve, scaling_maps, theta_bound, theta_from_kappa, xi_of, ModelParams,
};
use qhahn_core::{Error, Result};

#[derive(Parser)]
#[command(name = "qhahn", version, about = "q-Hahn TASEP: scaling coefficients, simulation and Tracy-Widom checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Copy)]
struct Params {
    #[arg(long)]
    q: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    nu: f64,
}

impl Params {
    fn model(self) -> Result<ModelParams> {
        ModelParams::new(self.q, self.mu, self.nu).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ContourArg {
    C,
    D,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyLevel {
    Quick,
    Full,
    #[value(hide = true)]
    Qspecial,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Tw,
    Lln,
    Exponent,
}

#[derive(Subcommand)]
enum Command {
    /// Scaling coefficients and parameter conditions as JSON.
    Coeffs {
        #[command(flatten)]
        params: Params,
        #[arg(long, conflicts_with = "kappa", required_unless_present = "kappa")]
        theta: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Macroscopic limit shape as CSV `theta,x,y`.
    Curve {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        theta_min: f64,
        #[arg(long)]
        theta_max: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// The upper bound on theta as a function of q, as CSV.
    ThetaBound {
        #[arg(long, default_value_t = 0.01)]
        q_min: f64,
        #[arg(long, default_value_t = 0.99)]
        q_max: f64,
        #[arg(long, default_value_t = 99)]
        points: usize,
    },
    /// Samples of `X_N(tau)` and the rescaled `xi_N` as CSV.
    Simulate {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        c: f64,
        #[arg(long = "n", alias = "N")]
        n: u64,
        #[arg(long, default_value_t = 100)]
        replicas: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `step` or `stationary:ALPHA`
        #[arg(long, default_value = "step")]
        ic: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Density and current under the stationary measure, as JSON.
    Stationary {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        sites: usize,
        #[arg(long, default_value_t = 200)]
        steps: u64,
        #[arg(long, default_value_t = 16)]
        replicas: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Profile of `Re f0` along a steep-descent contour as CSV.
    Descent {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 2048)]
        grid: usize,
        #[arg(long, value_enum, default_value = "c")]
        contour: ContourArg,
    },
    /// `F_GUE` on a grid as CSV.
    TwCdf {
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
        x_min: f64,
        #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
        x_max: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(long, default_value_t = 60)]
        order: usize,
    },
    /// Compares the exact q-Laplace transform with its Fredholm determinant.
    FredholmCheck {
        #[command(flatten)]
        params: Params,
        #[arg(long = "n", alias = "N")]
        n: usize,
        #[arg(long)]
        tau: u64,
        #[arg(long, allow_negative_numbers = true)]
        zeta: f64,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 48)]
        nodes: usize,
        #[arg(long, default_value_t = 16)]
        panel_order: usize,
    },
    /// Runs an experiment described by a JSON config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "tw")]
        kind: ExperimentKind,
    },
    /// Runs the verification suite and writes a JSON report.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: VerifyLevel,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_ic(s: &str) -> Result<InitialCondition> {
    if s == "step" {
        return Ok(InitialCondition::Step);
    }
    s.strip_prefix("stationary:")
        .and_then(|a| a.parse().ok())
        .map(|alpha| InitialCondition::Stationary { alpha })
        .ok_or_else(|| Error::Config(format!("unknown initial condition {s:?}")))
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(hi > lo) {
        return Err(Error::Config("need at least 2 points and max > min".into()));
    }
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Coeffs { params, theta, kappa } => {
            let p = params.model()?;
            let theta = match (theta, kappa) {
                (Some(t), _) => t,
                (None, Some(k)) => theta_from_kappa(&p, k)?,
                (None, None) => unreachable!(),
            };
            let c = coefficients(&p, theta)?;
            println!("{}", to_json(&json!({ "params": p, "coefficients": c, "conditions": p.conditions(theta) })));
        }
        Command::Curve { params, theta_min, theta_max, points } => {
            let p = params.model()?;
            let curve = macroscopic_curve(&p, &grid(theta_min, theta_max, points)?)?;
            let mut out = String::from("theta,x,y\n");
            writeln!(out, "0,{},{}", curve.theta_to_zero.0, curve.theta_to_zero.1).unwrap();
            for pt in &curve.points {
                writeln!(out, "{},{},{}", pt.theta, pt.x, pt.y).unwrap();
            }
            writeln!(out, "inf,{},{}", curve.theta_to_infinity.0, curve.theta_to_infinity.1).unwrap();
            print!("{out}");
        }
        Command::ThetaBound { q_min, q_max, points } => {
            if !(q_min > 0.0 && q_max < 1.0) {
                return Err(Error::Config("q range must lie inside (0,1)".into()));
            }
            println!("q,theta_bound");
            for q in grid(q_min, q_max, points)? {
                println!("{q},{}", theta_bound(q));
            }
        }
        Command::Simulate { params, theta, c, n, replicas, seed, ic, out } => {
            let p = params.model()?;
            let ic = parse_ic(&ic)?;
            if n == 0 || replicas == 0 {
                return Err(Error::Config("N and replicas must be positive".into()));
            }
            let co = coefficients(&p, theta)?;
            let tau = scaling_maps(&co, n, c, 0.0).tau.max(0.0).floor() as u64;
            let cache = TableCache::new(&p)?;
            let xs = (0..replicas)
                .into_par_iter()
                .map(|r| simulate(&cache, n as usize, tau, ic, seed, r).map(|s| s.x_n))
                .collect::<Result<Vec<_>>>()?;
            let mut text = String::from("replica,N,tau,X_N,xi\n");
            for (r, x) in xs.iter().enumerate() {
                writeln!(text, "{r},{n},{tau},{x},{}", xi_of(&co, *x, n, c)).unwrap();
            }
            emit(&out, &text)?;
        }
        Command::Stationary { params, alpha, sites, steps, replicas, seed } => {
            let p = params.model()?;
            let m = measure_current(&p, alpha, &CurrentConfig { n_sites: sites, n_steps: steps, replicas, seed })?;
            println!("{}", to_json(&m));
        }
        Command::Descent { params, theta, grid, contour } => {
            let p = params.model()?;
            let co = coefficients(&p, theta)?;
            let kind = match contour {
                ContourArg::C => DescentContour::C,
                ContourArg::D => DescentContour::D,
            };
            let rep = steep_descent_check(&p, &co, kind, grid)?;
            let mut out = String::from("param,Re_f0,Im_f0\n");
            for s in &rep.profile {
                writeln!(out, "{},{},{}", s.param, s.re_f0, s.im_f0).unwrap();
            }
            print!("{out}");
            let cond = p.conditions(theta);
            if !rep.monotone {
                eprintln!("profile is not monotone");
                if cond.munu && cond.theta_ok {
                    return Ok(2);
                }
            }
        }
        Command::TwCdf { x_min, x_max, step, order } => {
            if !(step > 0.0) || x_max < x_min {
                return Err(Error::Config("need step > 0 and x_max >= x_min".into()));
            }
            let m = ((x_max - x_min) / step + 1e-9).floor() as usize;
            let xs: Vec<f64> = (0..=m).map(|i| x_min + step * i as f64).collect();
            let rows =
                xs.par_iter().map(|&x| Ok((x, f_gue(x, order)?, f_gue(x, 2 * order)?))).collect::<Result<Vec<_>>>()?;
            let gap = rows.iter().map(|r| (r.1 - r.2).abs()).fold(0.0, f64::max);
            println!("# order={order} doubled_order_gap={gap:e}");
            println!("x,F_GUE");
            for (x, f, _) in rows {
                println!("{x},{f}");
            }
        }
        Command::FredholmCheck { params, n, tau, zeta, radius, nodes, panel_order } => {
            let p = params.model()?;
            let m = mellin_barnes_check(&p, n, tau, zeta, radius, (nodes, panel_order))?;
            println!("{}", to_json(&m));
        }
        Command::Experiment { config, kind } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let pass = match kind {
                ExperimentKind::Tw => {
                    cfg.validate_statistical(100)?;
                    let (_, rep) = run_tw_experiment(&cfg)?;
                    println!("{}", to_json(&rep));
                    rep.pass
                }
                ExperimentKind::Lln => {
                    let rep = lln_check(&cfg)?;
                    println!("{}", to_json(&rep));
                    rep.pass
                }
                ExperimentKind::Exponent => {
                    let fit = exponent_fit(&cfg)?;
                    println!("{}", to_json(&fit));
                    fit.pass
                }
            };
            return Ok(if pass { 0 } else { 1 });
        }
        Command::Verify { level, report } => {
            let rep = match level {
                VerifyLevel::Quick => verify_all(Level::Quick),
                VerifyLevel::Full => verify_all(Level::Full),
                VerifyLevel::Qspecial => {
                    let mut checks = Vec::new();
                    verify_qspecial(&mut checks);
                    let pass = checks.iter().all(|c| c.pass);
                    VerifyReport { version: env!("CARGO_PKG_VERSION"), level: Level::Quick, checks, pass }
                }
            };
            for c in &rep.checks {
                eprintln!("{:<32} {}", c.name, if c.pass { "pass" } else { "FAIL" });
            }
            emit(&report, &(to_json(&rep) + "\n"))?;
            return Ok(rep.exit_code() as u8);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 3 } else { 2 })
        }
    }
}

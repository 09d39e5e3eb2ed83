//! The product-form stationary measure and current measurements under it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qspecial::{log_q_pochhammer_real, q_digamma_at_base};
use crate::scaling::{stationary_density_current, ModelParams};

use super::rng::RngStream;
use super::table::{Gap, JumpTable, TableCache, DEFAULT_TAIL_TOL};

/// `P(G = k) = (alpha;q)_inf / (alpha nu;q)_inf * (nu;q)_k / (q;q)_k * alpha^k`,
/// truncated once the remaining mass is certified below `tail_tol`.
pub fn gap_law_table(params: &ModelParams, alpha: f64, tail_tol: f64) -> Result<JumpTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let cfg = params.series();
    let (q, nu) = (params.q, params.nu);
    let mut log_p = log_q_pochhammer_real(alpha, &cfg)? - log_q_pochhammer_real(alpha * nu, &cfg)?;
    let mut weights = Vec::new();
    let mut qk = 1.0;
    loop {
        let p = log_p.exp();
        weights.push(p);
        // p_{k+1}/p_k = alpha (1 - nu q^k) / (1 - q^{k+1}) <= alpha / (1 - q^{k+1})
        let r = alpha / (1.0 - qk * q);
        if r < 1.0 {
            let tail = p * r / (1.0 - r);
            if tail < tail_tol {
                let sum: f64 = weights.iter().sum();
                let tail_mass = (1.0 - sum).max(0.0).min(tail);
                return JumpTable::from_weights(Gap::Infinite, weights, tail_mass);
            }
        }
        if weights.len() > 10_000_000 {
            return Err(Error::Convergence { what: "stationary gap law", max_terms: 10_000_000 });
        }
        log_p += alpha.ln() + (-nu * qk).ln_1p() - (-qk * q).ln_1p();
        qk *= q;
    }
}

/// Closed-form `E[G] = (Psi_q(log_q alpha) - Psi_q(log_q(alpha nu))) / log q`.
pub fn gap_law_mean(params: &ModelParams, alpha: f64) -> Result<f64> {
    let cfg = params.series();
    Ok((q_digamma_at_base(alpha, 0, &cfg)? - q_digamma_at_base(alpha * params.nu, 0, &cfg)?) / params.log_q())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentConfig {
    pub n_sites: usize,
    pub n_steps: u64,
    pub replicas: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentMeasurement {
    pub rho_hat: f64,
    pub j_hat: f64,
    pub stderr_rho: f64,
    pub stderr_j: f64,
    pub rho_exact: f64,
    pub j_exact: f64,
    pub site_steps: u64,
}

/// Density and bond current of one replica started from the product measure.
///
/// A finite configuration differs from the bi-infinite one only through the
/// leader, whose influence travels back one label per step. The measurement
/// window therefore sits behind the first `n_steps + 1` labels, and enough
/// particles are placed behind it that the last one never reaches it.
fn current_replica(
    cache: &TableCache,
    law: &JumpTable,
    speed: f64,
    cfg: &CurrentConfig,
    replica: u64,
) -> Result<(f64, f64)> {
    let mut rng = RngStream::new(cfg.seed, replica);
    let buffer = cfg.n_steps as usize + 1;
    let mut pos: Vec<i64> = vec![0];
    for _ in 1..buffer {
        let g = law.sample(&mut rng).0 as i64;
        pos.push(pos.last().unwrap() - g - 1);
    }
    let hi = pos[buffer - 1] - 1;
    let lo = hi - cfg.n_sites as i64 + 1;
    let margin = ((2.0 * speed + 1.0) * cfg.n_steps as f64) as i64 + 50;
    while *pos.last().unwrap() >= lo - margin {
        let g = law.sample(&mut rng).0 as i64;
        pos.push(pos.last().unwrap() - g - 1);
    }
    let (mut occupied, mut crossed) = (0u64, 0u64);
    let mut tail_hits = 0;
    let sampler = cache.gap_sampler();
    for _ in 0..cfg.n_steps {
        let mut ahead = i64::MAX;
        for x in pos.iter_mut() {
            let old = *x;
            let j = if ahead == i64::MAX {
                cache.sample(Gap::Infinite, &mut rng, &mut tail_hits)
            } else {
                sampler.sample((ahead - old - 1) as u64, &mut rng, &mut tail_hits)
            } as i64;
            ahead = old;
            *x = old + j;
            crossed += ((*x).min(hi) - old.max(lo)).max(0) as u64;
            if lo <= *x && *x <= hi {
                occupied += 1;
            }
        }
    }
    if *pos.last().unwrap() >= lo {
        return Err(Error::Invariant("last particle reached the measurement window".into()));
    }
    let site_steps = cfg.n_sites as f64 * cfg.n_steps as f64;
    let bond_steps = (cfg.n_sites - 1) as f64 * cfg.n_steps as f64;
    Ok((occupied as f64 / site_steps, crossed as f64 / bond_steps))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical density and per-bond current in the stationary regime with
/// standard errors over independent replicas.
pub fn measure_current(params: &ModelParams, alpha: f64, cfg: &CurrentConfig) -> Result<CurrentMeasurement> {
    if cfg.n_sites < 2 || cfg.n_steps == 0 || cfg.replicas < 2 {
        return Err(Error::Config("need n_sites >= 2, n_steps >= 1 and replicas >= 2".into()));
    }
    let exact = stationary_density_current(params, alpha)?;
    let cache = TableCache::new(params)?;
    let law = gap_law_table(params, alpha, DEFAULT_TAIL_TOL)?;
    let speed = exact.j / exact.rho;
    let mut rhos = Vec::with_capacity(cfg.replicas as usize);
    let mut js = Vec::with_capacity(cfg.replicas as usize);
    for r in 0..cfg.replicas {
        let (rho, j) = current_replica(&cache, &law, speed, cfg, r)?;
        rhos.push(rho);
        js.push(j);
    }
    let (rho_hat, stderr_rho) = mean_and_stderr(&rhos);
    let (j_hat, stderr_j) = mean_and_stderr(&js);
    Ok(CurrentMeasurement {
        rho_hat,
        j_hat,
        stderr_rho,
        stderr_j,
        rho_exact: exact.rho,
        j_exact: exact.j,
        site_steps: cfg.n_sites as u64 * cfg.n_steps * cfg.replicas,
    })
}

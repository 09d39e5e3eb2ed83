//! Exact law of the first few particles under step initial data, by forward
//! recursion on the joint positions.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qspecial::QSeriesConfig;
use crate::scaling::ModelParams;

use super::observables::q_laplace_observable;
use super::table::TableCache;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactLaw {
    pub n: usize,
    pub tau: u64,
    /// Positions `(X_1, ..., X_n)` with their probabilities.
    pub states: Vec<(Vec<i64>, f64)>,
    /// Probability mass dropped by truncation, an upper bound on the error of
    /// any expectation of a `[0, 1]`-valued observable.
    pub discarded: f64,
}

/// Law of `(X_1(tau), ..., X_n(tau))`; states whose probability falls below
/// `prune` are dropped and accounted for in `discarded`.
pub fn exact_step_law(params: &ModelParams, n: usize, tau: u64, prune: f64) -> Result<ExactLaw> {
    if n == 0 || n > 4 {
        return Err(Error::Domain(format!("exact recursion supports 1 <= n <= 4, got {n}")));
    }
    let cache = TableCache::with_limits(params, 256, 1e-17)?;
    let inf = cache.infinite();
    let mut discarded = 0.0;
    let mut law: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    law.insert((1..=n as i64).map(|k| -k).collect(), 1.0);
    for _ in 0..tau {
        let mut next: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (pos, p) in &law {
            discarded += p * inf.tail_mass;
            let mut partial: Vec<(Vec<i64>, f64)> =
                inf.weights.iter().enumerate().map(|(j, w)| (vec![pos[0] + j as i64], p * w)).collect();
            for k in 1..n {
                let m = (pos[k - 1] - pos[k] - 1) as usize;
                if m > cache.m_cap() {
                    return Err(Error::Domain(format!("gap {m} exceeds exact-table cap")));
                }
                let table = cache.finite(m);
                let mut grown = Vec::with_capacity(partial.len() * table.len());
                for (head, ph) in &partial {
                    for (j, w) in table.weights.iter().enumerate() {
                        let pj = ph * w;
                        if pj < prune {
                            discarded += pj;
                            continue;
                        }
                        let mut v = head.clone();
                        v.push(pos[k] + j as i64);
                        grown.push((v, pj));
                    }
                }
                partial = grown;
            }
            for (v, pv) in partial {
                if pv < prune {
                    discarded += pv;
                } else {
                    *next.entry(v).or_insert(0.0) += pv;
                }
            }
        }
        law = next;
    }
    Ok(ExactLaw { n, tau, states: law.into_iter().collect(), discarded })
}

/// `E[1 / (zeta q^{X_n(tau) + n}; q)_inf]` with its certified truncation bound.
pub fn exact_q_laplace(params: &ModelParams, n: usize, tau: u64, zeta: f64) -> Result<(f64, f64)> {
    let law = exact_step_law(params, n, tau, 1e-20)?;
    let cfg = QSeriesConfig::with_q(params.q)?;
    let mut value = 0.0;
    for (pos, p) in &law.states {
        value += p * q_laplace_observable(pos[n - 1], n as u64, zeta, &cfg)?;
    }
    Ok((value, law.discarded))
}

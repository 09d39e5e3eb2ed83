//! Oracles written directly from the defining formulas, sharing no code with
//! the library beyond `ModelParams`.
#![allow(dead_code)]

use std::collections::HashMap;

use qhahn_core::scaling::ModelParams;

const CUTOFF: f64 = 1e-19;

fn poch(a: f64, q: f64, n: usize) -> f64 {
    (0..n).map(|k| 1.0 - a * q.powi(k as i32)).product()
}

fn poch_inf(a: f64, q: f64) -> f64 {
    let mut p = 1.0;
    let mut t = a;
    while t.abs() > 1e-18 {
        p *= 1.0 - t;
        t *= q;
    }
    p
}

/// Jump law given `m` free sites ahead, or the leader's law for `None`,
/// listed up to the point where the remaining mass is negligible.
pub fn qhahn_weights(p: &ModelParams, m: Option<usize>) -> Vec<f64> {
    let (q, mu, nu) = (p.q, p.mu, p.nu);
    match m {
        Some(m) => (0..=m)
            .map(|j| {
                let binom = poch(q, q, m) / (poch(q, q, j) * poch(q, q, m - j));
                mu.powi(j as i32) * poch(nu / mu, q, j) * poch(mu, q, m - j) / poch(nu, q, m) * binom
            })
            .collect(),
        None => {
            let norm = poch_inf(mu, q) / poch_inf(nu, q);
            let mut w = Vec::new();
            for j in 0.. {
                let v = norm * mu.powi(j) * poch(nu / mu, q, j as usize) / poch(q, q, j as usize);
                w.push(v);
                if v < CUTOFF && j > 2 {
                    break;
                }
            }
            w
        }
    }
}

/// `1 / (zeta q^n; q)_inf`
pub fn q_laplace_weight(zeta: f64, q: f64, n: i64) -> f64 {
    1.0 / poch_inf(zeta * q.powi(n as i32), q)
}

/// `E[1/(zeta q^{X_1(tau)+1}; q)_inf]` from the `tau`-fold convolution of the
/// leader's law, started at `X_1(0) = -1`.
pub fn q_laplace_n1(p: &ModelParams, tau: usize, zeta: f64) -> f64 {
    let w = qhahn_weights(p, None);
    let mut dist = vec![1.0];
    for _ in 0..tau {
        let mut next = vec![0.0; dist.len() + w.len() - 1];
        for (i, a) in dist.iter().enumerate() {
            for (j, b) in w.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        dist = next;
    }
    // X_1 + 1 equals the total displacement
    dist.iter().enumerate().map(|(d, pr)| pr * q_laplace_weight(zeta, p.q, d as i64)).sum()
}

/// `E[1/(zeta q^{X_2(tau)+2}; q)_inf]` by enumerating the joint law of the
/// first two particles under the parallel update.
pub fn q_laplace_n2(p: &ModelParams, tau: usize, zeta: f64) -> f64 {
    let lead = qhahn_weights(p, None);
    let mut dist: HashMap<(i64, i64), f64> = HashMap::from([((-1, -2), 1.0)]);
    for _ in 0..tau {
        let mut next = HashMap::new();
        for (&(x1, x2), &pr) in &dist {
            let gap = (x1 - x2 - 1) as usize;
            let follow = qhahn_weights(p, Some(gap));
            for (j1, a) in lead.iter().enumerate() {
                for (j2, b) in follow.iter().enumerate() {
                    *next.entry((x1 + j1 as i64, x2 + j2 as i64)).or_insert(0.0) += pr * a * b;
                }
            }
        }
        dist = next;
    }
    dist.iter().map(|(&(_, x2), pr)| pr * q_laplace_weight(zeta, p.q, x2 + 2)).sum()
}

/// `d^k/dz^k Psi_q(z)` for `k = 0..=2` by summing the defining series.
pub fn psi_q(q: f64, z: f64, k: u8) -> f64 {
    let lq = q.ln();
    let mut s = 0.0;
    for n in 0..10_000 {
        let x = q.powf(n as f64 + z);
        let t = match k {
            0 => x / (1.0 - x),
            1 => x / (1.0 - x).powi(2),
            _ => x * (1.0 + x) / (1.0 - x).powi(3),
        };
        s += t;
        if t < 1e-18 {
            break;
        }
    }
    let scaled = s * lq.powi(k as i32 + 1);
    if k == 0 {
        scaled - (1.0 - q).ln()
    } else {
        scaled
    }
}

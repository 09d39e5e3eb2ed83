//! Height function, currents and the q-Laplace functional.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qspecial::{log_q_pochhammer_real, QSeriesConfig};

use super::sim::ParticleState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeightCurrent {
    pub h: i64,
    /// Particles in `[j, inf)`, equal to `(h - j) / 2`.
    pub current: i64,
}

/// `h(j, tau)` built from the right, where `h(j) = j` beyond the leader and
/// `h(j+1) - h(j)` is `-1` across occupied and `+1` across vacant sites.
///
/// Only sites at or ahead of the last simulated particle are represented:
/// unsimulated labels all sit behind it.
pub fn height_and_current(state: &ParticleState, j: i64) -> Result<HeightCurrent> {
    let pos = state.positions();
    let (lo, x1) = (*pos.last().unwrap(), pos[0]);
    if j < lo {
        return Err(Error::Window { site: j, lo, hi: i64::MAX });
    }
    let mut site = j.max(x1 + 1);
    let mut h = site;
    let mut next = 0;
    while site > j {
        site -= 1;
        while next < pos.len() && pos[next] > site {
            next += 1;
        }
        let occupied = next < pos.len() && pos[next] == site;
        h += if occupied { 1 } else { -1 };
    }
    let current = pos.iter().filter(|&&x| x >= j).count() as i64;
    if h - j != 2 * current {
        return Err(Error::Invariant(format!("height {h} at {j} disagrees with particle count {current}")));
    }
    Ok(HeightCurrent { h, current })
}

/// `1 / (zeta q^{X+N}; q)_inf` for `zeta < 0`; every factor exceeds 1, so
/// the value lies in `(0, 1]`.
pub fn q_laplace_observable(x: i64, n: u64, zeta: f64, cfg: &QSeriesConfig) -> Result<f64> {
    if !(zeta < 0.0) {
        return Err(Error::Domain(format!("zeta must be negative, got {zeta}")));
    }
    let a = zeta * cfg.q.powf((x + n as i64) as f64);
    Ok((-log_q_pochhammer_real(a, cfg)?).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_height_is_abs() {
        let s = ParticleState::step_ic(20).unwrap();
        for j in -20..10 {
            assert_eq!(height_and_current(&s, j).unwrap().h, j.abs());
        }
        assert_eq!(height_and_current(&s, -3).unwrap().current, 3);
        assert!(matches!(height_and_current(&s, -21), Err(Error::Window { .. })));
    }

    #[test]
    fn height_of_a_sparse_configuration() {
        let s = ParticleState::from_positions(4, &[10, 7, 6, 0]).unwrap();
        let hc = height_and_current(&s, 6).unwrap();
        assert_eq!(hc.current, 3);
        assert_eq!(hc.h, 6 + 6);
        assert_eq!(height_and_current(&s, 11).unwrap(), HeightCurrent { h: 11, current: 0 });
    }

    #[test]
    fn q_laplace_values() {
        let cfg = QSeriesConfig::with_q(0.5).unwrap();
        let v = q_laplace_observable(-3, 3, -1.0, &cfg).unwrap();
        let direct: f64 = 1.0 / (0..200).map(|k| 1.0 + 0.5f64.powi(k)).product::<f64>();
        assert!((v - direct).abs() < 1e-12);
        let loose = q_laplace_observable(-3, 3, -1.0, &cfg.with_tol(1e-13).unwrap()).unwrap();
        assert!((v - loose).abs() < 1e-12);
        assert!((q_laplace_observable(0, 1, -1e-300, &cfg).unwrap() - 1.0).abs() < 1e-15);
        let mut last = 0.0;
        for x in -5..20 {
            let v = q_laplace_observable(x, 5, -0.7, &cfg).unwrap();
            assert!(v > last && v <= 1.0);
            last = v;
        }
        assert!(q_laplace_observable(0, 1, 0.5, &cfg).is_err());
    }
}

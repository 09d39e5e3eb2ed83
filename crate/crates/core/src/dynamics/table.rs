//! Jump laws `phi_{q,mu,nu}(j|m)` and their samplers.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::qspecial::log_q_pochhammer_real;
use crate::scaling::ModelParams;

use super::rng::RngStream;

pub const DEFAULT_TAIL_TOL: f64 = 1e-15;
pub const DEFAULT_M_CAP: usize = 4096;
/// Gaps up to this size are sampled through guide tables.
const GUIDE_MAX: usize = 64;
const GUIDE_BITS: u32 = 8;
const GUIDE_LEN: usize = 1 << GUIDE_BITS;
/// Marks a guide entry whose bucket straddles a threshold.
const STRADDLE: u8 = 0x80;

/// A gap value: a finite number of vacant sites, or the leading particle's
/// unbounded room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gap {
    Finite(u64),
    Infinite,
}

/// Weights and CDF of `phi(.|m)`.
///
/// The sampler stores `floor(cdf * 2^64)` and compares a uniform 64-bit word
/// against it, drawing the low 32 bits only when the high 32 bits tie with a
/// threshold. Most draws therefore cost one 32-bit word while the law is the
/// exact 64-bit inverse-CDF law.
#[derive(Debug, Clone)]
pub struct JumpTable {
    pub m: Gap,
    pub weights: Vec<f64>,
    pub cdf: Vec<f64>,
    pub tail_mass: f64,
    thresholds: Vec<u64>,
}

impl JumpTable {
    pub(crate) fn from_weights(m: Gap, weights: Vec<f64>, tail_mass: f64) -> Result<Self> {
        let total: f64 = weights.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Normalization((total - 1.0).abs()));
        }
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cdf.push(acc);
        }
        let scale = 18446744073709551616.0; // 2^64
        let mut thresholds: Vec<u64> =
            cdf.iter().map(|&c| if c >= 1.0 { u64::MAX } else { (c * scale) as u64 }).collect();
        if m != Gap::Infinite {
            *thresholds.last_mut().unwrap() = u64::MAX;
        }
        Ok(Self { m, weights, cdf, tail_mass, thresholds })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().enumerate().map(|(j, w)| j as f64 * w).sum()
    }

    /// Draws `j`; the flag reports a draw beyond the truncated support of an
    /// infinite table, in which case the largest tabulated `j` is returned.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> (u64, bool) {
        let hi = rng.next_u32();
        self.sample_words(hi, || rng.next_u32())
    }

    /// Inverse-CDF lookup of the word `hi * 2^32 + lo`, where `lo` is only
    /// requested on a tie in the high word.
    #[inline]
    pub(crate) fn sample_words(&self, hi: u32, lo: impl FnOnce() -> u32) -> (u64, bool) {
        let thr = &self.thresholds;
        if hi < (thr[0] >> 32) as u32 {
            return (0, false);
        }
        let mut j = 0;
        while j < thr.len() && ((thr[j] >> 32) as u32) < hi {
            j += 1;
        }
        if j < thr.len() && (thr[j] >> 32) as u32 == hi {
            let lo = lo();
            while j < thr.len() && (thr[j] >> 32) as u32 == hi && (thr[j] as u32) <= lo {
                j += 1;
            }
        }
        if j >= thr.len() {
            ((thr.len() - 1) as u64, self.m == Gap::Infinite)
        } else {
            (j as u64, false)
        }
    }
}

/// Prefix sums `L_a[n] = log (a;q)_n` for the four Pochhammer bases of the law.
struct LogPrefixes {
    ratio: Vec<f64>,
    mu: Vec<f64>,
    nu: Vec<f64>,
    q: Vec<f64>,
}

impl LogPrefixes {
    fn new(params: &ModelParams, len: usize) -> Self {
        let q = params.q;
        let build = |a: f64| {
            let mut out = Vec::with_capacity(len + 1);
            let mut acc = 0.0;
            let mut qk = 1.0;
            out.push(0.0);
            for _ in 0..len {
                acc += (-a * qk).ln_1p();
                qk *= q;
                out.push(acc);
            }
            out
        };
        Self { ratio: build(params.nu / params.mu), mu: build(params.mu), nu: build(params.nu), q: build(q) }
    }

    fn finite(&self, params: &ModelParams, m: usize) -> Vec<f64> {
        let lmu = params.mu.ln();
        (0..=m)
            .map(|j| {
                let l = j as f64 * lmu + self.ratio[j] + self.mu[m - j] - self.nu[m] + self.q[m]
                    - self.q[j]
                    - self.q[m - j];
                l.exp()
            })
            .collect()
    }
}

fn degenerate(params: &ModelParams) -> bool {
    params.mu == params.nu
}

fn finite_table(params: &ModelParams, m: usize, prefixes: &LogPrefixes) -> Result<JumpTable> {
    if degenerate(params) {
        let mut w = vec![0.0; m + 1];
        w[0] = 1.0;
        return JumpTable::from_weights(Gap::Finite(m as u64), w, 0.0);
    }
    JumpTable::from_weights(Gap::Finite(m as u64), prefixes.finite(params, m), 0.0)
}

fn infinite_table(params: &ModelParams, tail_tol: f64) -> Result<JumpTable> {
    if degenerate(params) {
        return JumpTable::from_weights(Gap::Infinite, vec![1.0], 0.0);
    }
    let cfg = params.series();
    let (q, mu, ratio) = (params.q, params.mu, params.nu / params.mu);
    let log_norm = log_q_pochhammer_real(mu, &cfg)? - log_q_pochhammer_real(params.nu, &cfg)?;
    let mut weights = Vec::new();
    let (mut log_w, mut qj) = (log_norm, 1.0);
    loop {
        let w = log_w.exp();
        weights.push(w);
        // w_{j+1}/w_j = mu (1 - (nu/mu) q^j) / (1 - q^{j+1}) <= mu / (1 - q^{j+1})
        let r = mu / (1.0 - qj * q);
        if r < 1.0 {
            let tail = w * r / (1.0 - r);
            if tail < tail_tol {
                let sum: f64 = weights.iter().sum();
                let tail_mass = (1.0 - sum).max(0.0).min(tail);
                return JumpTable::from_weights(Gap::Infinite, weights, tail_mass);
            }
        }
        if weights.len() > 1_000_000 {
            return Err(Error::Convergence { what: "infinite jump table", max_terms: 1_000_000 });
        }
        log_w += mu.ln() + (-ratio * qj).ln_1p() - (-qj * q).ln_1p();
        qj *= q;
    }
}

/// Builds the table of `phi(.|m)`; for `Gap::Infinite` the support is cut
/// once the remaining mass is certified below `tail_tol`.
pub fn jump_weights(params: &ModelParams, m: Gap, tail_tol: f64) -> Result<JumpTable> {
    match m {
        Gap::Infinite => infinite_table(params, tail_tol),
        Gap::Finite(m) => {
            let m = m as usize;
            finite_table(params, m, &LogPrefixes::new(params, m))
        }
    }
}

/// Lazily built, read-only tables for `m <= m_cap` plus the infinite table.
/// Larger gaps are served by the infinite table with rejection of `j > m`.
pub struct TableCache {
    params: ModelParams,
    prefixes: LogPrefixes,
    finite: Vec<OnceLock<JumpTable>>,
    infinite: JumpTable,
    /// Row `m` maps the top `GUIDE_BITS` bits of a uniform word to the jump
    /// of `phi(.|m)`, or to `STRADDLE` when the bucket contains a threshold.
    guide: Vec<u8>,
}

impl TableCache {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Self::with_limits(params, DEFAULT_M_CAP, DEFAULT_TAIL_TOL)
    }

    pub fn with_limits(params: &ModelParams, m_cap: usize, tail_tol: f64) -> Result<Self> {
        let prefixes = LogPrefixes::new(params, m_cap.max(GUIDE_MAX));
        let mut guide = vec![0u8; GUIDE_LEN * (GUIDE_MAX + 1)];
        for m in 1..=GUIDE_MAX.min(m_cap) {
            let t = finite_table(params, m, &prefixes)?;
            let answer = |u: u64| t.thresholds.iter().position(|&thr| u < thr).unwrap_or(m);
            let shift = 64 - GUIDE_BITS;
            for b in 0..GUIDE_LEN {
                let first = (b as u64) << shift;
                let last = first | (u64::MAX >> GUIDE_BITS);
                let (j0, j1) = (answer(first), answer(last));
                guide[m * GUIDE_LEN + b] = if j0 == j1 { j0 as u8 } else { STRADDLE };
            }
        }
        Ok(Self {
            params: *params,
            prefixes,
            finite: (0..=m_cap).map(|_| OnceLock::new()).collect(),
            infinite: infinite_table(params, tail_tol)?,
            guide,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn m_cap(&self) -> usize {
        self.finite.len() - 1
    }

    pub fn infinite(&self) -> &JumpTable {
        &self.infinite
    }

    /// Table for a finite gap `m <= m_cap`.
    pub fn finite(&self, m: usize) -> &JumpTable {
        self.finite[m]
            .get_or_init(|| finite_table(&self.params, m, &self.prefixes).expect("finite jump law normalizes"))
    }

    /// Draws a jump for a particle with `m` vacant sites ahead, consuming no
    /// randomness when `m = 0`. Same law and same word consumption as
    /// [`TableCache::sample`].
    ///
    /// For small `m` the top bits of the word index a guide table, which
    /// settles the draw unless the bucket straddles a threshold. A zero gap
    /// has an all-zero row, so the zero/non-zero split needs no branch.
    #[inline]
    pub fn sample_gap(&self, m: u64, rng: &mut RngStream, tail_hits: &mut u64) -> u64 {
        self.gap_sampler().sample(m, rng, tail_hits)
    }

    /// Borrowed view used by the stepping loops, keeping the guide rows in a
    /// local slice.
    #[inline]
    pub(crate) fn gap_sampler(&self) -> GapSampler<'_> {
        GapSampler { guide: &self.guide, rows: GUIDE_MAX.min(self.m_cap()) as u64, cache: self }
    }

    /// Draws a jump for a particle with `m` vacant sites ahead.
    #[inline]
    pub fn sample(&self, m: Gap, rng: &mut RngStream, tail_hits: &mut u64) -> u64 {
        match m {
            Gap::Finite(0) => 0,
            Gap::Finite(m) if (m as usize) < self.finite.len() => self.finite(m as usize).sample(rng).0,
            Gap::Finite(m) => loop {
                let (j, tail) = self.infinite.sample(rng);
                *tail_hits += tail as u64;
                if j <= m {
                    break j;
                }
            },
            Gap::Infinite => {
                let (j, tail) = self.infinite.sample(rng);
                *tail_hits += tail as u64;
                j
            }
        }
    }
}

pub(crate) struct GapSampler<'a> {
    guide: &'a [u8],
    rows: u64,
    cache: &'a TableCache,
}

impl GapSampler<'_> {
    #[inline(always)]
    pub(crate) fn sample(&self, m: u64, rng: &mut RngStream, tail_hits: &mut u64) -> u64 {
        if m <= self.rows {
            let w = rng.peek_u32();
            let e = self.guide[(m as usize) << GUIDE_BITS | (w >> (32 - GUIDE_BITS)) as usize];
            if e & STRADDLE == 0 {
                rng.advance((m != 0) as usize);
                return e as u64;
            }
            rng.advance(1);
            return self.cache.finite(m as usize).sample_words(w, || rng.next_u32()).0;
        }
        self.cache.sample(Gap::Finite(m), rng, tail_hits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ModelParams {
        ModelParams::new(0.2, 0.4, 0.3).unwrap()
    }

    #[test]
    fn small_tables() {
        let p = reference();
        assert_eq!(jump_weights(&p, Gap::Finite(0), DEFAULT_TAIL_TOL).unwrap().weights, vec![1.0]);
        let t = jump_weights(&p, Gap::Finite(1), DEFAULT_TAIL_TOL).unwrap();
        assert!((t.weights[0] - 6.0 / 7.0).abs() < 1e-15 && (t.weights[1] - 1.0 / 7.0).abs() < 1e-15);
        for q in [0.05, 0.5, 0.95] {
            let t = jump_weights(&ModelParams::new(q, 0.4, 0.3).unwrap(), Gap::Finite(1), 1e-15).unwrap();
            assert!((t.weights[1] - 1.0 / 7.0).abs() < 1e-14);
        }
    }

    #[test]
    fn direct_product_oracle_for_finite_m() {
        // phi(j|m) straight from the defining products
        let p = reference();
        let poch = |a: f64, n: usize| (0..n).map(|k| 1.0 - a * p.q.powi(k as i32)).product::<f64>();
        for m in [2usize, 5, 13] {
            let t = jump_weights(&p, Gap::Finite(m as u64), DEFAULT_TAIL_TOL).unwrap();
            for j in 0..=m {
                let direct = p.mu.powi(j as i32) * poch(p.nu / p.mu, j) * poch(p.mu, m - j) / poch(p.nu, m)
                    * poch(p.q, m)
                    / (poch(p.q, j) * poch(p.q, m - j));
                assert!((t.weights[j] - direct).abs() < 1e-14, "m={m} j={j}");
            }
        }
    }

    #[test]
    fn infinite_table_normalization_and_tail() {
        let t = jump_weights(&reference(), Gap::Infinite, DEFAULT_TAIL_TOL).unwrap();
        let s: f64 = t.weights.iter().sum();
        assert!((s + t.tail_mass - 1.0).abs() < 1e-12);
        assert!(t.tail_mass < DEFAULT_TAIL_TOL);
        // finite laws converge to the infinite one as m grows
        let f = jump_weights(&reference(), Gap::Finite(200), DEFAULT_TAIL_TOL).unwrap();
        for j in 0..t.len() {
            assert!((f.weights[j] - t.weights[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn degenerate_and_nu_zero() {
        let p = ModelParams::new(0.3, 0.5, 0.5).unwrap();
        let t = jump_weights(&p, Gap::Finite(4), 1e-15).unwrap();
        assert_eq!(t.weights, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(jump_weights(&p, Gap::Infinite, 1e-15).unwrap().weights, vec![1.0]);
        let p = ModelParams::new(0.3, 0.5, 0.0).unwrap();
        let t = jump_weights(&p, Gap::Finite(7), 1e-15).unwrap();
        assert!((t.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sampler_follows_table() {
        let p = reference();
        let cache = TableCache::new(&p).unwrap();
        let mut rng = RngStream::new(7, 0);
        let n = 1_000_000;
        let mut hits = 0u64;
        let ones = (0..n).filter(|_| cache.sample(Gap::Finite(1), &mut rng, &mut hits) == 1).count();
        let pr = 1.0 / 7.0;
        let sd = (n as f64 * pr * (1.0 - pr)).sqrt();
        assert!((ones as f64 - n as f64 * pr).abs() < 4.0 * sd);
        assert_eq!(cache.sample(Gap::Finite(0), &mut rng, &mut hits), 0);
        assert_eq!(hits, 0);
    }

    #[test]
    fn sampler_resolves_ties_in_the_low_word() {
        let w = vec![0.5 + 2f64.powi(-40), 0.5 - 2f64.powi(-40)];
        let t = JumpTable::from_weights(Gap::Finite(1), w, 0.0).unwrap();
        // threshold word is 2^63 + 2^24: high word 2^31, low word 2^24
        let hi = 1u32 << 31;
        assert_eq!(t.sample_words(hi - 1, || panic!("no tie")).0, 0);
        assert_eq!(t.sample_words(hi + 1, || panic!("no tie")).0, 1);
        assert_eq!(t.sample_words(hi, || (1 << 24) - 1).0, 0);
        assert_eq!(t.sample_words(hi, || 1 << 24).0, 1);
        assert_eq!(t.sample_words(u32::MAX, || u32::MAX).0, 1);
        let inf = JumpTable::from_weights(Gap::Infinite, vec![0.5, 0.5 - 1e-12], 1e-12).unwrap();
        assert_eq!(inf.sample_words(u32::MAX, || u32::MAX), (1, true));
    }

    #[test]
    fn flat_rows_match_the_full_sampler() {
        let p = reference();
        let cache = TableCache::new(&p).unwrap();
        let mut hits = 0;
        let mut a = RngStream::new(21, 0);
        assert_eq!(cache.sample_gap(0, &mut a, &mut hits), 0);
        assert_eq!(a.counter(), 0);
        for m in [1u64, 2, 7, 8, 9, 63, 64, 65, 300] {
            let mut a = RngStream::new(21, m);
            let mut b = RngStream::new(21, m);
            for _ in 0..20_000 {
                let x = cache.sample_gap(m, &mut a, &mut hits);
                let y = cache.sample(Gap::Finite(m), &mut b, &mut hits);
                assert_eq!(x, y);
            }
            assert_eq!(a.counter(), b.counter());
        }
        // every guide entry agrees with the exact lookup at both bucket ends
        for m in 1..=GUIDE_MAX {
            let t = cache.finite(m);
            for b in 0..GUIDE_LEN {
                let e = cache.guide[m * GUIDE_LEN + b];
                if e & STRADDLE == 0 {
                    let w = (b as u32) << (32 - GUIDE_BITS);
                    assert_eq!(t.sample_words(w, || 0).0, e as u64);
                    assert_eq!(t.sample_words(w | (u32::MAX >> GUIDE_BITS), || u32::MAX).0, e as u64);
                }
            }
        }
    }

    #[test]
    fn rejection_above_cap() {
        let p = reference();
        let cache = TableCache::with_limits(&p, 2, DEFAULT_TAIL_TOL).unwrap();
        let mut rng = RngStream::new(3, 0);
        let mut hits = 0;
        for _ in 0..10_000 {
            assert!(cache.sample(Gap::Finite(3), &mut rng, &mut hits) <= 3);
        }
    }
}

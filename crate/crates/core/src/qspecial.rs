//! q-series special functions: q-Pochhammer symbols, the q-gamma function
//! and the q-digamma function with its first three derivatives.
//!
//! Infinite products are always handled through their logarithms, and ratios
//! of infinite products are formed as differences of log-sums. The digamma
//! family is evaluated from its Lambert-type series in the variable
//! `x = q^z`, which keeps the series well defined when `z -> +inf`
//! (`x = 0`).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Truncation control for infinite q-series and q-products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSeriesConfig {
    pub q: f64,
    /// Absolute bound on the discarded tail.
    pub tol: f64,
    pub max_terms: usize,
}

impl QSeriesConfig {
    pub const DEFAULT_TOL: f64 = 1e-15;
    pub const DEFAULT_MAX_TERMS: usize = 1_000_000;

    pub fn new(q: f64, tol: f64, max_terms: usize) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("q must lie in (0,1), got {q}")));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("tol must be positive, got {tol}")));
        }
        if max_terms == 0 {
            return Err(Error::Domain("max_terms must be at least 1".into()));
        }
        Ok(Self { q, tol, max_terms })
    }

    pub fn with_q(q: f64) -> Result<Self> {
        Self::new(q, Self::DEFAULT_TOL, Self::DEFAULT_MAX_TERMS)
    }

    pub fn with_tol(self, tol: f64) -> Result<Self> {
        Self::new(self.q, tol, self.max_terms)
    }

    #[inline]
    pub fn log_q(&self) -> f64 {
        self.q.ln()
    }
}

/// `(a;q)_n = prod_{k<n} (1 - a q^k)`; the empty product is 1.
pub fn q_pochhammer_finite(a: Complex64, q: f64, n: usize) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    let mut qk = 1.0;
    for _ in 0..n {
        prod *= Complex64::new(1.0, 0.0) - a * qk;
        qk *= q;
    }
    prod
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum BranchPolicy {
    Strict,
    Principal,
}

fn log_poch_impl(a: Complex64, cfg: &QSeriesConfig, policy: BranchPolicy) -> Result<Complex64> {
    let abs_a = a.norm();
    if abs_a == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let one = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut qk = 1.0;
    for k in 0..cfg.max_terms {
        let x = a * qk;
        let factor = one - x;
        if factor.norm() <= f64::EPSILON * (1.0 + x.norm()) {
            return Err(Error::Pole { a: format!("{a}"), k });
        }
        if policy == BranchPolicy::Strict && factor.im == 0.0 && factor.re < 0.0 {
            return Err(Error::Branch { a: format!("{a}"), k });
        }
        // ln(1 - x) with full relative accuracy for small |x|
        let term = if x.norm() < 1e-3 {
            let re = 0.5 * (x.norm_sqr() - 2.0 * x.re).ln_1p();
            Complex64::new(re, factor.arg())
        } else {
            factor.ln()
        };
        sum += term;
        let mag = abs_a * qk;
        qk *= cfg.q;
        // for |x| <= 1/2 the remaining factors obey |ln(1-x)| <= 2|x|
        if mag <= 0.5 && 2.0 * abs_a * qk / (1.0 - cfg.q) < cfg.tol {
            return Ok(sum);
        }
    }
    Err(Error::Convergence { what: "log q-Pochhammer", max_terms: cfg.max_terms })
}

/// `log (a;q)_inf` as a sum of principal logarithms of the factors.
///
/// Fails with [`Error::Pole`] if a factor vanishes and with [`Error::Branch`]
/// if a factor sits on the negative real axis.
pub fn log_q_pochhammer_infinite(a: Complex64, cfg: &QSeriesConfig) -> Result<Complex64> {
    log_poch_impl(a, cfg, BranchPolicy::Strict)
}

/// Same as [`log_q_pochhammer_infinite`] but a factor on the negative real
/// axis takes its principal value `ln|.| + i pi`. Only the exponential of the
/// result (or integer multiples of it) is branch independent.
pub fn log_q_pochhammer_principal(a: Complex64, cfg: &QSeriesConfig) -> Result<Complex64> {
    log_poch_impl(a, cfg, BranchPolicy::Principal)
}

/// Real `log (a;q)_inf` for `a < 1`.
pub fn log_q_pochhammer_real(a: f64, cfg: &QSeriesConfig) -> Result<f64> {
    if a >= 1.0 {
        return Err(if a == 1.0 {
            Error::Pole { a: format!("{a}"), k: 0 }
        } else {
            Error::Branch { a: format!("{a}"), k: 0 }
        });
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut qk = 1.0;
    for _ in 0..cfg.max_terms {
        let x = a * qk;
        sum += (-x).ln_1p();
        qk *= cfg.q;
        if x.abs() <= 0.5 && 2.0 * a.abs() * qk / (1.0 - cfg.q) < cfg.tol {
            return Ok(sum);
        }
    }
    Err(Error::Convergence { what: "log q-Pochhammer", max_terms: cfg.max_terms })
}

/// `Gamma_q(z) = (1-q)^{1-z} (q;q)_inf / (q^z;q)_inf` for `z > 0`.
pub fn q_gamma(z: f64, cfg: &QSeriesConfig) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("q_gamma needs z > 0, got {z}")));
    }
    let q = cfg.q;
    let log = (1.0 - z) * (-q).ln_1p() + log_q_pochhammer_real(q, cfg)? - log_q_pochhammer_real(q.powf(z), cfg)?;
    Ok(log.exp())
}

/// `Psi_q^{(order)}(z)` for `z > 0` and `order` in `0..=3`.
pub fn q_digamma(z: f64, order: u8, cfg: &QSeriesConfig) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("q_digamma needs z > 0, got {z}")));
    }
    q_digamma_at_base(cfg.q.powf(z), order, cfg)
}

/// `Psi_q^{(order)}` evaluated at the point `z` with `q^z = base`.
///
/// `base = 0` is the limit `z -> +inf`: `Psi_q -> -log(1-q)` and all
/// derivatives vanish. With `x_k = base q^k` the terms are
///
/// * order 0: `x/(1-x)`
/// * order 1: `x/(1-x)^2`
/// * order 2: `x(1+x)/(1-x)^3`
/// * order 3: `x(1+4x+x^2)/(1-x)^4`
///
/// scaled by `(log q)^{order+1}` (plus the constant for order 0).
pub fn q_digamma_at_base(base: f64, order: u8, cfg: &QSeriesConfig) -> Result<f64> {
    if !(0.0..1.0).contains(&base) {
        return Err(Error::Domain(format!("q^z must lie in [0,1), got {base}")));
    }
    if order > 3 {
        return Err(Error::Domain(format!("q_digamma order {order} not supported")));
    }
    let log_q = cfg.log_q();
    let scale = log_q.powi(order as i32 + 1);
    let constant = if order == 0 { -(-cfg.q).ln_1p() } else { 0.0 };
    if base == 0.0 {
        return Ok(constant);
    }
    let threshold = cfg.tol * (1.0 - cfg.q);
    let mut sum = 0.0;
    let mut x = base;
    for _ in 0..cfg.max_terms {
        let om = 1.0 - x;
        let t = match order {
            0 => x / om,
            1 => x / (om * om),
            2 => x * (1.0 + x) / (om * om * om),
            _ => x * (1.0 + x * (4.0 + x)) / (om * om * om * om),
        };
        sum += t;
        if (t * scale).abs() < threshold {
            return Ok(constant + scale * sum);
        }
        x *= cfg.q;
    }
    Err(Error::Convergence { what: "q-digamma series", max_terms: cfg.max_terms })
}

/// Residual of the q-Binomial theorem
/// `sum_n (a;q)_n/(q;q)_n z^n = (az;q)_inf/(z;q)_inf`, relative once the
/// right side exceeds 1.
pub fn q_binomial_theorem_check(a: f64, z: f64, cfg: &QSeriesConfig) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Domain(format!("a must lie in [0,1), got {a}")));
    }
    if !(0.0..1.0).contains(&z) {
        return Err(Error::Domain(format!("z must lie in [0,1), got {z}")));
    }
    let q = cfg.q;
    let mut term = 1.0;
    let mut lhs = 1.0;
    let mut qn = 1.0; // q^{n-1} before the update
    let mut converged = false;
    for n in 1..=cfg.max_terms {
        let qn_next = qn * q; // q^n
        term *= (1.0 - a * qn) / (1.0 - qn_next) * z;
        lhs += term;
        qn = qn_next;
        // later ratios are bounded by z / (1 - q^{n+1})
        let r = z / (1.0 - qn * q);
        if r < 1.0 && term.abs() * r / (1.0 - r) < cfg.tol {
            converged = true;
            break;
        }
        if n == cfg.max_terms {
            break;
        }
    }
    if !converged && z != 0.0 {
        return Err(Error::Convergence { what: "q-binomial series", max_terms: cfg.max_terms });
    }
    let rhs = (log_q_pochhammer_real(a * z, cfg)? - log_q_pochhammer_real(z, cfg)?).exp();
    Ok((lhs - rhs).abs() / rhs.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cfg(q: f64) -> QSeriesConfig {
        QSeriesConfig::with_q(q).unwrap()
    }

    #[test]
    fn finite_pochhammer_examples() {
        assert_eq!(q_pochhammer_finite(c(123.0), 0.5, 0), c(1.0));
        assert!((q_pochhammer_finite(c(0.5), 0.5, 2) - c(0.375)).norm() < 1e-15);
        assert_eq!(q_pochhammer_finite(c(0.0), 0.3, 7), c(1.0));
    }

    #[test]
    fn infinite_log_pochhammer_matches_direct_product() {
        let cfg = QSeriesConfig::new(0.2, 1e-14, 1000).unwrap();
        assert_eq!(log_q_pochhammer_infinite(c(0.0), &cfg).unwrap(), c(0.0));
        let direct: f64 = (0..200).map(|k| 1.0 - 0.3 * 0.2f64.powi(k)).product();
        let v = log_q_pochhammer_infinite(c(0.3), &cfg).unwrap();
        assert!((v.exp().re - direct).abs() < 1e-12);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn pole_and_branch_errors() {
        let cfg = cfg(0.5);
        assert!(matches!(log_q_pochhammer_infinite(c(1.0), &cfg), Err(Error::Pole { k: 0, .. })));
        assert!(matches!(log_q_pochhammer_principal(c(4.0), &cfg), Err(Error::Pole { k: 2, .. })));
        assert!(matches!(log_q_pochhammer_infinite(c(3.0), &cfg), Err(Error::Branch { .. })));
        let p = log_q_pochhammer_principal(c(3.0), &cfg).unwrap();
        let direct: f64 = (0..200).map(|k| 1.0 - 3.0 * 0.5f64.powi(k)).product();
        assert!((p.exp().re - direct).abs() < 1e-12 * direct.abs());
    }

    #[test]
    fn q_gamma_values() {
        let cfg = cfg(0.5);
        assert!((q_gamma(1.0, &cfg).unwrap() - 1.0).abs() < 1e-14);
        assert!((q_gamma(2.0, &cfg).unwrap() - 1.0).abs() < 1e-14);
        assert!((q_gamma(3.0, &cfg).unwrap() - 1.5).abs() < 1e-14);
        assert!(matches!(q_gamma(0.0, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn q_gamma_functional_equation_grid() {
        for &q in &[0.1, 0.2, 0.5, 0.9] {
            let cfg = cfg(q);
            for i in 1..40 {
                let z = 0.13 * i as f64;
                let lhs = q_gamma(z + 1.0, &cfg).unwrap();
                let rhs = (1.0 - q.powf(z)) / (1.0 - q) * q_gamma(z, &cfg).unwrap();
                assert!((lhs - rhs).abs() < 1e-10 * rhs.abs(), "q={q} z={z}");
            }
        }
    }

    #[test]
    fn digamma_telescoping() {
        let cfg = cfg(0.2);
        let z = 0.7;
        let q = 0.2f64;
        let diff = q_digamma(z + 1.0, 0, &cfg).unwrap() - q_digamma(z, 0, &cfg).unwrap();
        let expected = -q.ln() * q.powf(z) / (1.0 - q.powf(z));
        assert!((diff - expected).abs() < 1e-12);
    }

    #[test]
    fn digamma_is_log_derivative_of_q_gamma() {
        let cfg = cfg(0.3);
        let h = 1e-5;
        for &z in &[0.3, 1.1, 2.5] {
            let fd = (q_gamma(z + h, &cfg).unwrap().ln() - q_gamma(z - h, &cfg).unwrap().ln()) / (2.0 * h);
            assert!((fd - q_digamma(z, 0, &cfg).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn trigamma_decreasing_example() {
        let cfg = cfg(0.2);
        assert!(q_digamma(0.4, 1, &cfg).unwrap() > q_digamma(0.9, 1, &cfg).unwrap());
    }

    #[test]
    fn higher_orders_match_central_differences() {
        let cfg = cfg(0.3);
        let (z, h) = (1.1, 1e-4);
        for order in 1..=3u8 {
            let fd =
                (q_digamma(z + h, order - 1, &cfg).unwrap() - q_digamma(z - h, order - 1, &cfg).unwrap()) / (2.0 * h);
            let exact = q_digamma(z, order, &cfg).unwrap();
            assert!((fd - exact).abs() < 1e-6 * exact.abs(), "order {order}: {fd} vs {exact}");
        }
    }

    #[test]
    fn base_zero_limit() {
        let cfg = cfg(0.4);
        assert!((q_digamma_at_base(0.0, 0, &cfg).unwrap() + (0.6f64).ln()).abs() < 1e-16);
        for order in 1..=3 {
            assert_eq!(q_digamma_at_base(0.0, order, &cfg).unwrap(), 0.0);
        }
        assert!(matches!(q_digamma(-1.0, 0, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn convergence_cap_is_reported() {
        let cfg = QSeriesConfig::new(0.99, 1e-15, 10).unwrap();
        assert!(matches!(q_digamma(0.5, 0, &cfg), Err(Error::Convergence { .. })));
    }

    #[test]
    fn q_binomial_examples() {
        let c05 = cfg(0.5);
        assert!(q_binomial_theorem_check(0.0, 0.5, &c05).unwrap() < 1e-10);
        let c04 = cfg(0.4);
        assert!(q_binomial_theorem_check(0.4, 0.3, &c04).unwrap() < 1e-10);
        assert!(q_binomial_theorem_check(0.3, 0.0, &c04).unwrap() < 1e-15);
        // a = q telescopes to 1/(1-z)
        let mut s = 0.0;
        let mut t = 1.0;
        for n in 0..400 {
            s += t;
            t *= 0.3 * (1.0 - 0.4 * 0.4f64.powi(n)) / (1.0 - 0.4f64.powi(n + 1));
        }
        assert!((s - 1.0 / 0.7).abs() < 1e-12);
    }
}

//! Steepest-descent toolkit: the exponent functions `f0`, `f1`, `f2`, the
//! integration contours, steep-descent and Taylor diagnostics, and the
//! algebraic identities behind the steep-descent argument.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qspecial::{log_q_pochhammer_infinite, log_q_pochhammer_principal, QSeriesConfig};
use crate::scaling::{beta_x, ModelParams, ScalingCoefficients};

/// Parametrised integration contours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Contour {
    /// `w(s) = 1 - (1 - q^theta) e^{is}`, `s` in `(-pi, pi]`.
    CircleC { q: f64, theta: f64 },
    /// `z(t) = q^theta e^{it}`, `t` in `(-pi, pi]`.
    CircleD { q: f64, theta: f64 },
    /// `log_q w(s)` for `w` on `CircleC`.
    LogqImageOfC { q: f64, theta: f64 },
    /// `theta + e^{i angle sgn(t)} |t|`, `t` in `[-delta, delta]`.
    V { theta: f64, angle: f64, delta: f64 },
    /// `theta + i t`, `t` in `[-height, height]`.
    VLine { theta: f64, height: f64 },
}

impl Contour {
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            Contour::CircleC { .. } | Contour::CircleD { .. } | Contour::LogqImageOfC { .. } => (-PI, PI),
            Contour::V { delta, .. } => (-delta, delta),
            Contour::VLine { height, .. } => (-height, height),
        }
    }

    pub fn point(&self, t: f64) -> Complex64 {
        match *self {
            Contour::CircleC { q, theta } => 1.0 - (1.0 - q.powf(theta)) * Complex64::cis(t),
            Contour::CircleD { q, theta } => q.powf(theta) * Complex64::cis(t),
            Contour::LogqImageOfC { q, theta } => (1.0 - (1.0 - q.powf(theta)) * Complex64::cis(t)).ln() / q.ln(),
            Contour::V { theta, angle, .. } => theta + Complex64::cis(angle * t.signum()) * t.abs(),
            Contour::VLine { theta, .. } => Complex64::new(theta, t),
        }
    }

    /// Derivative of the parametrisation.
    pub fn tangent(&self, t: f64) -> Complex64 {
        let i = Complex64::i();
        match *self {
            Contour::CircleC { q, theta } => -(1.0 - q.powf(theta)) * i * Complex64::cis(t),
            Contour::CircleD { q, theta } => q.powf(theta) * i * Complex64::cis(t),
            Contour::LogqImageOfC { q, theta } => {
                let r = 1.0 - q.powf(theta);
                -r * i * Complex64::cis(t) / ((1.0 - r * Complex64::cis(t)) * q.ln())
            }
            Contour::V { angle, .. } => {
                if t < 0.0 {
                    -Complex64::cis(-angle)
                } else {
                    Complex64::cis(angle)
                }
            }
            Contour::VLine { .. } => i,
        }
    }
}

/// `f0`, `f1`, `f2` for fixed coefficients, `c` and `x`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentFunctions {
    pub params: ModelParams,
    pub coeffs: ScalingCoefficients,
    pub c: f64,
    pub x: f64,
    pub beta_x: f64,
    pub cfg: QSeriesConfig,
}

impl ExponentFunctions {
    pub fn new(params: &ModelParams, coeffs: &ScalingCoefficients, c: f64, x: f64) -> Self {
        Self { params: *params, coeffs: *coeffs, c, x, beta_x: beta_x(coeffs, c, x), cfg: params.series() }
    }

    fn lp(&self, a: f64, z: Complex64) -> Result<Complex64> {
        log_q_pochhammer_infinite(a * z, &self.cfg)
    }

    /// `-f log z + kappa (log(nu z) - log(mu z)) + log(z) - log(nu z)`, with
    /// `log(a z)` short for `log (a z;q)_inf`.
    pub fn f0(&self, z: Complex64) -> Result<Complex64> {
        let (mu, nu) = (self.params.mu, self.params.nu);
        let lnu = self.lp(nu, z)?;
        Ok(-self.coeffs.f * z.ln() + self.coeffs.kappa * (lnu - self.lp(mu, z)?) + self.lp(1.0, z)? - lnu)
    }

    /// `-c phi log_q z + c (log(nu z) - log(mu z))`
    pub fn f1(&self, z: Complex64) -> Result<Complex64> {
        if self.c == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (mu, nu) = (self.params.mu, self.params.nu);
        let lq = self.coeffs.log_q;
        Ok(self.c * (-self.coeffs.phi * z.ln() / lq + self.lp(nu, z)? - self.lp(mu, z)?))
    }

    /// `beta_x log_q z`
    pub fn f2(&self, z: Complex64) -> Complex64 {
        self.beta_x * z.ln() / self.coeffs.log_q
    }

    /// `Re f0(z)`, which only involves moduli and is free of branch choices.
    pub fn re_f0(&self, z: Complex64) -> Result<f64> {
        let (mu, nu) = (self.params.mu, self.params.nu);
        let re = |a: f64| log_q_pochhammer_principal(a * z, &self.cfg).map(|v| v.re);
        let lnu = re(nu)?;
        Ok(-self.coeffs.f * z.norm().ln() + self.coeffs.kappa * (lnu - re(mu)?) + re(1.0)? - lnu)
    }

    /// `f0` with principal factorwise logs; the imaginary part is only
    /// defined modulo `2 pi`.
    pub fn f0_principal(&self, z: Complex64) -> Result<Complex64> {
        let (mu, nu) = (self.params.mu, self.params.nu);
        let lp = |a: f64| log_q_pochhammer_principal(a * z, &self.cfg);
        let lnu = lp(nu)?;
        Ok(-self.coeffs.f * z.ln() + self.coeffs.kappa * (lnu - lp(mu)?) + lp(1.0)? - lnu)
    }

    /// `f_i(q^Z)` for real `Z`.
    fn in_z(&self, i: usize, zz: f64) -> Result<f64> {
        let z = Complex64::new(self.params.q.powf(zz), 0.0);
        Ok(match i {
            0 => self.f0(z)?.re,
            1 => self.f1(z)?.re,
            _ => self.beta_x * zz,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorCheck {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// `|f0'''(theta) - 2 chi| / (2 chi)`
    pub d3_residual: f64,
    pub f1_d1: f64,
    /// `|f1''(theta) - c phi'|`
    pub f1_d2_residual: f64,
    /// `|(f2(q^{theta+h}) - f2(q^theta))/h - beta_x|`
    pub f2_d1_residual: f64,
    /// Second difference of `Z -> f2(q^Z)`.
    pub f2_d2: f64,
}

/// Five-point central differences of `Z -> f_i(q^Z)` at `Z = theta`.
///
/// The third derivative has a large fifth-order remainder, so its stencils
/// at `h` and `2h` are combined by one Richardson step.
pub fn taylor_check(params: &ModelParams, coeffs: &ScalingCoefficients, c: f64, x: f64, h: f64) -> Result<TaylorCheck> {
    let ef = ExponentFunctions::new(params, coeffs, c, x);
    let th = coeffs.theta;
    let stencil = |i: usize, h: f64| -> Result<[f64; 5]> {
        let mut v = [0.0; 5];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = ef.in_z(i, th + (k as f64 - 2.0) * h)?;
        }
        Ok(v)
    };
    let d1 = |v: &[f64; 5]| (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h);
    let d2 = |v: &[f64; 5]| (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
    let d3 = |v: &[f64; 5], h: f64| (-v[0] + 2.0 * v[1] - 2.0 * v[3] + v[4]) / (2.0 * h * h * h);
    let s0 = stencil(0, h)?;
    let s1 = stencil(1, h)?;
    let s2 = stencil(2, h)?;
    let (fine, coarse) = (d3(&s0, h), d3(&stencil(0, 2.0 * h)?, 2.0 * h));
    let third = fine + (fine - coarse) / 3.0;
    let two_chi = 2.0 * coeffs.chi;
    Ok(TaylorCheck {
        d1: d1(&s0),
        d2: d2(&s0),
        d3: third,
        d3_residual: (third - two_chi).abs() / two_chi.abs(),
        f1_d1: d1(&s1),
        f1_d2_residual: (d2(&s1) - c * coeffs.phi_prime).abs(),
        f2_d1_residual: ((s2[3] - s2[2]) / h - ef.beta_x).abs(),
        f2_d2: s2[3] - 2.0 * s2[2] + s2[1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DescentContour {
    C,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub param: f64,
    /// `-Re f0` on `C`, `+Re f0` on `D`.
    pub value: f64,
    pub re_f0: f64,
    /// Imaginary part of `f0`, unwrapped to be continuous from parameter 0.
    pub im_f0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteepDescentReport {
    pub contour: DescentContour,
    pub monotone: bool,
    pub max_at_zero: bool,
    pub profile: Vec<ProfileSample>,
}

pub const DESCENT_SLACK: f64 = 1e-12;

/// Samples the steep-descent profile on the grid `-pi + 2 pi k / n`,
/// `k = 1..=n`, and checks that it peaks at 0 and is monotone on each arc.
pub fn steep_descent_check(
    params: &ModelParams,
    coeffs: &ScalingCoefficients,
    contour: DescentContour,
    grid: usize,
) -> Result<SteepDescentReport> {
    if grid < 4 || grid % 2 != 0 {
        return Err(Error::Domain(format!("grid must be even and at least 4, got {grid}")));
    }
    let ef = ExponentFunctions::new(params, coeffs, 0.0, 0.0);
    let (curve, sign) = match contour {
        DescentContour::C => (Contour::CircleC { q: params.q, theta: coeffs.theta }, -1.0),
        DescentContour::D => (Contour::CircleD { q: params.q, theta: coeffs.theta }, 1.0),
    };
    let mut profile = Vec::with_capacity(grid);
    for k in 1..=grid {
        let t = -PI + 2.0 * PI * k as f64 / grid as f64;
        let z = curve.point(t);
        let re = ef.re_f0(z)?;
        let im = ef.f0_principal(z)?.im;
        profile.push(ProfileSample { param: t, value: sign * re, re_f0: re, im_f0: im });
    }
    unwrap_from_zero(&mut profile, grid / 2 - 1);

    let zero = grid / 2 - 1;
    let peak = profile[zero].value;
    let slack = |v: f64| DESCENT_SLACK * v.abs().max(1.0);
    let max_at_zero = profile.iter().all(|p| p.value <= peak + slack(peak));
    // nonincreasing on (0, pi], nondecreasing on (-pi, 0]
    let right = profile[zero..].windows(2).all(|w| w[1].value <= w[0].value + slack(w[0].value));
    let left = profile[..=zero].windows(2).all(|w| w[1].value >= w[0].value - slack(w[0].value));
    Ok(SteepDescentReport { contour, monotone: left && right && max_at_zero, max_at_zero, profile })
}

fn unwrap_from_zero(profile: &mut [ProfileSample], zero: usize) {
    let fix = |prev: f64, cur: f64| cur - 2.0 * PI * ((cur - prev) / (2.0 * PI)).round();
    for k in zero + 1..profile.len() {
        profile[k].im_f0 = fix(profile[k - 1].im_f0, profile[k].im_f0);
    }
    for k in (0..zero).rev() {
        profile[k].im_f0 = fix(profile[k + 1].im_f0, profile[k].im_f0);
    }
}

/// `g(b,s) = b sin s / (1 + b^2 - 2 b cos s)`
pub fn g_helper(b: f64, s: f64) -> f64 {
    b * s.sin() / (1.0 + b * b - 2.0 * b * s.cos())
}

/// `(1-b)^2/b * g(b,s)`, continued to `b = 0` by its limit `sin s`.
pub fn g_scaled(b: f64, s: f64) -> f64 {
    (1.0 - b) * (1.0 - b) * s.sin() / (1.0 + b * b - 2.0 * b * s.cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaResiduals {
    /// Smallest `scaled(b,s) - scaled(c,s)` over `-1 < b <= c < 1`, `s` in `[0, pi]`.
    pub part1_min: f64,
    /// Smallest gap of the second inequality over `0 < b < 1`, `t` in `[0, pi]`.
    pub part2_min: f64,
    /// Smallest strict gap for `b < c` and `s` in the open interval.
    pub part1_strict_min: f64,
    pub part2_strict_min: f64,
}

/// Evaluates both parts of the comparison lemma on a `grid x grid` mesh.
pub fn lemma_checks(grid: usize) -> LemmaResiduals {
    let bs: Vec<f64> = (1..grid).map(|i| -1.0 + 2.0 * i as f64 / grid as f64).collect();
    let ss: Vec<f64> = (0..=grid).map(|i| PI * i as f64 / grid as f64).collect();
    let interior = |s: f64| s > 0.0 && s < PI - 1e-9;
    let mut out = LemmaResiduals {
        part1_min: f64::INFINITY,
        part2_min: f64::INFINITY,
        part1_strict_min: f64::INFINITY,
        part2_strict_min: f64::INFINITY,
    };
    for &s in &ss {
        for (i, &b) in bs.iter().enumerate() {
            let gb = g_scaled(b, s);
            for &c in &bs[i..] {
                let d = gb - g_scaled(c, s);
                out.part1_min = out.part1_min.min(d);
                if c > b && interior(s) {
                    // relative to the size of the terms, which vanish at the ends
                    out.part1_strict_min = out.part1_strict_min.min(d / s.sin());
                }
            }
            if b > 0.0 {
                let d = g_scaled(b / 2.0, s).powi(2) - g_scaled(b, s) * s.sin();
                out.part2_min = out.part2_min.min(d);
                if interior(s) {
                    out.part2_strict_min = out.part2_strict_min.min(d);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    pub f_rhs: f64,
    pub f_identity_residual: f64,
    pub one_rhs: f64,
    pub one_identity_residual: f64,
    pub terms: usize,
}

/// Sums a series whose terms decay at least like `q^k`, stopping when the
/// geometric bound on the remainder drops below `tol`.
fn geometric_sum(
    q: f64,
    cfg: &QSeriesConfig,
    what: &'static str,
    mut term: impl FnMut(usize) -> f64,
) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    for k in 0..cfg.max_terms {
        let t = term(k);
        sum += t;
        // from k >= 1 on the terms are O(q^k) with ratio at most 2q < 1 once small
        if k >= 2 && t.abs() * 2.0 * q / (1.0 - q) < cfg.tol * sum.abs().max(1.0) {
            return Ok((sum, k + 1));
        }
    }
    Err(Error::Convergence { what, max_terms: cfg.max_terms })
}

/// Evaluates both sides of the two series identities that make the
/// steep-descent inequalities close: the coefficient of `g(r,s)` on `C`
/// equals `f`, and the coefficient of `g(q^theta,t)` on `D` equals 1.
pub fn identity_checks(
    params: &ModelParams,
    coeffs: &ScalingCoefficients,
    cfg: &QSeriesConfig,
) -> Result<IdentityResiduals> {
    if !params.strict_order() {
        return Err(Error::Domain("identity checks need 0 < nu < mu < 1".into()));
    }
    let (q, mu, nu, kappa) = (params.q, params.mu, params.nu, coeffs.kappa);
    let qt = q.powf(coeffs.theta);
    let r = 1.0 - qt;
    let u = |a: f64| a / (1.0 - a);
    let big_b = |v: f64| (1.0 + r * v).powi(2) / (r * v);
    let weight = |v: f64| (1.0 - r).powi(2) / r * (r * v) / (1.0 + r * v).powi(2);

    let (f_rhs, n1) = geometric_sum(q, cfg, "(f) identity series", |k| {
        let qk = q.powi(k as i32);
        let (um, un, uq) = (u(mu * qk), u(nu * qk), u(qk * q));
        kappa * (1.0 - big_b(um) / big_b(un)) * weight(um) + (1.0 - big_b(un) / big_b(uq)) * weight(un)
    })?;

    let h = |x: f64| x / (1.0 - x).powi(2);
    let (sum, n2) = geometric_sum(q, cfg, "(1) identity series", |k| {
        let x = qt * q.powi(k as i32);
        kappa * (h(mu * x) - h(nu * x)) + h(nu * x) - h(x * q)
    })?;
    let one_rhs = r * r / qt * sum;

    Ok(IdentityResiduals {
        f_rhs,
        f_identity_residual: (f_rhs - coeffs.f).abs(),
        one_rhs,
        one_identity_residual: (one_rhs - 1.0).abs(),
        terms: n1.max(n2),
    })
}

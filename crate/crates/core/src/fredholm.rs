//! Numerical Fredholm determinants: the Nyström engine, the Airy function,
//! the Tracy-Widom GUE distribution, the limiting contour kernel and the
//! finite-time kernel of the q-Laplace transform of `X_N(tau)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::exact_q_laplace;
use crate::error::{Error, Result};
use crate::qspecial::{log_q_pochhammer_principal, QSeriesConfig};
use crate::scaling::{beta_x, ModelParams, ScalingCoefficients};

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    /// Nodes by Newton iteration on the three-term recurrence.
    pub fn gauss_legendre(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                if n == 1 {
                    p0 = 1.0;
                    p1 = x;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights, order }
    }

    /// Nodes and weights mapped affinely to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        (self.nodes.iter().map(|x| mid + half * x).collect(), self.weights.iter().map(|w| half * w).collect())
    }

    /// Composite rule: `panels` equal panels on `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.order);
        let mut ws = Vec::with_capacity(panels * self.order);
        for p in 0..panels {
            let (x, w) = self.on(a + p as f64 * h, a + (p + 1) as f64 * h);
            xs.extend(x);
            ws.extend(w);
        }
        (xs, ws)
    }
}

/// A discretised operator: quadrature points on a contour and the complex
/// weights `w_j gamma'(t_j)` of the integration measure.
#[derive(Debug, Clone, PartialEq)]
pub struct FredholmProblem {
    pub points: Vec<Complex64>,
    pub weights: Vec<Complex64>,
}

impl FredholmProblem {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `det(delta_ij + sign * w_j K(x_i, x_j))`
    pub fn det(&self, sign: f64, kernel: impl Fn(Complex64, Complex64) -> Complex64) -> Complex64 {
        let n = self.len();
        nystrom_det(n, |i, j| sign * self.weights[j] * kernel(self.points[i], self.points[j]))
    }
}

/// `det(I + M)` for the `n x n` matrix with entries `entry(i, j)`.
pub fn nystrom_det(n: usize, entry: impl Fn(usize, usize) -> Complex64) -> Complex64 {
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 + entry(i, j) } else { entry(i, j) });
    m.lu().determinant()
}

/// Evaluates `value(order)` and `value(2 order)`; fails if they differ by more
/// than `tol`.
pub fn fredholm_det(order: usize, tol: f64, value: impl Fn(usize) -> Result<Complex64>) -> Result<(Complex64, f64)> {
    let a = value(order)?;
    let b = value(2 * order)?;
    let change = (a - b).norm();
    if change > tol {
        return Err(Error::NonConvergence { change, tol });
    }
    Ok((b, change))
}

// ---------------------------------------------------------------------------
// Airy function

const AIRY_MIN: f64 = -15.0;
const AIRY_MAX: f64 = 10.0;

const AIRY_PANEL: f64 = 0.5;
const AIRY_PANEL_ORDER: usize = 16;

struct AiryRule {
    t: Vec<f64>,
    w: Vec<f64>,
}

fn airy_rule() -> &'static AiryRule {
    static RULE: OnceLock<AiryRule> = OnceLock::new();
    RULE.get_or_init(|| {
        // |integrand| <= exp(-t^3/3 + 7.5 t) for x >= -15, below 1e-19 past t = 9
        let (t, w) = QuadratureRule::gauss_legendre(AIRY_PANEL_ORDER).composite(0.0, 9.0, 18);
        AiryRule { t, w }
    })
}

/// `(1/2 pi i) int exp(z^3/3 - x z) dz` over the rays at angle `+-pi/3`,
/// written as `Im(e^{i pi/3} int_0^inf exp(-t^3/3 - x t e^{i pi/3}) dt) / pi`,
/// for any `x >= -15`. Arguments beyond 40 return 0 (`Ai(40) < 1e-73`).
fn airy_unchecked(x: f64) -> f64 {
    if x > 40.0 {
        return 0.0;
    }
    let rule = airy_rule();
    // |integrand| = exp(-t^3/3 - x t/2); stop at the first panel past 1e-19
    let neg = (-x).max(0.0) / 2.0;
    let mut end = 0.0;
    while end < 9.0 && end * end * end / 3.0 - neg * end < 44.0 {
        end += AIRY_PANEL;
    }
    let used = ((end / AIRY_PANEL).round() as usize * AIRY_PANEL_ORDER).min(rule.t.len());
    let e = Complex64::cis(PI / 3.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&t, &w) in rule.t[..used].iter().zip(&rule.w[..used]) {
        let expo = -t * t * t / 3.0 - x * t * e;
        if expo.re < -45.0 {
            continue;
        }
        acc += w * expo.exp();
    }
    (e * acc).im / PI
}

/// `Ai(x)` on `[-15, 10]` from its contour integral.
pub fn airy(x: f64) -> Result<f64> {
    if !(AIRY_MIN..=AIRY_MAX).contains(&x) {
        return Err(Error::Range { target: x, lo: AIRY_MIN, hi: AIRY_MAX });
    }
    Ok(airy_unchecked(x))
}

/// Maclaurin series of `Ai`, accurate for `|x| <= 2`.
pub fn airy_series(x: f64) -> f64 {
    let c1 = 0.355_028_053_887_817_2; // Ai(0)
    let c2 = 0.258_819_403_792_806_8; // -Ai'(0)
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    let x3 = x * x * x;
    for k in 1..60 {
        let k = k as f64;
        tf *= x3 / ((3.0 * k - 1.0) * (3.0 * k));
        tg *= x3 / ((3.0 * k) * (3.0 * k + 1.0));
        f += tf;
        g += tg;
    }
    c1 * f - c2 * g
}

/// `(1/2 pi i) int exp(a z^3/3 + b z^2 + c z) dz` over the V through 0 at
/// angle `pi/3`, by direct quadrature (`a > 0`).
pub fn cubic_contour_integral(a: f64, b: f64, c: f64) -> f64 {
    let (t, w) = QuadratureRule::gauss_legendre(20).composite(0.0, 12.0, 60);
    let e = Complex64::cis(PI / 3.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&t, &w) in t.iter().zip(&w) {
        let z = t * e;
        let expo = a * z * z * z / 3.0 + b * z * z + c * z;
        if expo.re > -60.0 {
            acc += w * expo.exp();
        }
    }
    // the lower ray is the conjugate of the upper one
    (e * acc).im / PI
}

/// `a^{-1/3} exp(2b^3/(3a^2) - bc/a) Ai(b^2/a^{4/3} - c/a^{1/3})`
pub fn cubic_closed_form(a: f64, b: f64, c: f64) -> Result<f64> {
    let a13 = a.cbrt();
    Ok(1.0 / a13
        * (2.0 * b * b * b / (3.0 * a * a) - b * c / a).exp()
        * airy(b * b / (a13 * a13 * a13 * a13) - c / a13)?)
}

// ---------------------------------------------------------------------------
// Tracy-Widom GUE

const GUE_MIN: f64 = -10.0;
const GUE_MAX: f64 = 6.0;

/// `det(I - K_Ai)` on `L^2(x, inf)` with
/// `K_Ai(a,b) = int_0^inf Ai(x+a+l) Ai(x+b+l) dl`; both the operator variable
/// and `l` are mapped from `u` in `[0,1)` by `l = -10 log(1-u)`.
pub fn f_gue(x: f64, order: usize) -> Result<f64> {
    if !(GUE_MIN..=GUE_MAX).contains(&x) {
        return Err(Error::Range { target: x, lo: GUE_MIN, hi: GUE_MAX });
    }
    let (u, wu) = QuadratureRule::gauss_legendre(order).on(0.0, 1.0);
    let n = order;
    let s: Vec<f64> = u.iter().map(|u| -10.0 * (-u).ln_1p()).collect();
    let w: Vec<f64> = u.iter().zip(&wu).map(|(u, w)| 10.0 * w / (1.0 - u)).collect();
    // Ai(x + s_i + s_k) is symmetric in (i, k)
    let mut ai = vec![0.0; n * n];
    for i in 0..n {
        for k in i..n {
            let v = airy_unchecked(x + s[i] + s[k]);
            ai[i * n + k] = v;
            ai[k * n + i] = v;
        }
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += w[k] * ai[i * n + k] * ai[j * n + k];
            }
            let (wi, wj) = (w[i].sqrt(), w[j].sqrt());
            let v = -wi * acc * wj;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] += 1.0;
    }
    Ok(m.lu().determinant().clamp(0.0, 1.0))
}

/// `F_GUE` tabulated on `[-10, 6]` with step `0.01` and interpolated by
/// monotone cubic Hermite splines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwTable {
    pub x0: f64,
    pub step: f64,
    pub order: usize,
    pub values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TwTable {
    pub fn new(order: usize) -> Result<Self> {
        let step = 0.01;
        let n = ((GUE_MAX - GUE_MIN) / step).round() as usize + 1;
        let values =
            (0..n).into_par_iter().map(|k| f_gue(GUE_MIN + k as f64 * step, order)).collect::<Result<Vec<_>>>()?;
        // the determinant is monotone only up to quadrature noise
        let mut values = values;
        for k in 1..n {
            values[k] = values[k].max(values[k - 1]);
        }
        let slopes = fritsch_carlson(&values, step);
        Ok(Self { x0: GUE_MIN, step, order, values, slopes })
    }

    /// Interpolated `F_GUE(x)`; 0 below the table and 1 above it.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.values.len();
        if x < self.x0 {
            return 0.0;
        }
        let pos = (x - self.x0) / self.step;
        let k = pos.floor() as usize;
        if k + 1 >= n {
            return if k + 1 == n && pos == k as f64 { self.values[n - 1] } else { 1.0 };
        }
        let t = pos - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &v)| (self.x0 + k as f64 * self.step, v))
    }

    /// `int x dF` and `int x^2 dF` over the tabulated range.
    pub fn moments(&self) -> (f64, f64) {
        // int_a^b x^k dF = b^k F(b) - a^k F(a) - k int_a^b x^{k-1} F dx
        let b = self.x0 + (self.values.len() - 1) as f64 * self.step;
        let (fa, fb) = (self.values[0], *self.values.last().unwrap());
        let (mut i0, mut i1) = (0.0, 0.0);
        for (k, w) in self.values.windows(2).enumerate() {
            let xl = self.x0 + k as f64 * self.step;
            let xr = xl + self.step;
            i0 += 0.5 * self.step * (w[0] + w[1]);
            i1 += 0.5 * self.step * (xl * w[0] + xr * w[1]);
        }
        let mean = b * fb - self.x0 * fa - i0;
        let second = b * b * fb - self.x0 * self.x0 * fa - 2.0 * i1;
        (mean, second)
    }
}

fn fritsch_carlson(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for k in 1..n - 1 {
        m[k] = if d[k - 1] * d[k] <= 0.0 { 0.0 } else { 0.5 * (d[k - 1] + d[k]) };
    }
    for k in 0..n - 1 {
        if d[k] == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let (a, b) = (m[k] / d[k], m[k + 1] / d[k]);
        let s = a * a + b * b;
        if s > 9.0 {
            let t = 3.0 / s.sqrt();
            m[k] = t * a * d[k];
            m[k + 1] = t * b * d[k];
        }
    }
    m
}

/// The shared order-60 table, built on first use.
pub fn tw_table() -> &'static TwTable {
    static TABLE: OnceLock<TwTable> = OnceLock::new();
    TABLE.get_or_init(|| TwTable::new(60).expect("F_GUE table on its supported range"))
}

// ---------------------------------------------------------------------------
// Limiting contour kernel

/// Contour-tip offsets for the `w` and `z` variables; the integrand is
/// analytic between the shifted and unshifted contours.
const W_TIP: f64 = -0.5;
const Z_TIP: f64 = 0.5;
pub const V_ANGLE: f64 = PI / 3.0;

/// Length of both legs of a V with tip `tip` beyond which the cubic term
/// pushes `|exp(...)|` below `1e-18` relative to its size at the tip.
fn v_length(chi: f64, quad: f64, lin: f64, tip: f64) -> f64 {
    let mut l: f64 = 1.0;
    loop {
        let r = l + tip.abs();
        if chi * l * l * l / 3.0 * 0.99 - quad.abs() * r * r - lin.abs() * r - chi * tip.abs().powi(3) > 45.0 {
            return l;
        }
        l += 0.25;
    }
}

fn v_nodes(tip: f64, angle: f64, length: f64, order: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let panels = (length / 0.75).ceil().max(1.0) as usize;
    let (t, w) = QuadratureRule::gauss_legendre(order).composite(0.0, length, panels);
    let (up, down) = (Complex64::cis(angle), Complex64::cis(-angle));
    let mut pts = Vec::with_capacity(2 * t.len());
    let mut wts = Vec::with_capacity(2 * t.len());
    // lower leg traversed towards the tip, then the upper leg outwards
    for (&t, &w) in t.iter().zip(&w).rev() {
        pts.push(tip + t * down);
        wts.push(-w * down);
    }
    for (&t, &w) in t.iter().zip(&w) {
        pts.push(tip + t * up);
        wts.push(w * up);
    }
    (pts, wts)
}

/// `det(1 - K'_{x,inf})` with
/// `K'(w,w') = (1/2 pi i) int dz / ((z-w')(w-z)) e^{G(z)} / e^{G(w)}`,
/// `G(z) = chi z^3/3 + c phi' z^2/2 + beta_x z`, on the V of angle
/// `pi - phi` for `w` and `phi` for `z`.
///
/// The operator acts on `L^2(dw / 2 pi i)` along the `w` contour traversed
/// downwards; with that orientation the determinant is `F_GUE(x)`.
/// `order` is the per-panel Gauss-Legendre order.
pub fn f_gue_via_contour(x: f64, c: f64, coeffs: &ScalingCoefficients, order: usize) -> Result<f64> {
    let chi = coeffs.chi;
    if !(chi > 0.0) || !coeffs.phi_prime.is_finite() {
        return Err(Error::Domain(format!("need chi > 0 and finite phi', got chi={chi}")));
    }
    let quad = 0.5 * c * coeffs.phi_prime;
    let lin = beta_x(coeffs, c, x);
    let g = |z: Complex64| chi * z * z * z / 3.0 + quad * z * z + lin * z;
    let (zs, zw) = v_nodes(Z_TIP, V_ANGLE, v_length(chi, quad, lin, Z_TIP), order);
    let (ws, ww) = v_nodes(W_TIP, PI - V_ANGLE, v_length(chi, quad, lin, W_TIP), order);
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let ez: Vec<Complex64> = zs.iter().zip(&zw).map(|(&z, &w)| w * g(z).exp() / two_pi_i).collect();
    let emw: Vec<Complex64> = ws.iter().map(|&w| (-g(w)).exp()).collect();
    let n = ws.len();
    let mut kernel = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &z) in zs.iter().enumerate() {
                acc += ez[k] / ((z - ws[j]) * (ws[i] - z));
            }
            kernel[(i, j)] = acc * emw[i];
        }
    }
    // downward orientation of the w contour, measure dw / 2 pi i
    let det = nystrom_det(n, |i, j| -(-ww[j] / two_pi_i) * kernel[(i, j)]);
    if det.im.abs() > 1e-8 {
        return Err(Error::Invariant(format!("contour determinant not real: {det}")));
    }
    Ok(det.re)
}

// ---------------------------------------------------------------------------
// Finite-time kernel

/// Radius of the circle around 1 for the finite-time determinant: the
/// conventional `0.25 (min(1/q, 1/nu) - 1)` capped at `0.5`, further limited
/// to `0.5 (1 - sqrt q)/(1 + sqrt q)` so that `q^s C_1` (`Re s = 1/2`) stays
/// inside `C_1` and the kernel's denominator never vanishes.
pub fn default_radius(params: &ModelParams) -> f64 {
    let far = if params.nu > 0.0 { (1.0 / params.q).min(1.0 / params.nu) } else { 1.0 / params.q };
    let conventional = (0.25 * (far - 1.0)).min(0.5);
    let sq = params.q.sqrt();
    conventional.min(0.5 * (1.0 - sq) / (1.0 + sq))
}

/// `log h(w)` with
/// `h(w) = ((nu w)/(w))^N ((mu w)/(nu w))^tau / (nu w)`, `(a)` short for `(a;q)_inf`.
/// Only `exp` of the result is used, so principal factorwise logs suffice.
fn log_h(params: &ModelParams, n: u64, tau: u64, w: Complex64, cfg: &QSeriesConfig) -> Result<Complex64> {
    let lp = |a: f64| log_q_pochhammer_principal(a * w, cfg);
    let (l1, lmu, lnu) = (lp(1.0)?, lp(params.mu)?, lp(params.nu)?);
    Ok(n as f64 * (lnu - l1) + tau as f64 * (lmu - lnu) - lnu)
}

/// Composite rule for `s = 1/2 + i y`, `y` in `[-L, L]`, unit panels.
fn s_rule(l_trunc: f64, panel_order: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = (2.0 * l_trunc).ceil() as usize;
    QuadratureRule::gauss_legendre(panel_order).composite(-l_trunc, l_trunc, panels)
}

fn check_sine_poles(ys: &[f64]) -> Result<()> {
    // Re s = 1/2 keeps every node at distance >= 1/2 from the integers
    let re = 0.5f64;
    let d = (re - re.round()).abs();
    if ys.is_empty() || d < 1e-8 {
        return Err(Error::PoleProximity { distance: d });
    }
    Ok(())
}

/// Per-`w` data of the `s` integral: the points `q^s w` and the factors
/// `(ds / 2 pi i) pi / sin(-pi s) (-zeta)^s h(w)/h(q^s w)`.
struct SIntegrand {
    shifted: Vec<Complex64>,
    factor: Vec<Complex64>,
}

fn s_integrand(
    params: &ModelParams,
    n: u64,
    tau: u64,
    zeta: f64,
    w: Complex64,
    ys: &[f64],
    wy: &[f64],
    cfg: &QSeriesConfig,
) -> Result<SIntegrand> {
    let lq = params.log_q();
    let lz = (-zeta).ln();
    let lhw = log_h(params, n, tau, w, cfg)?;
    let mut shifted = Vec::with_capacity(ys.len());
    let mut factor = Vec::with_capacity(ys.len());
    for (&y, &wt) in ys.iter().zip(wy) {
        let s = Complex64::new(0.5, y);
        let qs = (s * lq).exp();
        let ws = qs * w;
        // ds/(2 pi i) = dy/(2 pi);  pi/sin(-pi s) = -pi/cosh(pi y)
        let pre = -wt / (2.0 * (PI * y).cosh());
        let expo = s * lz + lhw - log_h(params, n, tau, ws, cfg)?;
        shifted.push(ws);
        factor.push(pre * expo.exp());
    }
    Ok(SIntegrand { shifted, factor })
}

/// `K_zeta(w, w')` with the `s` integral truncated to `|Im s| <= l_trunc`
/// and integrated by unit panels of `panel_order` Gauss-Legendre nodes.
#[allow(clippy::too_many_arguments)]
pub fn finite_time_kernel(
    params: &ModelParams,
    n: u64,
    tau: u64,
    zeta: f64,
    w: Complex64,
    w_prime: Complex64,
    panel_order: usize,
    l_trunc: f64,
) -> Result<Complex64> {
    if !(zeta < 0.0) {
        return Err(Error::Domain(format!("zeta must be negative, got {zeta}")));
    }
    let (ys, wy) = s_rule(l_trunc, panel_order);
    check_sine_poles(&ys)?;
    let si = s_integrand(params, n, tau, zeta, w, &ys, &wy, &params.series())?;
    Ok(si.shifted.iter().zip(&si.factor).map(|(&p, &f)| f / (p - w_prime)).sum())
}

/// `det(I + K_zeta)` on the circle of radius `radius` around 1 with
/// `n_w` trapezoid nodes and the `s` integral as in [`finite_time_kernel`].
#[allow(clippy::too_many_arguments)]
fn finite_time_det(
    params: &ModelParams,
    n: u64,
    tau: u64,
    zeta: f64,
    radius: f64,
    n_w: usize,
    panel_order: usize,
    l_trunc: f64,
) -> Result<Complex64> {
    let cfg = params.series();
    let (ys, wy) = s_rule(l_trunc, panel_order);
    check_sine_poles(&ys)?;
    // trapezoid rule on the circle, measure dw / 2 pi i
    let ts: Vec<f64> = (0..n_w).map(|k| 2.0 * PI * k as f64 / n_w as f64).collect();
    let pts: Vec<Complex64> = ts.iter().map(|&t| 1.0 + radius * Complex64::cis(t)).collect();
    let wts: Vec<Complex64> = ts.iter().map(|&t| radius * Complex64::cis(t) / n_w as f64).collect();
    let rows = pts.iter().map(|&w| s_integrand(params, n, tau, zeta, w, &ys, &wy, &cfg)).collect::<Result<Vec<_>>>()?;
    Ok(nystrom_det(n_w, |i, j| {
        let r = &rows[i];
        let k: Complex64 = r.shifted.iter().zip(&r.factor).map(|(&p, &f)| f / (p - pts[j])).sum();
        wts[j] * k
    }))
}

/// Truncation of the `s` integral: start at 10 and double until the
/// envelope `pi e^{-pi L} (-zeta)^{1/2} max|h ratio| / min|q^s w - w'|`
/// is below `1e-12`. The `h` ratio is periodic in `Im s`, so its maximum is
/// sampled over one period.
fn choose_l_trunc(params: &ModelParams, n: u64, tau: u64, zeta: f64, radius: f64) -> Result<f64> {
    let cfg = params.series();
    let period = 2.0 * PI / params.log_q().abs();
    let mut max_ratio: f64 = 0.0;
    let mut min_dist = f64::INFINITY;
    let sq = params.q.sqrt();
    for a in 0..16 {
        let w = 1.0 + radius * Complex64::cis(2.0 * PI * a as f64 / 16.0);
        let lhw = log_h(params, n, tau, w, &cfg)?;
        for b in 0..32 {
            let y = period * b as f64 / 32.0;
            let qs = (Complex64::new(0.5, y) * params.log_q()).exp();
            max_ratio = max_ratio.max((lhw - log_h(params, n, tau, qs * w, &cfg)?).exp().norm());
        }
    }
    // |q^s w| <= sqrt(q)(1 + r) while |w'| >= 1 - r
    min_dist = min_dist.min((1.0 - radius) - sq * (1.0 + radius));
    if !(min_dist > 0.0) {
        return Err(Error::Domain(format!("radius {radius} lets q^s C_1 meet C_1")));
    }
    let mut l = 10.0;
    while PI * (-PI * l).exp() * (-zeta).sqrt() * max_ratio / min_dist >= 1e-12 {
        l *= 2.0;
        if l > 1000.0 {
            return Err(Error::Convergence { what: "s-integral truncation", max_terms: 1000 });
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MellinBarnesCheck {
    pub lhs: f64,
    /// Certified bound on the truncation error of `lhs`.
    pub lhs_bound: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    /// `|lhs - rhs| + lhs_bound`
    pub gap: f64,
    pub radius: f64,
    pub l_trunc: f64,
    pub orders: (usize, usize),
    /// Change of the determinant when both orders are doubled.
    pub doubling_change: f64,
}

/// Both sides of the q-Laplace identity for step initial data: the exact
/// expectation `E[1/(zeta q^{X_N(tau)+N};q)_inf]` by forward recursion on
/// the joint law, and `det(I + K_zeta)` on `C_1`.
pub fn mellin_barnes_check(
    params: &ModelParams,
    n: usize,
    tau: u64,
    zeta: f64,
    radius: Option<f64>,
    orders: (usize, usize),
) -> Result<MellinBarnesCheck> {
    if n == 0 || n > 3 {
        return Err(Error::Domain(format!("exact side supports 1 <= N <= 3, got {n}")));
    }
    if tau > 6 {
        return Err(Error::Domain(format!("exact side supports tau <= 6, got {tau}")));
    }
    if !(zeta < 0.0) {
        return Err(Error::Domain(format!("zeta must be negative, got {zeta}")));
    }
    let radius = radius.unwrap_or_else(|| default_radius(params));
    let far = if params.nu > 0.0 { (1.0 / params.q).min(1.0 / params.nu) } else { 1.0 / params.q };
    if !(radius > 0.0 && radius < 1.0 && 1.0 + radius < far) {
        return Err(Error::Domain(format!("radius {radius} must keep 0, 1/q and 1/nu outside C_1")));
    }
    let (lhs, lhs_bound) = exact_q_laplace(params, n, tau, zeta)?;
    let l_trunc = choose_l_trunc(params, n as u64, tau, zeta, radius)?;
    let (n_w, p) = orders;
    let rhs = finite_time_det(params, n as u64, tau, zeta, radius, n_w, p, l_trunc)?;
    let doubled = finite_time_det(params, n as u64, tau, zeta, radius, 2 * n_w, 2 * p, l_trunc)?;
    Ok(MellinBarnesCheck {
        lhs,
        lhs_bound,
        rhs_re: rhs.re,
        rhs_im: rhs.im,
        gap: (rhs - lhs).norm() + lhs_bound,
        radius,
        l_trunc,
        orders,
        doubling_change: (doubled - rhs).norm(),
    })
}

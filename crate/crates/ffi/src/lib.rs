//! C interface to `qhahn-core`.
//!
//! Every function returns a [`QhahnStatus`] code and writes results through
//! out-pointers. Models are opaque handles created by [`qhahn_model_new`] and
//! released with [`qhahn_model_free`]. The message of the last failure on the
//! calling thread is available from [`qhahn_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qhahn_core::dynamics::{simulate, InitialCondition, TableCache};
use qhahn_core::fredholm::{f_gue, mellin_barnes_check, tw_table};
use qhahn_core::scaling::{coefficients, scaling_maps, xi_of, ModelParams, ScalingCoefficients};
use qhahn_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QhahnStatus {
    Ok = 0,
    NullPointer = 1,
    /// Parameters outside the admissible region.
    Domain = 2,
    /// A series, quadrature or determinant failed to converge.
    Convergence = 3,
    /// Pole or branch-cut hit.
    Singular = 4,
    /// Internal invariant broken or panic caught.
    Internal = 5,
}

/// Scaling coefficients of a model at its `theta`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QhahnCoefficients {
    pub theta: f64,
    pub kappa: f64,
    pub f: f64,
    pub chi: f64,
    pub phi: f64,
    pub phi_prime: f64,
    /// Nonzero when `q <= nu < mu <= 1/2`.
    pub munu_ok: i32,
    /// Nonzero when `theta` lies below its upper bound.
    pub theta_ok: i32,
}

/// Opaque model handle.
pub struct QhahnModel {
    params: ModelParams,
    coeffs: ScalingCoefficients,
    cache: TableCache,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QhahnStatus {
    match e {
        Error::Domain(_) | Error::Range { .. } | Error::Config(_) | Error::Window { .. } => QhahnStatus::Domain,
        Error::Convergence { .. } | Error::NonConvergence { .. } => QhahnStatus::Convergence,
        Error::Pole { .. } | Error::Branch { .. } | Error::PoleProximity { .. } => QhahnStatus::Singular,
        Error::Normalization(_) | Error::Invariant(_) | Error::Io(_) => QhahnStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> QhahnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QhahnStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside qhahn".into());
            QhahnStatus::Internal
        }
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        if $($p.is_null())||+ {
            set_error("null pointer argument".into());
            return QhahnStatus::NullPointer;
        }
    };
}

/// Builds a model for `(q, mu, nu)` at `theta`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qhahn_model_new(
    q: f64,
    mu: f64,
    nu: f64,
    theta: f64,
    out: *mut *mut QhahnModel,
) -> QhahnStatus {
    non_null!(out);
    guard(|| {
        let params = ModelParams::new(q, mu, nu)?;
        let coeffs = coefficients(&params, theta)?;
        let cache = TableCache::new(&params)?;
        *out = Box::into_raw(Box::new(QhahnModel { params, coeffs, cache }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`qhahn_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qhahn_model_free(model: *mut QhahnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qhahn_model_coefficients(
    model: *const QhahnModel,
    out: *mut QhahnCoefficients,
) -> QhahnStatus {
    non_null!(model, out);
    let m = &*model;
    let c = m.coeffs;
    let cond = m.params.conditions(c.theta);
    *out = QhahnCoefficients {
        theta: c.theta,
        kappa: c.kappa,
        f: c.f,
        chi: c.chi,
        phi: c.phi,
        phi_prime: c.phi_prime,
        munu_ok: cond.munu as i32,
        theta_ok: cond.theta_ok as i32,
    };
    QhahnStatus::Ok
}

/// One replica from step initial data: writes `X_N(floor tau(N,c))` and the
/// rescaled `xi_N`.
///
/// # Safety
/// `model` must be a live handle; `out_x` and `out_xi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qhahn_simulate(
    model: *const QhahnModel,
    n: u64,
    c: f64,
    seed: u64,
    replica: u64,
    out_x: *mut i64,
    out_xi: *mut f64,
) -> QhahnStatus {
    non_null!(model, out_x, out_xi);
    let m = &*model;
    guard(|| {
        if n == 0 {
            return Err(Error::Domain("N must be positive".into()));
        }
        let tau = scaling_maps(&m.coeffs, n, c, 0.0).tau.max(0.0).floor() as u64;
        let x = simulate(&m.cache, n as usize, tau, InitialCondition::Step, seed, replica)?.x_n;
        *out_x = x;
        *out_xi = xi_of(&m.coeffs, x, n, c);
        Ok(())
    })
}

/// `F_GUE(x)` by a Nystrom determinant of the given order.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qhahn_f_gue(x: f64, order: usize, out: *mut f64) -> QhahnStatus {
    non_null!(out);
    guard(|| {
        *out = f_gue(x, order)?;
        Ok(())
    })
}

/// `F_GUE(x)` from the cached interpolation table.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qhahn_tw_cdf(x: f64, out: *mut f64) -> QhahnStatus {
    non_null!(out);
    guard(|| {
        *out = tw_table().cdf(x);
        Ok(())
    })
}

/// Exact `E[1/(zeta q^{X_N(tau)+N}; q)_inf]` and its Fredholm determinant
/// (real part) for `N <= 3`, `tau <= 6` and `zeta < 0`.
///
/// # Safety
/// `model` must be a live handle; `out_lhs` and `out_det` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qhahn_q_laplace(
    model: *const QhahnModel,
    n: usize,
    tau: u64,
    zeta: f64,
    out_lhs: *mut f64,
    out_det: *mut f64,
) -> QhahnStatus {
    non_null!(model, out_lhs, out_det);
    let m = &*model;
    guard(|| {
        let r = mellin_barnes_check(&m.params, n, tau, zeta, None, (48, 16))?;
        *out_lhs = r.lhs;
        *out_det = r.rhs_re;
        Ok(())
    })
}

/// Message of the last failure on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qhahn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn qhahn_status_str(status: QhahnStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        QhahnStatus::Ok => b"ok\0",
        QhahnStatus::NullPointer => b"null pointer\0",
        QhahnStatus::Domain => b"domain error\0",
        QhahnStatus::Convergence => b"convergence failure\0",
        QhahnStatus::Singular => b"pole or branch cut\0",
        QhahnStatus::Internal => b"internal error\0",
    };
    s.as_ptr() as *const c_char
}

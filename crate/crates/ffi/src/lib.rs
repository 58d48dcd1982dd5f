//! C ABI over `strassen-lab`.
//!
//! Objects are opaque heap handles created by `sl_*_new` and released with
//! the matching `sl_*_free`. Every fallible call returns an [`SlStatus`] and
//! writes its result through an out-pointer; on failure a description is
//! available from [`sl_last_error`] on the same thread. Panics never cross
//! the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use strassen_lab::clt::lambda_binary;
use strassen_lab::finite_n::NestedInstance;
use strassen_lab::ldp::{rate_f_binary, rate_g_binary};
use strassen_lab::mdp::{mdp_rate_lower, mdp_rate_upper};
use strassen_lab::transport::{ecp, ot_cost};
use strassen_lab::{CostMatrix, Dist, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    InvalidArgument = 1,
    InvalidDistribution = 2,
    DimensionMismatch = 3,
    AlphabetMismatch = 4,
    SizeGuard = 5,
    Infeasible = 6,
    NullPointer = 7,
    Panic = 8,
}

/// Probability distribution on a finite alphabet.
pub struct SlDist(Dist);

/// Cost matrix.
pub struct SlCost(CostMatrix);

/// Type-lattice instance for a fixed `n`, reusable across thresholds.
pub struct SlNested(NestedInstance);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SlStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SlStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            let status = match &e {
                Error::InvalidArgument(_) => SlStatus::InvalidArgument,
                Error::InvalidDistribution(_) => SlStatus::InvalidDistribution,
                Error::Dimension(_) => SlStatus::DimensionMismatch,
                Error::AlphabetMismatch(_) => SlStatus::AlphabetMismatch,
                Error::SizeGuard(_) => SlStatus::SizeGuard,
                Error::Infeasible(_) => SlStatus::Infeasible,
            };
            set_error(e.to_string());
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SlStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Distribution from `len` masses.
///
/// # Safety
/// `mass` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_dist_new(
    mass: *const f64,
    len: usize,
    out: *mut *mut SlDist,
) -> SlStatus {
    guard(|| {
        let d = Dist::from_mass(slice(mass, len, "mass")?.to_vec())?;
        put(out, Box::into_raw(Box::new(SlDist(d))), "out")
    })
}

/// Bernoulli distribution `[a, 1 - a]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_dist_binary(a: f64, out: *mut *mut SlDist) -> SlStatus {
    guard(|| {
        put(
            out,
            Box::into_raw(Box::new(SlDist(Dist::binary(a)?))),
            "out",
        )
    })
}

/// # Safety
/// `d` must come from `sl_dist_new`/`sl_dist_binary` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sl_dist_free(d: *mut SlDist) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Cost matrix from `rows * cols` doubles in row-major order.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_cost_new(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut SlCost,
) -> SlStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or(Error::InvalidArgument("cost dimensions overflow".into()))?;
        let c = CostMatrix::new(rows, cols, slice(data, len, "data")?.to_vec())?;
        put(out, Box::into_raw(Box::new(SlCost(c))), "out")
    })
}

/// Hamming cost on a `k`-letter alphabet.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_cost_hamming(k: usize, out: *mut *mut SlCost) -> SlStatus {
    guard(|| {
        if k == 0 {
            return Err(Error::InvalidArgument("empty alphabet".into()).into());
        }
        put(
            out,
            Box::into_raw(Box::new(SlCost(CostMatrix::hamming(k)))),
            "out",
        )
    })
}

/// # Safety
/// `c` must come from `sl_cost_new`/`sl_cost_hamming` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sl_cost_free(c: *mut SlCost) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Optimal transport cost `E(P_X, P_Y)`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_ot_cost(
    px: *const SlDist,
    py: *const SlDist,
    c: *const SlCost,
    out: *mut f64,
) -> SlStatus {
    guard(|| {
        let v = ot_cost(&get(px, "px")?.0, &get(py, "py")?.0, &get(c, "c")?.0)?.objective;
        put(out, v, "out")
    })
}

/// Single-letter excess-cost probability `G_α(P_X, P_Y)`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_ecp(
    px: *const SlDist,
    py: *const SlDist,
    c: *const SlCost,
    alpha: f64,
    out: *mut f64,
) -> SlStatus {
    guard(|| {
        let v = ecp(&get(px, "px")?.0, &get(py, "py")?.0, &get(c, "c")?.0, alpha)?.objective;
        put(out, v, "out")
    })
}

/// Builds the type-lattice instance for block length `n`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_nested_new(
    px: *const SlDist,
    py: *const SlDist,
    c: *const SlCost,
    n: usize,
    out: *mut *mut SlNested,
) -> SlStatus {
    guard(|| {
        let inst = NestedInstance::build(&get(px, "px")?.0, &get(py, "py")?.0, &get(c, "c")?.0, n)?;
        put(out, Box::into_raw(Box::new(SlNested(inst))), "out")
    })
}

/// `G_α(P_X^n, P_Y^n)` and `1 - G`, the latter accurate even when `G` is
/// within rounding of one. Either out-pointer may be null.
///
/// # Safety
/// `nested` must be live; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_nested_gn(
    nested: *const SlNested,
    alpha: f64,
    g: *mut f64,
    one_minus_g: *mut f64,
) -> SlStatus {
    guard(|| {
        if alpha.is_nan() {
            return Err(Error::InvalidArgument("alpha is NaN".into()).into());
        }
        let v = get(nested, "nested")?.0.gn(alpha);
        if !g.is_null() {
            g.write(v.g);
        }
        if !one_minus_g.is_null() {
            one_minus_g.write(v.one_minus_g);
        }
        Ok(())
    })
}

/// # Safety
/// `nested` must come from `sl_nested_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sl_nested_free(nested: *mut SlNested) {
    if !nested.is_null() {
        drop(Box::from_raw(nested));
    }
}

/// Lower-tail rate `f(α)` for Bernoulli marginals under Hamming cost.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_rate_f_binary(a: f64, b: f64, alpha: f64, out: *mut f64) -> SlStatus {
    guard(|| put(out, rate_f_binary(a, b, alpha)?, "out"))
}

/// Upper-tail rate `g(α)` for Bernoulli marginals under Hamming cost.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_rate_g_binary(a: f64, b: f64, alpha: f64, out: *mut f64) -> SlStatus {
    guard(|| put(out, rate_g_binary(a, b, alpha)?, "out"))
}

/// Gaussian limit `Λ_Δ` for Bernoulli marginals.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_lambda_binary(a: f64, b: f64, delta: f64, out: *mut f64) -> SlStatus {
    guard(|| put(out, lambda_binary(a, b, delta)?, "out"))
}

/// Moderate-deviation rate below the transport cost (`delta < 0`).
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_mdp_rate_lower(
    px: *const SlDist,
    py: *const SlDist,
    c: *const SlCost,
    delta: f64,
    out: *mut f64,
) -> SlStatus {
    guard(|| {
        let v = mdp_rate_lower(&get(px, "px")?.0, &get(py, "py")?.0, &get(c, "c")?.0, delta)?;
        put(out, v, "out")
    })
}

/// Moderate-deviation rate above the transport cost (`delta > 0`).
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_mdp_rate_upper(
    px: *const SlDist,
    py: *const SlDist,
    c: *const SlCost,
    delta: f64,
    out: *mut f64,
) -> SlStatus {
    guard(|| {
        let v = mdp_rate_upper(&get(px, "px")?.0, &get(py, "py")?.0, &get(c, "c")?.0, delta)?;
        put(out, v, "out")
    })
}

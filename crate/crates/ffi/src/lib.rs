//! C ABI over the polymerlab engine.
//!
//! Environments are opaque heap handles. Every fallible call returns a
//! [`PlStatus`] and writes its result through an out pointer; the message of
//! the last failure on the calling thread is available from
//! [`pl_last_error_message`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use polymerlab::env::{DisorderModel, Environment, Site};
use polymerlab::nearly_gamma;
use polymerlab::polymer::{self, PolymerParams};
use polymerlab::Error;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    PlOk = 0,
    PlDomainError = 1,
    PlArgumentError = 2,
    PlResourceCap = 3,
    PlNumericError = 4,
    PlNullPointer = 5,
    PlPanic = 6,
}

/// Opaque disorder environment.
pub struct PlEnvironment {
    inner: Environment,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> PlStatus {
    match err {
        Error::Domain(_) => PlStatus::PlDomainError,
        Error::ResourceCap(_) => PlStatus::PlResourceCap,
        Error::Numeric(_) => PlStatus::PlNumericError,
        Error::Argument(_) | Error::Config(_) | Error::Io(_) => PlStatus::PlArgumentError,
    }
}

enum Failure {
    Null(&'static str),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlStatus::PlOk,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            PlStatus::PlNullPointer
        }
        Ok(Err(Failure::Engine(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            PlStatus::PlPanic
        }
    }
}

unsafe fn env_ref<'a>(env: *const PlEnvironment) -> Result<&'a Environment, Failure> {
    env.as_ref().map(|e| &e.inner).ok_or(Failure::Null("env"))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn params(d: u32, n: u64, beta: f64) -> Result<PolymerParams, Failure> {
    Ok(PolymerParams::new(d as usize, n as usize, beta)?)
}

fn site(n: i64, x0: i64, x1: i64) -> Result<Site, Failure> {
    if n < 1 {
        return Err(Error::Argument(format!("site layer must be >= 1, got {n}")).into());
    }
    Ok(Site::new(n, [x0, x1]))
}

/// Creates an environment. `kind` is one of `gaussian` (p1 = sigma),
/// `centered_exponential` (p1 = rate), `centered_gamma` (p1 = shape,
/// p2 = scale) or `centered_uniform` (p1 = half_width); unused parameters
/// are ignored.
///
/// # Safety
/// `kind` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_env_new(
    kind: *const c_char,
    p1: f64,
    p2: f64,
    base_seed: u64,
    replica: u64,
    out: *mut *mut PlEnvironment,
) -> PlStatus {
    guard(|| {
        if kind.is_null() {
            return Err(Failure::Null("kind"));
        }
        let kind = CStr::from_ptr(kind).to_str().map_err(|_| Error::Argument("kind is not UTF-8".into()))?;
        let names = DisorderModel::param_names(kind)
            .ok_or_else(|| Error::Argument(format!("unknown disorder kind {kind:?}")))?;
        let params: BTreeMap<String, f64> = names.iter().zip([p1, p2]).map(|(k, v)| (k.to_string(), v)).collect();
        let model = DisorderModel::from_parts(kind, &params).map_err(|errs| Error::Argument(errs.join("; ")))?;
        let handle = Box::into_raw(Box::new(PlEnvironment { inner: Environment::new(model, base_seed, replica) }));
        write(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Releases an environment. Null is ignored.
///
/// # Safety
/// `env` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pl_env_free(env: *mut PlEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Disorder value at site `(n, x)`; `x1` is ignored in one dimension.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_env_omega(env: *const PlEnvironment, n: i64, x0: i64, x1: i64, out: *mut f64) -> PlStatus {
    guard(|| {
        let e = env_ref(env)?;
        write(out, e.omega(site(n, x0, x1)?), "out")
    })
}

/// Pins the disorder at one site to `value`.
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_env_set_override(env: *mut PlEnvironment, n: i64, x0: i64, x1: i64, value: f64) -> PlStatus {
    guard(|| {
        let s = site(n, x0, x1)?;
        let handle = env.as_mut().ok_or(Failure::Null("env"))?;
        handle.inner = handle.inner.with_override(s, value);
        Ok(())
    })
}

/// New environment equal to `env` except for a fresh draw at one site.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_env_resample(
    env: *const PlEnvironment,
    n: i64,
    x0: i64,
    x1: i64,
    fresh_seed: u64,
    out: *mut *mut PlEnvironment,
) -> PlStatus {
    guard(|| {
        let e = env_ref(env)?;
        let fresh = e.resample_site(site(n, x0, x1)?, fresh_seed);
        let handle = Box::into_raw(Box::new(PlEnvironment { inner: fresh }));
        write(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// `ln Z_N` for walks of `n` steps in dimension `d`.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_log_partition(env: *const PlEnvironment, d: u32, n: u64, beta: f64, out: *mut f64) -> PlStatus {
    guard(|| {
        let e = env_ref(env)?;
        write(out, polymer::log_partition(e, &params(d, n, beta)?), "out")
    })
}

/// `ln Z_N(z)`; negative infinity when `z` is unreachable.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_log_partition_p2p(
    env: *const PlEnvironment,
    d: u32,
    n: u64,
    beta: f64,
    z0: i64,
    z1: i64,
    out: *mut f64,
) -> PlStatus {
    guard(|| {
        let e = env_ref(env)?;
        let p = params(d, n, beta)?;
        let z1 = if d == 1 && z1 != 0 { return write(out, f64::NEG_INFINITY, "out") } else { z1 };
        write(out, polymer::log_partition_p2p(e, &p, [z0, z1]), "out")
    })
}

/// Number of reachable endpoints after `n` steps in dimension `d`.
#[no_mangle]
pub extern "C" fn pl_endpoint_count(d: u32, n: u64) -> usize {
    match d {
        1 | 2 => polymerlab::lattice::layer_len(d as usize, n as usize),
        _ => 0,
    }
}

/// Gibbs law of the endpoint. Writes `len` points as `(x0, x1)` pairs into
/// `points` (2 * capacity slots) and their probabilities into `probs`.
/// Fails with an argument error, after setting `len`, when `capacity` is too
/// small.
///
/// # Safety
/// `env` must be a live handle; `points` and `probs` must hold `2 * capacity`
/// and `capacity` values; `len` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_endpoint_distribution(
    env: *const PlEnvironment,
    d: u32,
    n: u64,
    beta: f64,
    points: *mut i64,
    probs: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> PlStatus {
    guard(|| {
        let e = env_ref(env)?;
        let p = params(d, n, beta)?;
        let count = pl_endpoint_count(d, n);
        write(len, count, "len")?;
        if capacity < count {
            return Err(Error::Argument(format!("capacity {capacity} is below the {count} endpoints")).into());
        }
        if points.is_null() || probs.is_null() {
            return Err(Failure::Null("points or probs"));
        }
        let pts = std::slice::from_raw_parts_mut(points, 2 * count);
        let prs = std::slice::from_raw_parts_mut(probs, count);
        for (k, (z, pr)) in polymer::endpoint_distribution(e, &p).into_iter().enumerate() {
            pts[2 * k] = z[0];
            pts[2 * k + 1] = z[1];
            prs[k] = pr;
        }
        Ok(())
    })
}

/// `ln E exp(theta omega)` for the environment's disorder law.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_log_mgf(env: *const PlEnvironment, theta: f64, out: *mut f64) -> PlStatus {
    guard(|| {
        let e = env_ref(env)?;
        write(out, e.model().log_mgf(theta)?, "out")
    })
}

/// Gaussian transport derivative `psi(y)` of the environment's disorder law.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_psi(env: *const PlEnvironment, y: f64, out: *mut f64) -> PlStatus {
    guard(|| {
        let e = env_ref(env)?;
        write(out, nearly_gamma::psi(e.model(), y)?.value, "out")
    })
}

/// Message for the last failure on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

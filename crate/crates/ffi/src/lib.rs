//! C ABI over the levylab core.
//!
//! Every function returns an [`LlStatus`]; results go through out-pointers.
//! Handles are opaque and must be released with their `_free` function.
//! On failure, [`ll_last_error`] returns a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use levylab::harness::{self, RunOptions, SuiteConfig};
use levylab::lyapunov::{self, LyapunovNorm, NormKind};
use levylab::measures::{self, LevyTriplet};
use levylab::space::{SpaceModel, WeightSpec};
use levylab::{Error, McEstimate, McPlan, StreamKey};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Precondition = 4,
    Hypothesis = 5,
    Numeric = 6,
    Config = 7,
    Io = 8,
    Panic = 9,
}

/// Norm families for [`ll_lyapunov_new`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlNormKind {
    Gaussian = 0,
    Levy = 1,
}

/// A Monte Carlo estimate.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LlEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub confidence: f64,
    pub bias: f64,
}

impl From<McEstimate> for LlEstimate {
    fn from(e: McEstimate) -> Self {
        Self { mean: e.mean, stderr: e.stderr, n: e.n, confidence: e.confidence, bias: e.bias }
    }
}

/// Truncated coordinate space.
pub struct LlSpace {
    inner: SpaceModel,
}

/// Lévy triplet `(b, R, M)`.
pub struct LlTriplet {
    inner: LevyTriplet,
}

/// Compact Lyapunov norm `q_x`.
pub struct LlLyapunov {
    inner: LyapunovNorm,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LlStatus {
    match e {
        Error::Argument(_) => LlStatus::InvalidArgument,
        Error::Dimension { .. } => LlStatus::Dimension,
        Error::Precondition(_) => LlStatus::Precondition,
        Error::Hypothesis(_) => LlStatus::Hypothesis,
        Error::Construction(_) | Error::Range(_) | Error::Integrability(_) | Error::Instability(_) => {
            LlStatus::Numeric
        }
        Error::Config(_) => LlStatus::Config,
        Error::Io(_) => LlStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LlStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            LlStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LlStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Core(Error::Argument(format!("{what} is not UTF-8"))))
}

unsafe fn put<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(v);
    Ok(())
}

fn plan(samples: u64, seed: u64) -> McPlan {
    McPlan::new(samples, StreamKey::new(seed))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ll_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ll_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a space of `dim` coordinates. `weights` names the weight family
/// ("4^-n" or "sine"); null selects the default.
///
/// # Safety
/// `weights` is null or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_space_new(dim: usize, weights: *const c_char, out: *mut *mut LlSpace) -> LlStatus {
    guard(|| {
        let spec = if weights.is_null() {
            WeightSpec::default()
        } else {
            WeightSpec::Named(string(weights, "weights")?.to_string())
        };
        let inner = SpaceModel::new(dim, &spec)?;
        put(out, Box::into_raw(Box::new(LlSpace { inner })), "out")
    })
}

/// # Safety
/// `space` is null or came from [`ll_space_new`] and is not used again.
#[no_mangle]
pub unsafe extern "C" fn ll_space_free(space: *mut LlSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// # Safety
/// `space` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_space_dim(space: *const LlSpace, out: *mut usize) -> LlStatus {
    guard(|| put(out, as_ref(space, "space")?.inner.dim(), "out"))
}

/// Weight `λ_k`, zero-based.
///
/// # Safety
/// `space` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_space_weight(space: *const LlSpace, k: usize, out: *mut f64) -> LlStatus {
    guard(|| {
        let w = as_ref(space, "space")?.inner.weights();
        let v = *w.get(k).ok_or_else(|| Error::Dimension { expected: w.len(), got: k + 1 })?;
        put(out, v, "out")
    })
}

/// Standard Brownian motion on `dim` coordinates.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_triplet_brownian(dim: usize, out: *mut *mut LlTriplet) -> LlStatus {
    guard(|| put(out, Box::into_raw(Box::new(LlTriplet { inner: LevyTriplet::brownian(dim) })), "out"))
}

/// Drift and diagonal Gaussian variance, both of length `dim`, plus
/// optional point-mass jumps: `n_atoms` atoms stored row-major in `atoms`
/// (`n_atoms * dim` values) with total intensity `intensity`. Pass
/// `n_atoms = 0` for no jumps.
///
/// # Safety
/// Each non-null array holds the stated number of values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_triplet_new(
    dim: usize,
    drift: *const f64,
    variance: *const f64,
    intensity: f64,
    atoms: *const f64,
    n_atoms: usize,
    out: *mut *mut LlTriplet,
) -> LlStatus {
    guard(|| {
        let drift = slice(drift, dim, "drift")?.to_vec();
        let variance = slice(variance, dim, "variance")?.to_vec();
        let jumps = if n_atoms == 0 {
            None
        } else {
            let flat = slice(atoms, n_atoms * dim, "atoms")?;
            let points = flat.chunks(dim).map(<[f64]>::to_vec).collect();
            Some(measures::JumpMeasure::point_mass(intensity, points, vec![1.0; n_atoms])?)
        };
        let inner = LevyTriplet::new(drift, variance, jumps)?;
        put(out, Box::into_raw(Box::new(LlTriplet { inner })), "out")
    })
}

/// # Safety
/// `triplet` is null or a handle that is not used again.
#[no_mangle]
pub unsafe extern "C" fn ll_triplet_free(triplet: *mut LlTriplet) {
    if !triplet.is_null() {
        drop(Box::from_raw(triplet));
    }
}

/// Estimates `E <ξ, X_t>²` from the origin.
///
/// # Safety
/// `triplet` is live; `xi` holds `len` values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_second_moment(
    triplet: *const LlTriplet,
    xi: *const f64,
    len: usize,
    t: f64,
    samples: u64,
    seed: u64,
    out: *mut LlEstimate,
) -> LlStatus {
    guard(|| {
        let tr = &as_ref(triplet, "triplet")?.inner;
        let xi = measures::pad(slice(xi, len, "xi")?, tr.dim())?;
        let e = measures::pairing_second_moment(tr, &xi, t, &plan(samples, seed))?;
        put(out, e.into(), "out")
    })
}

/// Canonical compact Lyapunov norm on `space`.
///
/// # Safety
/// `space` is live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_lyapunov_new(
    space: *const LlSpace,
    kind: LlNormKind,
    out: *mut *mut LlLyapunov,
) -> LlStatus {
    guard(|| {
        let kind = match kind {
            LlNormKind::Gaussian => NormKind::Gaussian,
            LlNormKind::Levy => NormKind::Levy,
        };
        let inner = LyapunovNorm::canonical(&as_ref(space, "space")?.inner, kind)?;
        put(out, Box::into_raw(Box::new(LlLyapunov { inner })), "out")
    })
}

/// # Safety
/// `norm` is null or a handle that is not used again.
#[no_mangle]
pub unsafe extern "C" fn ll_lyapunov_free(norm: *mut LlLyapunov) {
    if !norm.is_null() {
        drop(Box::from_raw(norm));
    }
}

/// `q_x(z)²`.
///
/// # Safety
/// `norm` is live; `z` holds `len` values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_lyapunov_q_sq(norm: *const LlLyapunov, z: *const f64, len: usize, out: *mut f64) -> LlStatus {
    guard(|| {
        let n = &as_ref(norm, "norm")?.inner;
        let z = measures::pad(slice(z, len, "z")?, n.dim())?;
        put(out, n.q_sq(&z), "out")
    })
}

/// Estimates `v_0(z) = U_1 q_x²(z)`.
///
/// # Safety
/// Handles are live; `z` holds `len` values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_v0_estimate(
    norm: *const LlLyapunov,
    triplet: *const LlTriplet,
    z: *const f64,
    len: usize,
    samples: u64,
    seed: u64,
    out: *mut LlEstimate,
) -> LlStatus {
    guard(|| {
        let n = &as_ref(norm, "norm")?.inner;
        let tr = &as_ref(triplet, "triplet")?.inner;
        let z = measures::pad(slice(z, len, "z")?, n.dim())?;
        let e = lyapunov::v0_estimate(n, tr, &z, &plan(samples, seed))?;
        put(out, e.into(), "out")
    })
}

/// Runs a suite config and writes `summary.csv` and `run.json` into
/// `out_dir`. `exit_code` receives the CLI exit code (0 all as expected,
/// 1 failures present).
///
/// # Safety
/// Strings are NUL-terminated; `exit_code` is writable.
#[no_mangle]
pub unsafe extern "C" fn ll_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    samples_scale: f64,
    exit_code: *mut i32,
) -> LlStatus {
    guard(|| {
        let (cfg, text) = SuiteConfig::load(Path::new(string(config_path, "config_path")?))?;
        let opts = RunOptions { samples_scale, ..RunOptions::default() };
        let record = harness::run_suite(&cfg, &text, &opts)?;
        record.write(Path::new(string(out_dir, "out_dir")?))?;
        put(exit_code, record.exit_code(), "exit_code")
    })
}

//! C ABI over `lae-core`.
//!
//! Objects are opaque handles created by `*_new` functions and released with
//! the matching `*_free`. Every fallible call returns a [`LaeStatus`]; on
//! failure [`lae_last_error_message`] describes the problem for the calling
//! thread. Complex arrays are interleaved `re, im` doubles, column-major, so
//! sample `t` of an `n`-dimensional dataset starts at offset `2·n·t`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lae_core::cli::error_floor;
use lae_core::covariance::{compute_covariances, CovarianceSet, Dataset};
use lae_core::linalg::{c, CMatrix};
use lae_core::training::{init_random, run_schedule, Schedule, StoppingRule, TerminalStatus, TrainingTrace};
use lae_core::LaeError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Singular = 4,
    RankDeficient = 5,
    NotFinite = 6,
    BufferTooSmall = 7,
    Internal = 99,
}

/// Terminal state of a training run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaeTerminal {
    Converged = 0,
    MaxIterations = 1,
    Diverged = 2,
}

pub struct LaeDataset(Dataset);
pub struct LaeCovariance(CovarianceSet);
pub struct LaeTrace(TrainingTrace);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &LaeError) -> LaeStatus {
    match e {
        LaeError::DimensionMismatch(_) | LaeError::Empty(_) => LaeStatus::DimensionMismatch,
        LaeError::NonFinite(_) => LaeStatus::NotFinite,
        LaeError::SingularCovariance { .. } | LaeError::SingularGram(_) => LaeStatus::Singular,
        LaeError::RankDeficient { .. } | LaeError::RankCollapse { .. } | LaeError::RankExceeded { .. } => {
            LaeStatus::RankDeficient
        }
        _ => LaeStatus::InvalidArgument,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (LaeStatus, String)>) -> LaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LaeStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LaeStatus::Internal
        }
    }
}

fn core_err(e: LaeError) -> (LaeStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LaeStatus, String) {
    (LaeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_complex(data: *const f64, rows: usize, cols: usize) -> CMatrix {
    let values = std::slice::from_raw_parts(data, 2 * rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| {
        let k = 2 * (j * rows + i);
        c(values[k], values[k + 1])
    })
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn lae_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build a dataset of `m` samples of dimension `n`. `targets` may be null for
/// an auto-associative dataset.
///
/// # Safety
/// `inputs` (and `targets` when non-null) must point to `2·n·m` doubles and
/// `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn lae_dataset_new(
    n: usize,
    m: usize,
    inputs: *const f64,
    targets: *const f64,
    out: *mut *mut LaeDataset,
) -> LaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if inputs.is_null() {
            return Err(null("inputs"));
        }
        if n == 0 || m == 0 {
            return Err((LaeStatus::DimensionMismatch, format!("need n, m > 0, got n={n}, m={m}")));
        }
        let x = read_complex(inputs, n, m);
        let y = (!targets.is_null()).then(|| read_complex(targets, n, m));
        let d = Dataset::from_columns(x, y).map_err(core_err)?;
        *out = Box::into_raw(Box::new(LaeDataset(d)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a pointer from [`lae_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lae_dataset_free(ds: *mut LaeDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Covariances of a dataset; `ridge` is added to `Σ_XX` only for inversion.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lae_covariance_new(
    ds: *const LaeDataset,
    ridge: f64,
    out: *mut *mut LaeCovariance,
) -> LaeStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cov = compute_covariances(&ds.0, ridge).map_err(core_err)?;
        *out = Box::into_raw(Box::new(LaeCovariance(cov)));
        Ok(())
    })
}

/// # Safety
/// `cov` must be null or a live covariance handle.
#[no_mangle]
pub unsafe extern "C" fn lae_covariance_free(cov: *mut LaeCovariance) {
    if !cov.is_null() {
        drop(Box::from_raw(cov));
    }
}

/// Smallest achievable error with `p` hidden units.
///
/// # Safety
/// `cov` must be a live covariance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lae_covariance_error_floor(
    cov: *const LaeCovariance,
    p: usize,
    out: *mut f64,
) -> LaeStatus {
    guard(|| {
        let cov = cov.as_ref().ok_or_else(|| null("covariance"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if p == 0 || p > cov.0.n() {
            return Err((LaeStatus::InvalidArgument, format!("p={p} must lie in 1..={}", cov.0.n())));
        }
        *out = error_floor(&cov.0, p).map_err(core_err)?;
        Ok(())
    })
}

/// Train with schedule `algorithm` (1 to 7) from a seeded random start.
/// `max_iterations = 0` keeps the default limit.
///
/// # Safety
/// `cov` must be a live covariance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lae_train(
    cov: *const LaeCovariance,
    algorithm: u8,
    p: usize,
    seed: u64,
    max_iterations: usize,
    out: *mut *mut LaeTrace,
) -> LaeStatus {
    guard(|| {
        let cov = cov.as_ref().ok_or_else(|| null("covariance"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sched = Schedule::algorithm(algorithm).map_err(core_err)?;
        let mut stop = StoppingRule::default();
        if max_iterations > 0 {
            stop.max_iterations = max_iterations;
        }
        let init = init_random(cov.0.n(), p, seed).map_err(core_err)?;
        let trace = run_schedule(&init, &sched, &cov.0, &stop).map_err(core_err)?;
        *out = Box::into_raw(Box::new(LaeTrace(trace)));
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn lae_trace_free(trace: *mut LaeTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be a live trace handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lae_trace_status(trace: *const LaeTrace, out: *mut LaeTerminal) -> LaeStatus {
    guard(|| {
        let trace = trace.as_ref().ok_or_else(|| null("trace"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match trace.0.status {
            TerminalStatus::Converged => LaeTerminal::Converged,
            TerminalStatus::MaxIterations => LaeTerminal::MaxIterations,
            TerminalStatus::Diverged => LaeTerminal::Diverged,
        };
        Ok(())
    })
}

/// Number of recorded iterations.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn lae_trace_iterations(trace: *const LaeTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.iterations.len())
}

/// # Safety
/// `trace` must be a live trace handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lae_trace_final_error(trace: *const LaeTrace, out: *mut f64) -> LaeStatus {
    guard(|| {
        let trace = trace.as_ref().ok_or_else(|| null("trace"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = trace.0.final_error();
        Ok(())
    })
}

/// Copy the per-iteration errors into `buf`, which holds `len` doubles.
///
/// # Safety
/// `trace` must be a live trace handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lae_trace_errors(trace: *const LaeTrace, buf: *mut f64, len: usize) -> LaeStatus {
    guard(|| {
        let trace = trace.as_ref().ok_or_else(|| null("trace"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let iters = &trace.0.iterations;
        if len < iters.len() {
            return Err((
                LaeStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", iters.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, iters.len());
        for (d, r) in dst.iter_mut().zip(iters) {
            *d = r.error;
        }
        Ok(())
    })
}

/// Copy the trained map `W = AB` (interleaved, column-major) into `buf`,
/// which holds `len` doubles; `2·n²` are needed.
///
/// # Safety
/// `trace` must be a live trace handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lae_trace_weights(trace: *const LaeTrace, buf: *mut f64, len: usize) -> LaeStatus {
    guard(|| {
        let trace = trace.as_ref().ok_or_else(|| null("trace"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let w = trace.0.final_params.w();
        let need = 2 * w.len();
        if len < need {
            return Err((LaeStatus::BufferTooSmall, format!("need {need} doubles, got {len}")));
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (k, z) in w.iter().enumerate() {
            dst[2 * k] = z.re;
            dst[2 * k + 1] = z.im;
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lae_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}


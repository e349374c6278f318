//! C interface to the factoring pipeline.
//!
//! Configurations and reports are opaque handles owned by the caller and
//! released with their `_free` function. Every fallible call returns an
//! [`AfStatus`]; the message of the last failure on the calling thread is
//! available from [`af_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use adiafactor::adia::Mode;
use adiafactor::hamcomp::Encoding;
use adiafactor::pipeline::{self, FactorReport, PipelineError, RunConfig};

/// Result codes; the numeric values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfStatus {
    Ok = 0,
    Internal = 1,
    NoSplitConsistent = 2,
    EvolutionFailed = 3,
    InvalidInput = 4,
    NullArgument = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfMode {
    Transverse = 0,
    PaperCompat = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfEncoding {
    Substitution = 0,
    PaperCompat = 1,
    Columns = 2,
    Product = 3,
}

/// Opaque run configuration.
pub struct AfConfig {
    inner: RunConfig,
}

/// Opaque factoring report.
pub struct AfReport {
    inner: FactorReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: AfStatus, msg: impl Into<String>) -> AfStatus {
    set_error(msg);
    status
}

fn status_of(err: &PipelineError) -> AfStatus {
    match err.exit_code() {
        2 => AfStatus::NoSplitConsistent,
        3 => AfStatus::EvolutionFailed,
        4 => AfStatus::InvalidInput,
        _ => AfStatus::Internal,
    }
}

fn guarded(f: impl FnOnce() -> AfStatus) -> AfStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(AfStatus::Internal, "panic inside adiafactor"))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn af_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// New configuration with transverse mode, substitution encoding, automatic
/// schedule, J = 2π·10⁶ rad/s, 8192 shots and seed 0.
#[no_mangle]
pub extern "C" fn af_config_new(n: u64) -> *mut AfConfig {
    Box::into_raw(Box::new(AfConfig {
        inner: RunConfig::new(n),
    }))
}

/// # Safety
/// `config` must be NULL or a pointer returned by [`af_config_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn af_config_free(config: *mut AfConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn with_config(config: *mut AfConfig, f: impl FnOnce(&mut RunConfig)) -> AfStatus {
    match config.as_mut() {
        Some(c) => {
            f(&mut c.inner);
            AfStatus::Ok
        }
        None => fail(AfStatus::NullArgument, "config is NULL"),
    }
}

/// # Safety
/// `config` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn af_config_set_mode(config: *mut AfConfig, mode: AfMode) -> AfStatus {
    with_config(config, |c| {
        c.mode = match mode {
            AfMode::Transverse => Mode::Transverse,
            AfMode::PaperCompat => Mode::PaperCompat,
        }
    })
}

/// # Safety
/// `config` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn af_config_set_encoding(config: *mut AfConfig, encoding: AfEncoding) -> AfStatus {
    with_config(config, |c| {
        c.encoding = match encoding {
            AfEncoding::Substitution => Encoding::Substitution,
            AfEncoding::PaperCompat => Encoding::PaperCompat,
            AfEncoding::Columns => Encoding::Columns,
            AfEncoding::Product => Encoding::Product,
        }
    })
}

/// Total time in microseconds and number of steps; 0 selects the automatic
/// value.
///
/// # Safety
/// `config` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn af_config_set_schedule(config: *mut AfConfig, time_us: f64, steps: u64) -> AfStatus {
    with_config(config, |c| {
        c.time_us = (time_us != 0.0).then_some(time_us);
        c.steps = (steps != 0).then_some(steps as usize);
    })
}

/// # Safety
/// `config` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn af_config_set_coupling(config: *mut AfConfig, coupling_j: f64) -> AfStatus {
    with_config(config, |c| c.coupling_j = coupling_j)
}

/// # Safety
/// `config` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn af_config_set_shots(config: *mut AfConfig, shots: u64) -> AfStatus {
    with_config(config, |c| c.shots = shots)
}

/// # Safety
/// `config` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn af_config_set_seed(config: *mut AfConfig, seed: u64) -> AfStatus {
    with_config(config, |c| c.seed = seed)
}

/// Runs the pipeline. On success `*out` receives a report to be released
/// with [`af_report_free`]; otherwise `*out` is set to NULL.
///
/// # Safety
/// `config` must be a live configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn af_factor(config: *const AfConfig, out: *mut *mut AfReport) -> AfStatus {
    if out.is_null() {
        return fail(AfStatus::NullArgument, "out is NULL");
    }
    *out = ptr::null_mut();
    let Some(config) = config.as_ref() else {
        return fail(AfStatus::NullArgument, "config is NULL");
    };
    guarded(|| match pipeline::factor(&config.inner) {
        Ok(run) => {
            *out = Box::into_raw(Box::new(AfReport { inner: run.report }));
            AfStatus::Ok
        }
        Err(e) => fail(status_of(&e), e.to_string()),
    })
}

/// Writes the factors, `p <= q`.
///
/// # Safety
/// `report` must be a live report handle; `p` and `q` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn af_report_factors(report: *const AfReport, p: *mut u64, q: *mut u64) -> AfStatus {
    let (Some(r), false, false) = (report.as_ref(), p.is_null(), q.is_null()) else {
        return fail(AfStatus::NullArgument, "NULL argument");
    };
    *p = r.inner.factors.p;
    *q = r.inner.factors.q;
    AfStatus::Ok
}

/// Report as JSON; release with [`af_string_free`]. NULL on failure.
///
/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn af_report_json(report: *const AfReport) -> *mut c_char {
    let Some(r) = report.as_ref() else {
        set_error("report is NULL");
        return ptr::null_mut();
    };
    match CString::new(pipeline::report_json(&r.inner)) {
        Ok(s) => s.into_raw(),
        Err(_) => {
            set_error("report contains a NUL byte");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn af_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `report` must be NULL or a report handle that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn af_report_free(report: *mut AfReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn af_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"0",
    };
    VERSION.as_ptr()
}

//! C ABI for the bsgam library.
//!
//! Conventions:
//! - every fallible call returns a [`BsgamStatus`]; `BSGAM_STATUS_OK` is 0,
//! - on failure, `bsgam_last_error()` returns a thread-local message valid
//!   until the next failing call on the same thread,
//! - `BsgamFit` is an opaque handle released with `bsgam_fit_free`,
//! - strings returned as `char*` are owned by the caller and released with
//!   `bsgam_string_free`.

use bsgam::glmfit::FitSummary;
use bsgam::harness::{run_fit, FitResult, RunConfig};
use bsgam::marginal::{bf_curve, log_marginal_tcch};
use bsgam::specfun::tcch::GPriorFamily;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

/// Status codes for every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsgamStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ComputeFailed = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bsgam_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map(|s| s.as_ptr())
            .unwrap_or(ptr::null())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bsgam_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, BsgamStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is NULL"));
        return Err(BsgamStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        BsgamStatus::InvalidUtf8
    })
}

/// Opaque fit handle.
pub struct BsgamFit {
    result: FitResult,
}

/// Fits a CSV dataset. `config_text` uses the same `key = value` grammar as
/// the CLI configuration file and may be NULL for defaults. On success,
/// writes a handle to `out`.
///
/// # Safety
/// `data_path` must be a valid NUL-terminated string, `config_text` NULL or
/// valid, and `out` a valid location to store the handle.
#[no_mangle]
pub unsafe extern "C" fn bsgam_fit_csv(
    data_path: *const c_char,
    config_text: *const c_char,
    out: *mut *mut BsgamFit,
) -> BsgamStatus {
    if out.is_null() {
        set_error("out is NULL");
        return BsgamStatus::NullPointer;
    }
    let path = match cstr_arg(data_path, "data_path") {
        Ok(s) => s,
        Err(st) => return st,
    };
    let mut cfg = RunConfig::default();
    if !config_text.is_null() {
        let text = match cstr_arg(config_text, "config_text") {
            Ok(s) => s,
            Err(st) => return st,
        };
        if let Err(e) = cfg.apply_text(text) {
            set_error(e);
            return BsgamStatus::InvalidArgument;
        }
    }
    cfg.data = Some(PathBuf::from(path));
    match run_fit(&cfg) {
        Ok(result) => {
            *out = Box::into_raw(Box::new(BsgamFit { result }));
            BsgamStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            BsgamStatus::ComputeFailed
        }
    }
}

/// Releases a fit handle. NULL is a no-op.
///
/// # Safety
/// `fit` must be a handle produced by `bsgam_fit_csv` (or NULL) and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bsgam_fit_free(fit: *mut BsgamFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// JSON summary of the fit (schema-stable); release with
/// `bsgam_string_free`.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsgam_fit_summary_json(fit: *const BsgamFit) -> *mut c_char {
    if fit.is_null() {
        set_error("fit is NULL");
        return ptr::null_mut();
    }
    let doc = &(*fit).result.summary;
    match serde_json::to_string(doc) {
        Ok(s) => CString::new(s)
            .map(CString::into_raw)
            .unwrap_or(ptr::null_mut()),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Number of covariates in the fitted model.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsgam_fit_num_covariates(fit: *const BsgamFit) -> usize {
    if fit.is_null() {
        return 0;
    }
    (*fit).result.functional.per_covariate.len()
}

/// Grid length of covariate `j`'s component summary.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsgam_fit_grid_len(fit: *const BsgamFit, j: usize) -> usize {
    if fit.is_null() {
        return 0;
    }
    let fit = &*fit;
    fit.result
        .functional
        .per_covariate
        .get(j)
        .map(|c| c.grid.len())
        .unwrap_or(0)
}

/// Copies the pointwise component summary of covariate `j` into the supplied
/// buffers (each of capacity `len`; `bsgam_fit_grid_len` values are written).
/// Any output pointer may be NULL to skip that field.
///
/// # Safety
/// `fit` must be a live handle and the non-NULL buffers valid for `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn bsgam_fit_component(
    fit: *const BsgamFit,
    j: usize,
    grid: *mut f64,
    mean: *mut f64,
    lower: *mut f64,
    upper: *mut f64,
    len: usize,
) -> BsgamStatus {
    if fit.is_null() {
        set_error("fit is NULL");
        return BsgamStatus::NullPointer;
    }
    let fit = &*fit;
    let Some(cov) = fit.result.functional.per_covariate.get(j) else {
        set_error(format!("covariate index {j} out of range"));
        return BsgamStatus::InvalidArgument;
    };
    if len < cov.grid.len() {
        set_error(format!(
            "buffer of {len} too small for grid of {}",
            cov.grid.len()
        ));
        return BsgamStatus::InvalidArgument;
    }
    let n = cov.grid.len();
    if !grid.is_null() {
        ptr::copy_nonoverlapping(cov.grid.as_ptr(), grid, n);
    }
    if !mean.is_null() {
        ptr::copy_nonoverlapping(cov.mean.as_ptr(), mean, n);
    }
    if !lower.is_null() {
        ptr::copy_nonoverlapping(cov.lower.as_ptr(), lower, n);
    }
    if !upper.is_null() {
        ptr::copy_nonoverlapping(cov.upper.as_ptr(), upper, n);
    }
    BsgamStatus::Ok
}

/// Releases a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must have been returned by a bsgam FFI call and not freed before.
#[no_mangle]
pub unsafe extern "C" fn bsgam_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Log marginal likelihood under a named mixture-of-g prior (or the
/// unit-information point mass) given the fit statistics.
///
/// # Safety
/// `prior` must be a valid NUL-terminated string and `out` a valid `double*`.
#[no_mangle]
pub unsafe extern "C" fn bsgam_log_marginal(
    prior: *const c_char,
    n: usize,
    j: usize,
    loglik: f64,
    info_trace: f64,
    q_wald: f64,
    out: *mut f64,
) -> BsgamStatus {
    if out.is_null() {
        set_error("out is NULL");
        return BsgamStatus::NullPointer;
    }
    let prior_name = match cstr_arg(prior, "prior") {
        Ok(s) => s,
        Err(st) => return st,
    };
    let Some(prior) = GPriorFamily::parse(prior_name) else {
        set_error(format!("unknown prior '{prior_name}'"));
        return BsgamStatus::InvalidArgument;
    };
    let fit = FitSummary {
        loglik,
        info_trace,
        q_wald,
    };
    match log_marginal_tcch(&fit, &prior, n, j) {
        Ok(v) => {
            *out = v;
            BsgamStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            BsgamStatus::ComputeFailed
        }
    }
}

/// Log Bayes factor of an equal-fit one-knot refinement at model size `j`
/// and pseudo-R^2 `r2` (one row of the Bayes-factor table).
///
/// # Safety
/// `prior` must be a valid NUL-terminated string and `out` a valid `double*`.
#[no_mangle]
pub unsafe extern "C" fn bsgam_log_bf_redundant_knot(
    prior: *const c_char,
    n: usize,
    j: usize,
    r2: f64,
    out: *mut f64,
) -> BsgamStatus {
    if out.is_null() {
        set_error("out is NULL");
        return BsgamStatus::NullPointer;
    }
    let prior_name = match cstr_arg(prior, "prior") {
        Ok(s) => s,
        Err(st) => return st,
    };
    let Some(prior) = GPriorFamily::parse(prior_name) else {
        set_error(format!("unknown prior '{prior_name}'"));
        return BsgamStatus::InvalidArgument;
    };
    match bf_curve(&prior, n, &[j], &[r2]) {
        Ok(rows) => {
            *out = rows[0].log_bf;
            BsgamStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            BsgamStatus::ComputeFailed
        }
    }
}

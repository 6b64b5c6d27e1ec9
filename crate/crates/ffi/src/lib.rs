//! C ABI over the `crossreg` library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`CrStatus`]; on failure [`crossreg_last_error`] describes the most
//! recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use crossreg::config::{parse_config, RegistrationReport};
use crossreg::geom::Point3;
use crossreg::{register, Error, PointCloud, RegistrationConfig, RegistrationResult};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    RegistrationFailed = 5,
    Panic = 6,
}

/// Opaque point cloud.
pub struct CrPointCloud(PointCloud);

/// Opaque registration configuration.
pub struct CrConfig(RegistrationConfig);

/// Opaque registration result.
pub struct CrResult(RegistrationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CrStatus {
    match e {
        Error::Parse(_) | Error::UnknownKey { .. } | Error::Json(_) => CrStatus::Parse,
        Error::Io(_) => CrStatus::Io,
        Error::Stage { .. } | Error::Degenerate(_) | Error::PyramidTooSmall { .. } => {
            CrStatus::RegistrationFailed
        }
        _ => CrStatus::InvalidArgument,
    }
}

/// Run `f`, turning errors and panics into a status plus a last-error message.
fn guard(f: impl FnOnce() -> Result<(), (CrStatus, String)>) -> CrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CrStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (CrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CrStatus, String) {
    (CrStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn crossreg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn crossreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a cloud from `n` packed `x, y, z` doubles triples.
///
/// # Safety
/// `xyz` must point to `3 * n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crossreg_cloud_new(
    xyz: *const f64,
    n: usize,
    out: *mut *mut CrPointCloud,
) -> CrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if xyz.is_null() && n > 0 {
            return Err(null("xyz"));
        }
        let len = n
            .checked_mul(3)
            .ok_or((CrStatus::InvalidArgument, "point count overflows".into()))?;
        let coords = if n == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(xyz, len)
        };
        let points = coords
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        let cloud = PointCloud::new(points).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CrPointCloud(cloud)));
        Ok(())
    })
}

/// Number of points, or 0 for NULL.
///
/// # Safety
/// `cloud` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crossreg_cloud_len(cloud: *const CrPointCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `cloud` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn crossreg_cloud_free(cloud: *mut CrPointCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Default configuration handle.
#[no_mangle]
pub extern "C" fn crossreg_config_default() -> *mut CrConfig {
    Box::into_raw(Box::new(CrConfig(RegistrationConfig::default())))
}

/// Parse a flat `key = value` configuration text over the defaults.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crossreg_config_parse(
    text: *const c_char,
    out: *mut *mut CrConfig,
) -> CrStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| (CrStatus::Parse, "config text is not UTF-8".to_string()))?;
        let cfg = parse_config(s).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CrConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn crossreg_config_free(cfg: *mut CrConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Register `source` onto `target`. A NULL `cfg` uses the defaults.
///
/// # Safety
/// `source` and `target` must be live cloud handles, `cfg` NULL or a live
/// config handle, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crossreg_register(
    source: *const CrPointCloud,
    target: *const CrPointCloud,
    cfg: *const CrConfig,
    out: *mut *mut CrResult,
) -> CrStatus {
    guard(|| {
        let src = source.as_ref().ok_or_else(|| null("source"))?;
        let dst = target.as_ref().ok_or_else(|| null("target"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let default;
        let cfg = match cfg.as_ref() {
            Some(c) => &c.0,
            None => {
                default = RegistrationConfig::default();
                &default
            }
        };
        let result = register(&src.0, &dst.0, cfg)
            .map_err(|e| (CrStatus::RegistrationFailed, e.to_string()))?;
        *out = Box::into_raw(Box::new(CrResult(result)));
        Ok(())
    })
}

/// Write the row-major rotation (9 values) followed by the translation (3)
/// into `out12`.
///
/// # Safety
/// `result` must be a live handle and `out12` must point to 12 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn crossreg_result_transform(
    result: *const CrResult,
    out12: *mut f64,
) -> CrStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out12.is_null() {
            return Err(null("out12"));
        }
        let t = &r.0.transform;
        let out = std::slice::from_raw_parts_mut(out12, 12);
        out[..9].copy_from_slice(&t.rotation_row_major());
        out[9..].copy_from_slice(t.translation().as_slice());
        Ok(())
    })
}

/// Sparse inliers of the selected hypothesis, or 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crossreg_result_inlier_count(result: *const CrResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.inlier_count)
}

/// JSON report of the result without timings. Free with [`crossreg_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crossreg_result_json(
    result: *const CrResult,
    out: *mut *mut c_char,
) -> CrStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = RegistrationReport::from_result(&r.0, false)
            .to_json()
            .map_err(lib_err)?;
        let c =
            CString::new(json).map_err(|_| (CrStatus::Parse, "report contains NUL".to_string()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn crossreg_result_free(result: *mut CrResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn crossreg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

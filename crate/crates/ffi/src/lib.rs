//! C ABI over `tops-core`: load horizon models, predict from encoded rows,
//! and run the JSON prediction handlers without an HTTP server.
//!
//! Every fallible call returns a [`TopsStatus`]; on failure the message is
//! available from [`tops_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tops_core::service::{PredictRequest, Service, ServiceError, WhatIfRequest};
use tops_core::tree::{load_model, TreeOfPredictors};
use tops_core::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Model = 5,
    InvalidInput = 6,
    Numeric = 7,
    Internal = 8,
    Panic = 9,
}

/// A loaded model for one horizon.
pub struct TopsModel {
    tree: TreeOfPredictors,
}

/// A set of models sharing a schema, queried with JSON requests.
pub struct TopsService {
    service: Service,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> TopsStatus {
    match e {
        Error::Io { .. } => TopsStatus::Io,
        Error::Parse { .. } | Error::Json(_) => TopsStatus::Parse,
        Error::Model(_) | Error::FingerprintMismatch { .. } | Error::Schema(_) => TopsStatus::Model,
        Error::Domain(_) => TopsStatus::InvalidInput,
        _ if e.is_numeric() => TopsStatus::Numeric,
        _ => TopsStatus::Internal,
    }
}

type Outcome = std::result::Result<(), (TopsStatus, String)>;

fn fail(e: Error) -> (TopsStatus, String) {
    (status_of(&e), e.to_string())
}

fn service_fail(e: ServiceError) -> (TopsStatus, String) {
    let status = if e.status == 400 {
        TopsStatus::InvalidInput
    } else {
        TopsStatus::Internal
    };
    (status, serde_json::to_string(&e).unwrap_or_else(|_| e.to_string()))
}

fn guard(f: impl FnOnce() -> Outcome) -> TopsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TopsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside tops");
            TopsStatus::Panic
        }
    }
}

fn null_err() -> (TopsStatus, String) {
    (TopsStatus::NullArgument, "null pointer argument".to_string())
}

unsafe fn str_arg<'a>(p: *const c_char) -> std::result::Result<&'a str, (TopsStatus, String)> {
    if p.is_null() {
        return Err(null_err());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (TopsStatus::InvalidUtf8, e.to_string()))
}

fn to_c_string(s: String) -> std::result::Result<*mut c_char, (TopsStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| (TopsStatus::Internal, e.to_string()))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next tops call on the same thread.
#[no_mangle]
pub extern "C" fn tops_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a model file. On success `*out` owns a handle to release with
/// [`tops_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tops_model_load(path: *const c_char, out: *mut *mut TopsModel) -> TopsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err());
        }
        *out = ptr::null_mut();
        let path = str_arg(path)?;
        let tree = load_model(Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(TopsModel { tree }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`tops_model_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tops_model_free(model: *mut TopsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Encoded row width, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tops_model_width(model: *const TopsModel) -> usize {
    model.as_ref().map_or(0, |m| m.tree.width())
}

/// Horizon in days, or NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tops_model_horizon(model: *const TopsModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.tree.horizon)
}

/// Survival probability for one encoded row of `len` values.
///
/// # Safety
/// `x` must point to `len` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn tops_model_predict(
    model: *const TopsModel,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> TopsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null_err)?;
        if x.is_null() || out.is_null() {
            return Err(null_err());
        }
        let row = std::slice::from_raw_parts(x, len);
        *out = m.tree.predict_overall(row).map_err(fail)?;
        Ok(())
    })
}

/// Predicts `rows` row-major rows of `cols` values each into `out[rows]`.
/// Nothing is written unless every row succeeds.
///
/// # Safety
/// `x` must point to `rows * cols` doubles and `out` to `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn tops_model_predict_batch(
    model: *const TopsModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> TopsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null_err)?;
        if rows == 0 {
            return Ok(());
        }
        if x.is_null() || out.is_null() {
            return Err(null_err());
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| (TopsStatus::InvalidInput, "rows * cols overflows".to_string()))?;
        let data = std::slice::from_raw_parts(x, n);
        let probs = (0..rows)
            .map(|i| m.tree.predict_overall(&data[i * cols..(i + 1) * cols]))
            .collect::<tops_core::Result<Vec<f64>>>()
            .map_err(fail)?;
        std::slice::from_raw_parts_mut(out, rows).copy_from_slice(&probs);
        Ok(())
    })
}

/// Id of the leaf that the row falls in.
///
/// # Safety
/// `x` must point to `len` doubles and `leaf` to one writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn tops_model_leaf(
    model: *const TopsModel,
    x: *const f64,
    len: usize,
    leaf: *mut usize,
) -> TopsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null_err)?;
        if x.is_null() || leaf.is_null() {
            return Err(null_err());
        }
        *leaf = m.tree.route(std::slice::from_raw_parts(x, len)).map_err(fail)?.0;
        Ok(())
    })
}

/// Loads `n` model files into one service. The models must share a schema
/// and have distinct horizons.
///
/// # Safety
/// `paths` must point to `n` NUL-terminated strings and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn tops_service_new(
    paths: *const *const c_char,
    n: usize,
    out: *mut *mut TopsService,
) -> TopsStatus {
    guard(|| {
        if out.is_null() || paths.is_null() {
            return Err(null_err());
        }
        *out = ptr::null_mut();
        let mut models = Vec::with_capacity(n);
        for &p in std::slice::from_raw_parts(paths, n) {
            let path = str_arg(p)?;
            let m = load_model(Path::new(path)).map_err(|e| (status_of(&e), format!("{path}: {e}")))?;
            models.push(m);
        }
        let service = Service::new(models).map_err(fail)?;
        *out = Box::into_raw(Box::new(TopsService { service }));
        Ok(())
    })
}

/// # Safety
/// `service` must come from [`tops_service_new`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tops_service_free(service: *mut TopsService) {
    if !service.is_null() {
        drop(Box::from_raw(service));
    }
}

unsafe fn json_call(
    service: *const TopsService,
    request: *const c_char,
    out: *mut *mut c_char,
    handle: impl FnOnce(&Service, &str) -> std::result::Result<String, (TopsStatus, String)>,
) -> TopsStatus {
    guard(|| {
        let s = service.as_ref().ok_or_else(null_err)?;
        if out.is_null() {
            return Err(null_err());
        }
        *out = ptr::null_mut();
        let req = str_arg(request)?;
        *out = to_c_string(handle(&s.service, req)?)?;
        Ok(())
    })
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> std::result::Result<T, (TopsStatus, String)> {
    serde_json::from_str(text).map_err(|e| (TopsStatus::Parse, e.to_string()))
}

fn render<T: serde::Serialize>(v: &T) -> std::result::Result<String, (TopsStatus, String)> {
    serde_json::to_string(v).map_err(|e| (TopsStatus::Internal, e.to_string()))
}

/// Runs a prediction request given as JSON. On success `*out` holds the
/// JSON response, to release with [`tops_string_free`]. Request errors
/// leave the `{code, stage, message}` body in [`tops_last_error`].
///
/// # Safety
/// `request` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tops_service_predict_json(
    service: *const TopsService,
    request: *const c_char,
    out: *mut *mut c_char,
) -> TopsStatus {
    json_call(service, request, out, |s, text| {
        let req: PredictRequest = parse(text)?;
        render(&s.handle_predict(&req).map_err(service_fail)?)
    })
}

/// What-if variant of [`tops_service_predict_json`]; the response is a JSON
/// array with the base prediction first.
///
/// # Safety
/// `request` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tops_service_whatif_json(
    service: *const TopsService,
    request: *const c_char,
    out: *mut *mut c_char,
) -> TopsStatus {
    json_call(service, request, out, |s, text| {
        let req: WhatIfRequest = parse(text)?;
        render(&s.handle_whatif(&req).map_err(service_fail)?)
    })
}

/// Schema, fills, ranges and tree shapes as JSON.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tops_service_model_info_json(
    service: *const TopsService,
    out: *mut *mut c_char,
) -> TopsStatus {
    guard(|| {
        let s = service.as_ref().ok_or_else(null_err)?;
        if out.is_null() {
            return Err(null_err());
        }
        *out = to_c_string(render(&s.service.handle_model_info())?)?;
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from a tops call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tops_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

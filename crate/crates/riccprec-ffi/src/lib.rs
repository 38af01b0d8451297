//! C ABI for the riccprec library.
//!
//! Handles are opaque pointers created and freed here; every fallible call
//! returns a status code and leaves a message for
//! [`rp_last_error_message`]. The generated header lands in
//! `include/riccprec.h` at build time.
//!
//! All functions are panic-safe: a Rust panic is caught at the boundary and
//! surfaces as `RP_STATUS_PANIC` instead of unwinding into the caller.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use riccprec::analysis::{mahalanobis, partial_correlations, tsee_fast, NetworkSelection};
use riccprec::ingest::{load_matrix, normalize, DataMatrix, MatrixFormat};
use riccprec::matcore::DenseMatrix;
use riccprec::randproj::{random_project, retained_energy, ProjectionConfig};
use riccprec::riccati::{estimate, estimate_tikhonov, FactoredPrecision, PenaltyShape};
use riccprec::Error;

/// Status codes returned by every fallible function.
#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RpStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Input validation failed (dimensions, ranges, formats).
    InvalidInput = 3,
    /// A numerical contract was violated (non-positive-definite result).
    Numerical = 4,
    /// File I/O failed.
    Io = 5,
    /// The penalty does not support the requested fast path.
    UnsupportedPenalty = 6,
    /// A dense materialization would exceed the cap.
    TooLarge = 7,
    /// An internal panic was caught at the boundary.
    Panic = 9,
}

/// Opaque signal-matrix handle.
pub struct RpMatrix {
    inner: DataMatrix,
}

/// Opaque factored-precision handle.
pub struct RpPrecision {
    inner: FactoredPrecision,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(error: &Error) -> RpStatus {
    match error {
        Error::Numerical(_) => RpStatus::Numerical,
        Error::Io(_) => RpStatus::Io,
        Error::UnsupportedPenalty(_) => RpStatus::UnsupportedPenalty,
        Error::TooLarge { .. } => RpStatus::TooLarge,
        _ => RpStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> RpStatus) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            RpStatus::Panic
        }
    }
}

fn complete<T>(result: Result<T, Error>, out: *mut T) -> RpStatus {
    match result {
        Ok(value) => {
            unsafe { *out = value };
            RpStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<std::path::PathBuf, RpStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(RpStatus::NullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s).to_path_buf()),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(RpStatus::InvalidInput)
        }
    }
}

/// Message describing the most recent error on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads a matrix from `path`; `format` 0 = csv, 1 = raw64.
#[no_mangle]
pub unsafe extern "C" fn rp_matrix_load(
    path: *const c_char,
    format: i32,
    out: *mut *mut RpMatrix,
) -> RpStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output handle");
            return RpStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let format = match format {
            0 => MatrixFormat::Csv,
            1 => MatrixFormat::Raw64,
            other => {
                set_error(&format!("unknown format code {other}"));
                return RpStatus::InvalidInput;
            }
        };
        match load_matrix(&path, format) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(RpMatrix { inner: m }));
                RpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Wraps a row-major `rows x cols` buffer (copied).
#[no_mangle]
pub unsafe extern "C" fn rp_matrix_from_values(
    rows: usize,
    cols: usize,
    values: *const f64,
    out: *mut *mut RpMatrix,
) -> RpStatus {
    guard(|| {
        if values.is_null() || out.is_null() {
            set_error("null buffer or output handle");
            return RpStatus::NullArgument;
        }
        let slice = std::slice::from_raw_parts(values, rows * cols);
        match DenseMatrix::new(rows, cols, slice.to_vec()) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(RpMatrix {
                    inner: DataMatrix::from_dense(m),
                }));
                RpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rp_matrix_rows(matrix: *const RpMatrix) -> usize {
    if matrix.is_null() {
        return 0;
    }
    unsafe { (*matrix).inner.signals() }
}

#[no_mangle]
pub unsafe extern "C" fn rp_matrix_cols(matrix: *const RpMatrix) -> usize {
    if matrix.is_null() {
        return 0;
    }
    unsafe { (*matrix).inner.samples() }
}

/// Replaces the handle's contents with row-normalized data (zero mean,
/// unit variance per row).
#[no_mangle]
pub unsafe extern "C" fn rp_matrix_normalize(matrix: *mut RpMatrix) -> RpStatus {
    guard(|| {
        if matrix.is_null() {
            set_error("null matrix handle");
            return RpStatus::NullArgument;
        }
        match normalize(&(*matrix).inner) {
            Ok(n) => {
                (*matrix).inner = n;
                RpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Randomized compression of the sample dimension to `t` with `q` power
/// iterations. Writes a new handle and the retained energy fraction.
#[no_mangle]
pub unsafe extern "C" fn rp_matrix_project(
    matrix: *const RpMatrix,
    t: usize,
    q: usize,
    seed: u64,
    out: *mut *mut RpMatrix,
    retained: *mut f64,
) -> RpStatus {
    guard(|| {
        if matrix.is_null() || out.is_null() {
            set_error("null matrix or output handle");
            return RpStatus::NullArgument;
        }
        let cfg = ProjectionConfig {
            target_dim: t,
            power_iterations: q,
            seed,
        };
        let source = &(*matrix).inner;
        match random_project(source, &cfg) {
            Ok(projection) => {
                if !retained.is_null() {
                    match retained_energy(source, &projection.data) {
                        Ok(e) => *retained = e,
                        Err(e) => {
                            set_error(&e.to_string());
                            return status_of(&e);
                        }
                    }
                }
                *out = Box::into_raw(Box::new(RpMatrix {
                    inner: projection.data,
                }));
                RpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rp_matrix_free(matrix: *mut RpMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Riccati estimate with identity weights.
#[no_mangle]
pub unsafe extern "C" fn rp_estimate_identity(
    matrix: *const RpMatrix,
    rho: f64,
    out: *mut *mut RpPrecision,
) -> RpStatus {
    estimate_with(matrix, out, |x| estimate(x, &PenaltyShape::identity(rho)?))
}

/// Riccati estimate with node suppression: weight 1 on `inside` (zero-based
/// indices), `alpha` elsewhere.
#[no_mangle]
pub unsafe extern "C" fn rp_estimate_roi(
    matrix: *const RpMatrix,
    rho: f64,
    alpha: f64,
    inside: *const usize,
    inside_len: usize,
    out: *mut *mut RpPrecision,
) -> RpStatus {
    if inside.is_null() {
        set_error("null node list");
        return RpStatus::NullArgument;
    }
    let nodes = std::slice::from_raw_parts(inside, inside_len).to_vec();
    estimate_with(matrix, out, move |x| {
        estimate(x, &PenaltyShape::roi(x.signals(), &nodes, alpha, rho)?)
    })
}

/// Tikhonov estimate `(C + rho I)^{-1}` in factored form.
#[no_mangle]
pub unsafe extern "C" fn rp_estimate_tikhonov(
    matrix: *const RpMatrix,
    rho: f64,
    out: *mut *mut RpPrecision,
) -> RpStatus {
    estimate_with(matrix, out, move |x| estimate_tikhonov(x, rho))
}

unsafe fn estimate_with(
    matrix: *const RpMatrix,
    out: *mut *mut RpPrecision,
    f: impl FnOnce(&DataMatrix) -> Result<FactoredPrecision, Error>,
) -> RpStatus {
    guard(AssertUnwindSafe(|| {
        if matrix.is_null() || out.is_null() {
            set_error("null matrix or output handle");
            return RpStatus::NullArgument;
        }
        match f(&(*matrix).inner) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(RpPrecision { inner: p }));
                RpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

#[no_mangle]
pub unsafe extern "C" fn rp_precision_load(
    path: *const c_char,
    out: *mut *mut RpPrecision,
) -> RpStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output handle");
            return RpStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match FactoredPrecision::load(&path) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(RpPrecision { inner: p }));
                RpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rp_precision_save(
    precision: *const RpPrecision,
    path: *const c_char,
) -> RpStatus {
    guard(|| {
        if precision.is_null() {
            set_error("null precision handle");
            return RpStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match (*precision).inner.save(&path) {
            Ok(()) => RpStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Number of nodes N.
#[no_mangle]
pub unsafe extern "C" fn rp_precision_dim(precision: *const RpPrecision) -> usize {
    if precision.is_null() {
        return 0;
    }
    unsafe { (*precision).inner.dim() }
}

/// Rank m of the low-rank block.
#[no_mangle]
pub unsafe extern "C" fn rp_precision_rank(precision: *const RpPrecision) -> usize {
    if precision.is_null() {
        return 0;
    }
    unsafe { (*precision).inner.rank() }
}

#[no_mangle]
pub unsafe extern "C" fn rp_precision_logdet(
    precision: *const RpPrecision,
    out: *mut f64,
) -> RpStatus {
    guard(|| {
        if precision.is_null() || out.is_null() {
            set_error("null precision or output");
            return RpStatus::NullArgument;
        }
        complete((*precision).inner.logdet(), out)
    })
}

/// Gaussian entropy of the node subset `nodes` (zero-based), fast path.
#[no_mangle]
pub unsafe extern "C" fn rp_precision_tsee(
    precision: *const RpPrecision,
    nodes: *const usize,
    nodes_len: usize,
    out: *mut f64,
) -> RpStatus {
    guard(|| {
        if precision.is_null() || nodes.is_null() || out.is_null() {
            set_error("null precision, node list or output");
            return RpStatus::NullArgument;
        }
        let indices = std::slice::from_raw_parts(nodes, nodes_len).to_vec();
        let value =
            NetworkSelection::new(indices).and_then(|net| tsee_fast(&(*precision).inner, &net));
        complete(value, out)
    })
}

/// Mahalanobis distance between two length-N maps under the precision.
#[no_mangle]
pub unsafe extern "C" fn rp_precision_mahalanobis(
    precision: *const RpPrecision,
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> RpStatus {
    guard(|| {
        if precision.is_null() || a.is_null() || b.is_null() || out.is_null() {
            set_error("null precision, map or output");
            return RpStatus::NullArgument;
        }
        let a = std::slice::from_raw_parts(a, len);
        let b = std::slice::from_raw_parts(b, len);
        complete(mahalanobis(a, b, &(*precision).inner), out)
    })
}

/// Densifies the precision (refused above `cap`) and writes the partial
/// correlations row-major into `out_values`, which must hold N*N doubles.
#[no_mangle]
pub unsafe extern "C" fn rp_precision_partials(
    precision: *const RpPrecision,
    cap: usize,
    out_values: *mut f64,
) -> RpStatus {
    guard(|| {
        if precision.is_null() || out_values.is_null() {
            set_error("null precision or output buffer");
            return RpStatus::NullArgument;
        }
        let result = (*precision)
            .inner
            .densify_with_cap(cap)
            .and_then(|dense| partial_correlations(&dense));
        match result {
            Ok(p) => {
                let n = p.rows();
                let dst = std::slice::from_raw_parts_mut(out_values, n * n);
                dst.copy_from_slice(p.values());
                RpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rp_precision_free(precision: *mut RpPrecision) {
    if !precision.is_null() {
        drop(Box::from_raw(precision));
    }
}

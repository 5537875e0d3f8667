//! C ABI over the decomposition and error metrics.
//!
//! Every function returns an [`EmdfStatus`]; on failure the message is
//! available from [`emdf_last_error`] on the same thread. Decompositions are
//! opaque handles released with [`emdf_decomposition_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use emd_forecast::bench::{mape, rmse};
use emd_forecast::emd::{reconstruct, BoundaryPolicy, Decomposition, Method};
use emd_forecast::ensemble::{decompose, snr, EnsembleConfig, Snr};
use emd_forecast::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmdfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Unusable data: too short, monotone, zero actual in MAPE and so on.
    InputError = 3,
    /// The computation itself failed.
    ComputeError = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmdfMethod {
    Emd = 0,
    Eemd = 1,
    Ceemd = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmdfBoundary {
    LinearExtrapolation = 0,
    MirrorReflection = 1,
    ClampEndpoints = 2,
}

/// Decomposition settings; fill with [`emdf_options_default`] first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EmdfOptions {
    pub method: EmdfMethod,
    pub boundary: EmdfBoundary,
    /// 0 selects floor(log2 N).
    pub max_imfs: usize,
    pub max_sift_iterations: usize,
    /// Stop threshold relative to the input's standard deviation.
    pub epsilon_relative: f64,
    pub num_ensembles: usize,
    pub noise_std_fraction: f64,
    pub seed: u64,
}

/// Opaque decomposition handle.
pub struct EmdfDecomposition {
    inner: Decomposition,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> EmdfStatus {
    match e {
        Error::InvalidParameter { .. } => EmdfStatus::InvalidArgument,
        e if e.is_input_error() => EmdfStatus::InputError,
        _ => EmdfStatus::ComputeError,
    }
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard<F>(f: F) -> EmdfStatus
where
    F: FnOnce() -> Result<(), (EmdfStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            EmdfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            EmdfStatus::Panic
        }
    }
}

fn fail(e: Error) -> (EmdfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (EmdfStatus, String) {
    (EmdfStatus::NullPointer, format!("`{name}` is null"))
}

/// Borrows `len` doubles; a null pointer is only accepted for `len == 0`.
unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], (EmdfStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), (EmdfStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_into(src: &[f64], out: *mut f64, out_len: usize) -> Result<(), (EmdfStatus, String)> {
    if out_len != src.len() {
        return Err((
            EmdfStatus::InvalidArgument,
            format!("output buffer holds {out_len} values, need {}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn emdf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn emdf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must point to writable memory for one `EmdfOptions`.
#[no_mangle]
pub unsafe extern "C" fn emdf_options_default(out: *mut EmdfOptions) -> EmdfStatus {
    guard(|| {
        let e = EnsembleConfig::default();
        let opts = EmdfOptions {
            method: EmdfMethod::Emd,
            boundary: EmdfBoundary::LinearExtrapolation,
            max_imfs: 0,
            max_sift_iterations: e.sift.max_sift_iterations,
            epsilon_relative: 1e-4,
            num_ensembles: e.num_ensembles,
            noise_std_fraction: e.noise_std_fraction,
            seed: 0,
        };
        write_out(out, opts, "out")
    })
}

fn ensemble_config(o: &EmdfOptions) -> (Method, EnsembleConfig) {
    let method = match o.method {
        EmdfMethod::Emd => Method::Emd,
        EmdfMethod::Eemd => Method::Eemd,
        EmdfMethod::Ceemd => Method::Ceemd,
    };
    let mut cfg = EnsembleConfig {
        num_ensembles: o.num_ensembles,
        noise_std_fraction: o.noise_std_fraction,
        master_seed: o.seed,
        ..EnsembleConfig::default()
    };
    cfg.sift.boundary_policy = match o.boundary {
        EmdfBoundary::LinearExtrapolation => BoundaryPolicy::LinearExtrapolation,
        EmdfBoundary::MirrorReflection => BoundaryPolicy::MirrorReflection,
        EmdfBoundary::ClampEndpoints => BoundaryPolicy::ClampEndpointsAsExtrema,
    };
    cfg.sift.max_imfs = (o.max_imfs > 0).then_some(o.max_imfs);
    cfg.sift.max_sift_iterations = o.max_sift_iterations;
    cfg.sift.epsilon = emd_forecast::emd::Threshold::RelativeToStd(o.epsilon_relative);
    (method, cfg)
}

/// Decomposes `values[0..len]`; on success `*out` owns a new handle.
///
/// # Safety
/// `values` must point to `len` readable doubles, `options` to a valid
/// `EmdfOptions` and `out` to a writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn emdf_decompose(
    values: *const f64,
    len: usize,
    options: *const EmdfOptions,
    out: *mut *mut EmdfDecomposition,
) -> EmdfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let x = slice(values, len, "values")?;
        let opts = options.as_ref().ok_or_else(|| null("options"))?;
        let (method, cfg) = ensemble_config(opts);
        let d = decompose(x, method, &cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(EmdfDecomposition { inner: d }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `emdf_decompose` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn emdf_decomposition_free(handle: *mut EmdfDecomposition) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn emdf_decomposition_len(
    handle: *const EmdfDecomposition,
    out: *mut usize,
) -> EmdfStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        write_out(out, h.inner.len(), "out")
    })
}

/// Number of IMFs, excluding the residual.
///
/// # Safety
/// `handle` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn emdf_decomposition_imf_count(
    handle: *const EmdfDecomposition,
    out: *mut usize,
) -> EmdfStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        write_out(out, h.inner.imf_count(), "out")
    })
}

/// Copies component `index` into `out`; index `imf_count` is the residual.
///
/// # Safety
/// `handle` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn emdf_decomposition_component(
    handle: *const EmdfDecomposition,
    index: usize,
    out: *mut f64,
    out_len: usize,
) -> EmdfStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let d = &h.inner;
        let src = match index {
            i if i < d.imf_count() => &d.imfs[i],
            i if i == d.imf_count() => &d.residual,
            i => {
                return Err((
                    EmdfStatus::InvalidArgument,
                    format!("component {i} out of range (0..={})", d.imf_count()),
                ))
            }
        };
        copy_into(src, out, out_len)
    })
}

/// Writes the sum of all components into `out`.
///
/// # Safety
/// `handle` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn emdf_decomposition_reconstruct(
    handle: *const EmdfDecomposition,
    out: *mut f64,
    out_len: usize,
) -> EmdfStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let x = reconstruct(&h.inner).map_err(fail)?;
        copy_into(&x, out, out_len)
    })
}

type Metric = fn(&[f64], &[f64]) -> emd_forecast::Result<f64>;

unsafe fn metric(f: Metric, actual: *const f64, forecast: *const f64, len: usize, out: *mut f64) -> EmdfStatus {
    guard(|| {
        let a = slice(actual, len, "actual")?;
        let p = slice(forecast, len, "forecast")?;
        let v = f(a, p).map_err(fail)?;
        write_out(out, v, "out")
    })
}

/// Root-mean-square error.
///
/// # Safety
/// Both inputs must hold `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emdf_rmse(
    actual: *const f64,
    forecast: *const f64,
    len: usize,
    out: *mut f64,
) -> EmdfStatus {
    metric(rmse, actual, forecast, len, out)
}

/// Mean absolute percentage error in percent; fails on a zero actual.
///
/// # Safety
/// Both inputs must hold `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emdf_mape(
    actual: *const f64,
    forecast: *const f64,
    len: usize,
    out: *mut f64,
) -> EmdfStatus {
    metric(mape, actual, forecast, len, out)
}

/// Reconstruction SNR in dB; an exact reconstruction gives +infinity.
///
/// # Safety
/// Both inputs must hold `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emdf_snr_db(
    signal: *const f64,
    reconstruction: *const f64,
    len: usize,
    out: *mut f64,
) -> EmdfStatus {
    metric(
        |x, y| snr(x, y).map(Snr::db),
        signal,
        reconstruction,
        len,
        out,
    )
}

//! C ABI over `homolens`.
//!
//! Objects cross the boundary as opaque pointers that must be released with
//! the matching `*_free` function. Every fallible call returns an
//! [`HlStatus`]; on failure [`hl_last_error`] describes what went wrong on
//! the calling thread. Specs are passed as TOML text so the C side does not
//! have to mirror the Rust enums.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use homolens::complexes::cech_complex;
use homolens::config::{fill_manifold_defaults, section};
use homolens::estimators::{estimate, EstimateResult, EstimatorSpec};
use homolens::homology::betti_numbers;
use homolens::manifold::{sample, ManifoldSpec, NoiseSpec};
use homolens::{Error, PointCloud};
use toml::{Table, Value};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlStatus {
    Ok = 0,
    InvalidInput = 1,
    Precondition = 2,
    Parse = 3,
    Unsupported = 4,
    Numerical = 5,
    Io = 6,
    Config = 7,
    NullPointer = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque point cloud.
pub struct HlPointCloud(PointCloud);

/// Opaque estimator output.
pub struct HlEstimate(EstimateResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HlStatus {
    match e {
        Error::InvalidInput(_) => HlStatus::InvalidInput,
        Error::Precondition { .. } => HlStatus::Precondition,
        Error::Parse { .. } => HlStatus::Parse,
        Error::Unsupported(_) => HlStatus::Unsupported,
        Error::Numerical(_) => HlStatus::Numerical,
        Error::Io { .. } => HlStatus::Io,
        Error::Config(_) => HlStatus::Config,
    }
}

enum Fail {
    Lib(Error),
    Status(HlStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HlStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            HlStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(HlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(HlStatus::InvalidInput, format!("{what} is not UTF-8")))
}

fn parse_toml(text: &str) -> Result<Table, Fail> {
    text.parse::<Table>()
        .map_err(|e| Fail::Lib(Error::Config(e.to_string())))
}

/// Copies `src` into a caller buffer, always reporting the needed length.
unsafe fn copy_out<T: Copy>(
    src: &[T],
    buf: *mut T,
    cap: usize,
    out_len: *mut usize,
) -> Result<(), Fail> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = src.len();
    if src.len() > cap {
        return Err(Fail::Status(
            HlStatus::BufferTooSmall,
            format!("need room for {} values, got {cap}", src.len()),
        ));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn hl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a cloud from `n * dim` row-major coordinates.
///
/// # Safety
/// `coords` must point to `n * dim` readable doubles (or be null when `n`
/// is zero) and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_point_cloud_new(
    coords: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut HlPointCloud,
) -> HlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| Fail::Status(HlStatus::InvalidInput, "n * dim overflows".into()))?;
        let flat = if len == 0 {
            Vec::new()
        } else if coords.is_null() {
            return Err(null("coords"));
        } else {
            std::slice::from_raw_parts(coords, len).to_vec()
        };
        let cloud = PointCloud::from_flat(dim, flat)?;
        *out = Box::into_raw(Box::new(HlPointCloud(cloud)));
        Ok(())
    })
}

/// # Safety
/// `cloud` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hl_point_cloud_free(cloud: *mut HlPointCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// # Safety
/// `cloud` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hl_point_cloud_len(cloud: *const HlPointCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `cloud` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hl_point_cloud_dim(cloud: *const HlPointCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.dim())
}

/// Copies the row-major coordinates into `buf`; `*out_len` receives
/// `len * dim` even when the buffer is too small.
///
/// # Safety
/// `buf` must hold `cap` doubles; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_point_cloud_coords(
    cloud: *const HlPointCloud,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> HlStatus {
    guard(|| {
        let c = cloud.as_ref().ok_or_else(|| null("cloud"))?;
        copy_out(c.0.as_flat(), buf, cap, out_len)
    })
}

/// Samples `n` points. `config` is TOML with `[manifold]` and `[noise]`
/// tables, as in the command-line config files.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_sample(
    config: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut HlPointCloud,
) -> HlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut t = parse_toml(str_arg(config, "config")?)?;
        if let Some(Value::Table(m)) = t.get_mut("manifold") {
            fill_manifold_defaults(m)?;
        }
        let manifold: ManifoldSpec = section(&t, "manifold")?;
        let noise: NoiseSpec = match t.get("noise") {
            Some(_) => section(&t, "noise")?,
            None => NoiseSpec::Noiseless,
        };
        let s = sample(&manifold, &noise, n, seed)?;
        *out = Box::into_raw(Box::new(HlPointCloud(s.cloud)));
        Ok(())
    })
}

/// Runs the estimator described by `spec`, a TOML table with the fields of
/// an `[estimator]` config section. `ambient_dim` defaults to the cloud's
/// dimension.
///
/// # Safety
/// `cloud` must be live, `spec` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_estimate(
    cloud: *const HlPointCloud,
    spec: *const c_char,
    seed: u64,
    out: *mut *mut HlEstimate,
) -> HlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let c = cloud.as_ref().ok_or_else(|| null("cloud"))?;
        let mut t = parse_toml(str_arg(spec, "spec")?)?;
        t.entry("ambient_dim")
            .or_insert(Value::Integer(c.0.dim() as i64));
        let spec: EstimatorSpec = Value::Table(t)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let res = estimate(&c.0, &spec, seed)?;
        *out = Box::into_raw(Box::new(HlEstimate(res)));
        Ok(())
    })
}

/// # Safety
/// `res` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hl_estimate_free(res: *mut HlEstimate) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// True when too few points survived for the output to mean anything.
///
/// # Safety
/// `res` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hl_estimate_unstable(res: *const HlEstimate) -> bool {
    res.as_ref().map_or(true, |r| r.0.unstable)
}

/// Betti numbers b_0.. of the estimate. An unstable estimate yields zero
/// values.
///
/// # Safety
/// `buf` must hold `cap` values; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_estimate_betti(
    res: *const HlEstimate,
    buf: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> HlStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        let betti: &[usize] = r.0.profile.as_ref().map_or(&[], |p| p.betti.as_slice());
        copy_out(betti, buf, cap, out_len)
    })
}

/// Indices of the input points the estimator kept.
///
/// # Safety
/// `buf` must hold `cap` values; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_estimate_kept(
    res: *const HlEstimate,
    buf: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> HlStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        copy_out(&r.0.kept_indices, buf, cap, out_len)
    })
}

/// Betti numbers b_0..b_{top_dim-1} of the Čech complex of radius `eps`.
///
/// # Safety
/// `cloud` must be live, `buf` must hold `cap` values and `out_len` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn hl_cech_betti(
    cloud: *const HlPointCloud,
    eps: f64,
    top_dim: usize,
    buf: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> HlStatus {
    guard(|| {
        let c = cloud.as_ref().ok_or_else(|| null("cloud"))?;
        if top_dim == 0 {
            return Err(Fail::Status(
                HlStatus::InvalidInput,
                "top_dim must be at least 1".into(),
            ));
        }
        let complex = cech_complex(&c.0, eps, top_dim)?;
        let p = betti_numbers(&complex, top_dim - 1)?;
        copy_out(&p.betti, buf, cap, out_len)
    })
}

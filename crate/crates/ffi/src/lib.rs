//! C ABI over `lidar-iid`.
//!
//! Objects cross the boundary as opaque handles created by `lii_*_new` /
//! `lii_*_load` and released by the matching `lii_*_free`. Every fallible call
//! returns a [`LiiStatus`]; on failure [`lii_last_error`] describes the cause
//! for the calling thread. Pixel buffers are row-major `f64`, RGB interleaved
//! for color images. Panics never unwind into C; they surface as
//! `LII_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use lidar_iid::annotate::{read_annotations, FieldMap};
use lidar_iid::densify::{densify, SparseIntensity};
use lidar_iid::eval::whdr;
use lidar_iid::imagecore::{GammaConfig, GrayMap, LinearImage};
use lidar_iid::pipeline::io::load_image;
use lidar_iid::pipeline::{run_method, Method, MethodParams};
use lidar_iid::solver::Decomposition;
use lidar_iid::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiiStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument value, malformed input data or shape mismatch.
    Invalid = 2,
    /// File could not be read or written.
    Io = 3,
    /// An iterative solver stopped short or produced non-finite values.
    Numerical = 4,
    /// Output buffer length does not match the object's size.
    BufferSize = 5,
    Panic = 6,
}

/// Linear-light RGB image.
pub struct LiiImage(LinearImage);

/// Intensity map with its observation mask.
pub struct LiiIntensity(SparseIntensity);

/// Albedo and shade produced by [`lii_decompose`].
pub struct LiiDecomposition(Decomposition);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LiiStatus {
    match err {
        Error::Io { .. } | Error::Image { .. } => LiiStatus::Io,
        Error::NonConvergence { .. } | Error::NonFinite { .. } => LiiStatus::Numerical,
        _ => LiiStatus::Invalid,
    }
}

struct Fail(LiiStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LiiStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic for [`lii_last_error`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LiiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LiiStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LiiStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LiiStatus::Invalid, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, expected: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != expected {
        return Err(Fail(
            LiiStatus::BufferSize,
            format!("{what} holds {len} values, need {expected}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn pixel_count(width: usize, height: usize) -> Result<usize, Fail> {
    width
        .checked_mul(height)
        .ok_or_else(|| Fail(LiiStatus::Invalid, format!("{width}x{height} overflows")))
}

/// Message for the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lii_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lii_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an image from `width * height * 3` linear values in `[0, 1]`
/// (values outside are clamped).
///
/// # Safety
/// `rgb` must point to `width * height * 3` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lii_image_new(
    width: usize,
    height: usize,
    rgb: *const f64,
    out: *mut *mut LiiImage,
) -> LiiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = pixel_count(width, height)?;
        let data = slice_arg(rgb, n * 3, "rgb")?;
        let px = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let img = LinearImage::new(width, height, px)?;
        *out = Box::into_raw(Box::new(LiiImage(img)));
        Ok(())
    })
}

/// Reads a display-encoded PNG and linearizes it with `gamma`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lii_image_load(path: *const c_char, gamma: f64, out: *mut *mut LiiImage) -> LiiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = PathBuf::from(str_arg(path, "path")?);
        let img = load_image(&path, GammaConfig::new(gamma)?)?;
        *out = Box::into_raw(Box::new(LiiImage(img)));
        Ok(())
    })
}

/// Writes the image size to `width` and `height`.
///
/// # Safety
/// `img` must be a live handle; `width` and `height` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lii_image_dims(img: *const LiiImage, width: *mut usize, height: *mut usize) -> LiiStatus {
    guard(|| {
        let img = ref_arg(img, "img")?;
        if width.is_null() || height.is_null() {
            return Err(null("width/height"));
        }
        (*width, *height) = img.0.dims();
        Ok(())
    })
}

/// # Safety
/// `img` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lii_image_free(img: *mut LiiImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Builds intensity from `width * height` values and a byte mask
/// (non-zero = observed). Observed values must lie in `[0, 1]`.
///
/// # Safety
/// `values` and `mask` must each point to `width * height` readable elements.
#[no_mangle]
pub unsafe extern "C" fn lii_intensity_new(
    width: usize,
    height: usize,
    values: *const f64,
    mask: *const u8,
    out: *mut *mut LiiIntensity,
) -> LiiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = pixel_count(width, height)?;
        let v = slice_arg(values, n, "values")?.to_vec();
        let m = slice_arg(mask, n, "mask")?.iter().map(|&b| b != 0).collect();
        let sparse = SparseIntensity::new(GrayMap::new(width, height, v)?, m)?;
        *out = Box::into_raw(Box::new(LiiIntensity(sparse)));
        Ok(())
    })
}

/// # Safety
/// `lidar` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lii_intensity_free(lidar: *mut LiiIntensity) {
    if !lidar.is_null() {
        drop(Box::from_raw(lidar));
    }
}

/// Completes sparse intensity into `out` (`len` must equal the pixel count)
/// with default parameters.
///
/// # Safety
/// Handles must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lii_densify(
    img: *const LiiImage,
    lidar: *const LiiIntensity,
    out: *mut f64,
    len: usize,
) -> LiiStatus {
    guard(|| {
        let img = ref_arg(img, "img")?;
        let lidar = ref_arg(lidar, "lidar")?;
        let dst = out_slice(out, len, img.0.len(), "out")?;
        let dense = densify(&img.0, &lidar.0, &MethodParams::default().densify)?;
        dst.copy_from_slice(dense.intensity.values());
        Ok(())
    })
}

/// Decomposes `img` with the named method (`"ours"`, `"ours_no_lid"`,
/// `"ours_no_int"`, `"baseline_r"`, `"baseline_s"`, `"retinex"`,
/// `"color_retinex"`) and default parameters.
///
/// # Safety
/// Handles must be live; `method` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lii_decompose(
    img: *const LiiImage,
    lidar: *const LiiIntensity,
    method: *const c_char,
    out: *mut *mut LiiDecomposition,
) -> LiiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let img = ref_arg(img, "img")?;
        let lidar = ref_arg(lidar, "lidar")?;
        let method: Method = str_arg(method, "method")?.parse()?;
        let dec = run_method(method, &img.0, &lidar.0, &MethodParams::default())?;
        *out = Box::into_raw(Box::new(LiiDecomposition(dec)));
        Ok(())
    })
}

/// Copies the albedo (`len` = pixels * 3, RGB interleaved) into `out`.
///
/// # Safety
/// `dec` must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lii_decomposition_albedo(dec: *const LiiDecomposition, out: *mut f64, len: usize) -> LiiStatus {
    guard(|| {
        let dec = ref_arg(dec, "dec")?;
        let px = dec.0.albedo.pixels();
        let dst = out_slice(out, len, px.len() * 3, "out")?;
        for (d, p) in dst.chunks_exact_mut(3).zip(px) {
            d.copy_from_slice(p);
        }
        Ok(())
    })
}

/// Copies the shade (`len` = pixels) into `out`.
///
/// # Safety
/// `dec` must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lii_decomposition_shade(dec: *const LiiDecomposition, out: *mut f64, len: usize) -> LiiStatus {
    guard(|| {
        let dec = ref_arg(dec, "dec")?;
        let v = dec.0.shade.values();
        out_slice(out, len, v.len(), "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// Albedo as a new image handle, for scoring with [`lii_whdr`].
///
/// # Safety
/// `dec` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lii_decomposition_albedo_image(
    dec: *const LiiDecomposition,
    out: *mut *mut LiiImage,
) -> LiiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dec = ref_arg(dec, "dec")?;
        *out = Box::into_raw(Box::new(LiiImage(dec.0.albedo.clone())));
        Ok(())
    })
}

/// # Safety
/// `dec` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lii_decomposition_free(dec: *mut LiiDecomposition) {
    if !dec.is_null() {
        drop(Box::from_raw(dec));
    }
}

/// Weighted disagreement rate of `albedo` against a JSON-lines pair file.
///
/// # Safety
/// `albedo` must be live; `annotations` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lii_whdr(
    albedo: *const LiiImage,
    annotations: *const c_char,
    delta: f64,
    out: *mut f64,
) -> LiiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let albedo = ref_arg(albedo, "albedo")?;
        let path = PathBuf::from(str_arg(annotations, "annotations")?);
        let pairs = read_annotations(&path, Some(albedo.0.dims()), &FieldMap::default())?;
        *out = whdr(&pairs, &albedo.0, delta)?;
        Ok(())
    })
}

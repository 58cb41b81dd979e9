//! C interface to `pfan-core`.
//!
//! Every fallible function returns a [`PfanStatus`]. On failure a message is
//! kept per thread and can be read with [`pfan_last_error`]. Panics never
//! cross the boundary; they surface as [`PfanStatus::Panic`].
//!
//! Images are tightly packed 8-bit RGB, row-major, `width * height * 3`
//! bytes.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pfan_core::arch::{flop_count, AttnKind, PfanConfig};
use pfan_core::metrics::{ciede2000, image_ciede2000, psnr, ssim, Lab};
use pfan_core::model::Desmoker;
use pfan_core::synth::{composite, render_smoke_frame, SmokeLayer, SmokeParams};
use pfan_core::{Error, Image};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Image = 4,
    Config = 5,
    Shape = 6,
    Weights = 7,
    Data = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfanAttnKind {
    Sea = 0,
    Full = 1,
}

/// Smoke controls; positions are normalized with `y` pointing down.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PfanSmokeParams {
    pub density: f64,
    pub intensity: f64,
    pub temperature: f64,
    pub source_x: f64,
    pub source_y: f64,
    pub light_x: f64,
    pub light_y: f64,
    pub light_intensity: f64,
    pub seed: u64,
    pub frame: u32,
}

impl From<PfanSmokeParams> for SmokeParams {
    fn from(p: PfanSmokeParams) -> Self {
        SmokeParams {
            density: p.density,
            intensity: p.intensity,
            temperature: p.temperature,
            source: (p.source_x, p.source_y),
            light: (p.light_x, p.light_y),
            light_intensity: p.light_intensity,
            seed: p.seed,
            frame: p.frame,
        }
    }
}

/// Opaque generator handle.
pub struct PfanGenerator {
    model: Desmoker,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PfanStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.class() {
            "io" => PfanStatus::Io,
            "image" => PfanStatus::Image,
            "config" => PfanStatus::Config,
            "shape" => PfanStatus::Shape,
            "weights" => PfanStatus::Weights,
            _ => PfanStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PfanStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(PfanStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PfanStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfanStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
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
            PfanStatus::Panic
        }
    }
}

fn pixel_count(width: usize, height: usize) -> Result<usize, Failure> {
    if width == 0 || height == 0 {
        return Err(invalid(format!("empty image {width}x{height}")));
    }
    width
        .checked_mul(height)
        .filter(|n| *n <= isize::MAX as usize / 12)
        .ok_or_else(|| invalid("image too large"))
}

/// # Safety
/// `rgb` must be null or point to `width * height * 3` readable bytes.
unsafe fn read_rgb(rgb: *const u8, width: usize, height: usize, what: &str) -> Result<Image, Failure> {
    let n = pixel_count(width, height)?;
    if rgb.is_null() {
        return Err(null(what));
    }
    let bytes = std::slice::from_raw_parts(rgb, n * 3);
    Ok(Image::from_rgb8(width, height, bytes)?)
}

/// # Safety
/// `out` must be null or point to `img.width() * img.height() * 3` writable bytes.
unsafe fn write_rgb(img: &Image, out: *mut u8) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    let bytes = img.to_rgb8();
    ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
    Ok(())
}

unsafe fn out_param<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pfan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next `pfan_*` call on the same thread.
#[no_mangle]
pub extern "C" fn pfan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a generator checkpoint from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfan_generator_load(path: *const c_char, out: *mut *mut PfanGenerator) -> PfanStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not UTF-8"))?;
        let model = Desmoker::load(path)?;
        out_param(out, Box::into_raw(Box::new(PfanGenerator { model })))
    })
}

/// Loads a generator checkpoint from memory.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfan_generator_from_bytes(
    bytes: *const u8,
    len: usize,
    out: *mut *mut PfanGenerator,
) -> PfanStatus {
    guard(|| {
        if bytes.is_null() {
            return Err(null("bytes"));
        }
        let model = Desmoker::from_bytes(std::slice::from_raw_parts(bytes, len))?;
        out_param(out, Box::into_raw(Box::new(PfanGenerator { model })))
    })
}

/// Untrained generator with the default (or desk-scale) topology.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfan_generator_new(desk: bool, seed: u64, out: *mut *mut PfanGenerator) -> PfanStatus {
    guard(|| {
        let cfg = if desk {
            PfanConfig::desk()
        } else {
            PfanConfig::default()
        };
        let model = Desmoker::new(&cfg, seed)?;
        out_param(out, Box::into_raw(Box::new(PfanGenerator { model })))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `generator` must come from a `pfan_generator_*` constructor and not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pfan_generator_free(generator: *mut PfanGenerator) {
    if !generator.is_null() {
        drop(Box::from_raw(generator));
    }
}

/// # Safety
/// `generator` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfan_generator_param_count(generator: *const PfanGenerator, out: *mut usize) -> PfanStatus {
    guard(|| {
        let g = generator.as_ref().ok_or_else(|| null("generator"))?;
        out_param(out, g.model.param_count())
    })
}

/// Desmokes one RGB image into `out_rgb` (same size as the input).
///
/// # Safety
/// `generator` must be a live handle; buffers must hold `width * height * 3`
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn pfan_generator_desmoke(
    generator: *const PfanGenerator,
    rgb: *const u8,
    width: usize,
    height: usize,
    out_rgb: *mut u8,
) -> PfanStatus {
    guard(|| {
        let g = generator.as_ref().ok_or_else(|| null("generator"))?;
        let img = read_rgb(rgb, width, height, "input image")?;
        write_rgb(&g.model.desmoke(&img)?, out_rgb)
    })
}

unsafe fn pair_metric(
    a: *const u8,
    b: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
    f: fn(&Image, &Image) -> pfan_core::Result<f64>,
) -> PfanStatus {
    guard(|| {
        let x = read_rgb(a, width, height, "first image")?;
        let y = read_rgb(b, width, height, "second image")?;
        out_param(out, f(&x, &y)?)
    })
}

/// PSNR in dB over all channels; `+inf` for identical images.
///
/// # Safety
/// `a` and `b` must hold `width * height * 3` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfan_psnr_rgb8(
    a: *const u8,
    b: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> PfanStatus {
    pair_metric(a, b, width, height, out, psnr)
}

/// Mean SSIM over the three channels.
///
/// # Safety
/// As for [`pfan_psnr_rgb8`].
#[no_mangle]
pub unsafe extern "C" fn pfan_ssim_rgb8(
    a: *const u8,
    b: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> PfanStatus {
    pair_metric(a, b, width, height, out, ssim)
}

/// Mean per-pixel CIEDE2000.
///
/// # Safety
/// As for [`pfan_psnr_rgb8`].
#[no_mangle]
pub unsafe extern "C" fn pfan_ciede2000_rgb8(
    a: *const u8,
    b: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> PfanStatus {
    pair_metric(a, b, width, height, out, image_ciede2000)
}

/// CIEDE2000 between two Lab colors.
#[no_mangle]
pub extern "C" fn pfan_ciede2000_lab(l1: f64, a1: f64, b1: f64, l2: f64, a2: f64, b2: f64) -> f64 {
    ciede2000(Lab { l: l1, a: a1, b: b1 }, Lab { l: l2, a: a2, b: b2 })
}

/// Renders a smoke layer into `out` (`width * height` floats in `[0, 1]`).
///
/// # Safety
/// `params` must be readable; `out` must hold `width * height` floats.
#[no_mangle]
pub unsafe extern "C" fn pfan_render_smoke(
    params: *const PfanSmokeParams,
    width: usize,
    height: usize,
    out: *mut f32,
) -> PfanStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        pixel_count(width, height)?;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        let layer = render_smoke_frame(&SmokeParams::from(*p), width, height)?;
        ptr::copy_nonoverlapping(layer.data.as_ptr(), out, layer.data.len());
        Ok(())
    })
}

/// Adds a smoke layer to a clean RGB image, clamping at white.
///
/// # Safety
/// `clean` and `out_rgb` hold `width * height * 3` bytes; `smoke` holds
/// `width * height` floats.
#[no_mangle]
pub unsafe extern "C" fn pfan_composite_rgb8(
    clean: *const u8,
    smoke: *const f32,
    width: usize,
    height: usize,
    out_rgb: *mut u8,
) -> PfanStatus {
    guard(|| {
        let img = read_rgb(clean, width, height, "clean image")?;
        if smoke.is_null() {
            return Err(null("smoke layer"));
        }
        let layer = SmokeLayer {
            width,
            height,
            data: std::slice::from_raw_parts(smoke, width * height).to_vec(),
        };
        write_rgb(&composite(&img, &layer)?, out_rgb)
    })
}

/// Analytic operation count of one attention map; fails if it exceeds
/// `u64`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfan_flop_count(
    kind: PfanAttnKind,
    c: usize,
    c_qk: usize,
    c_v: usize,
    h: usize,
    w: usize,
    out: *mut u64,
) -> PfanStatus {
    guard(|| {
        let kind = match kind {
            PfanAttnKind::Sea => AttnKind::Sea,
            PfanAttnKind::Full => AttnKind::Full,
        };
        let n = flop_count(kind, c, c_qk, c_v, h, w);
        out_param(
            out,
            u64::try_from(n).map_err(|_| invalid(format!("count {n} exceeds 64 bits")))?,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status_codes() {
        assert_eq!(guard(|| panic!("boom")), PfanStatus::Panic);
        let msg = unsafe { CStr::from_ptr(pfan_last_error()) }
            .to_str()
            .unwrap()
            .to_string();
        assert_eq!(msg, "panic: boom");
        assert_eq!(guard(|| Ok(())), PfanStatus::Ok);
        assert!(pfan_last_error().is_null());
    }
}

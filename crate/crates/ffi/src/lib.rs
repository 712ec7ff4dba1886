//! C ABI over the `wiener4d` denoiser.
//!
//! Every object crosses the boundary as an opaque pointer owned by the
//! caller and released with the matching `*_free`. Functions return a
//! [`W4dStatus`]; on failure [`w4d_last_error`] holds a message for the
//! calling thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use wiener4d::seqio::{load_weights, read_sequence, write_sequence, RawDtype, SeqFormat};
use wiener4d::{
    add_awgn, denoise_baseline3d, engine, psnr, ssim, DcMode, EngineConfig, Error, ErrorKind, Mode, NoiseModel,
    NoiseSpec, Sequence, WeightBundle, WindowShape,
};

/// Status codes. The first four match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W4dStatus {
    Ok = 0,
    Usage = 2,
    Io = 3,
    Format = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W4dWindow {
    Cosine = 0,
    Gaussian = 1,
    Trained = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W4dDc {
    Mean = 0,
    Median = 1,
    GroundTruth = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W4dMode {
    Classic = 0,
    Refined = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W4dDtype {
    U8 = 0,
    F32 = 1,
}

/// RGB sequence, `[frames][3][height][width]` f32 on the 8-bit scale.
pub struct W4dSequence(Sequence);

/// Engine configuration. Starts at the library defaults with sigma 20.
pub struct W4dConfig(EngineConfig);

/// Loaded `W4DW` weight bundle.
pub struct W4dBundle(WeightBundle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> W4dStatus {
    match err.kind() {
        ErrorKind::Usage => W4dStatus::Usage,
        ErrorKind::Io => W4dStatus::Io,
        ErrorKind::Format => W4dStatus::Format,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> W4dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => W4dStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            W4dStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            W4dStatus::Usage
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            W4dStatus::Panic
        }
    }
}

unsafe fn obj<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn obj_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn path(p: *const c_char, what: &'static str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn w4d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Copies `frames * 3 * height * width` floats from `data`.
///
/// # Safety
/// `data` must point to that many readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w4d_sequence_new(
    frames: usize,
    height: usize,
    width: usize,
    data: *const f32,
    out: *mut *mut W4dSequence,
) -> W4dStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let len = frames
            .checked_mul(3)
            .and_then(|v| v.checked_mul(height))
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Fail::Arg("sequence size overflows".into()))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        *out = boxed(W4dSequence(Sequence::new(frames, height, width, values)?));
        Ok(())
    })
}

/// Reads a PNG directory (directories and extension-less paths) or a raw
/// `V4DS` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w4d_sequence_read(p: *const c_char, out: *mut *mut W4dSequence) -> W4dStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let p = path(p, "path")?;
        let seq = read_sequence(&p, SeqFormat::guess(&p, RawDtype::F32))?;
        *out = boxed(W4dSequence(seq));
        Ok(())
    })
}

/// Writes with the same path rule as [`w4d_sequence_read`]. `dtype` only
/// applies to raw files.
///
/// # Safety
/// `seq` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn w4d_sequence_write(seq: *const W4dSequence, p: *const c_char, dtype: W4dDtype) -> W4dStatus {
    guard(|| {
        let seq = obj(seq, "seq")?;
        let p = path(p, "path")?;
        let dtype = match dtype {
            W4dDtype::U8 => RawDtype::U8,
            W4dDtype::F32 => RawDtype::F32,
        };
        write_sequence(&seq.0, &p, SeqFormat::guess(&p, dtype))?;
        Ok(())
    })
}

/// # Safety
/// `seq` must be NULL or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn w4d_sequence_free(seq: *mut W4dSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// # Safety
/// `seq` must come from this library; each out pointer may be NULL.
#[no_mangle]
pub unsafe extern "C" fn w4d_sequence_dims(
    seq: *const W4dSequence,
    frames: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> W4dStatus {
    guard(|| {
        let s = &obj(seq, "seq")?.0;
        for (p, v) in [(frames, s.frames()), (height, s.height()), (width, s.width())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Borrowed pointer to the samples; valid while `seq` lives. NULL if `seq`
/// is NULL.
///
/// # Safety
/// `seq` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn w4d_sequence_data(seq: *const W4dSequence) -> *const f32 {
    seq.as_ref().map_or(ptr::null(), |s| s.0.data().as_ptr())
}

#[no_mangle]
pub extern "C" fn w4d_config_new() -> *mut W4dConfig {
    boxed(W4dConfig(EngineConfig::default()))
}

/// # Safety
/// `cfg` must be NULL or come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_free(cfg: *mut W4dConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn set(cfg: *mut W4dConfig, f: impl FnOnce(&mut EngineConfig)) -> W4dStatus {
    guard(|| {
        f(&mut obj_mut(cfg, "cfg")?.0);
        Ok(())
    })
}

// Setters only store values; validation happens in `w4d_denoise`.

/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_block(cfg: *mut W4dConfig, block: usize) -> W4dStatus {
    set(cfg, |c| c.block = block)
}

/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_stride_div(cfg: *mut W4dConfig, stride_div: usize) -> W4dStatus {
    set(cfg, |c| c.stride_div = stride_div)
}

/// Odd number of frames per block.
///
/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_taps(cfg: *mut W4dConfig, taps: usize) -> W4dStatus {
    set(cfg, |c| c.taps = taps)
}

/// Edge blocks use windows held flat toward the frame border.
///
/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_flat_borders(cfg: *mut W4dConfig, flat: bool) -> W4dStatus {
    set(cfg, |c| c.flat_borders = flat)
}

/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_clamp_refined(cfg: *mut W4dConfig, clamp: bool) -> W4dStatus {
    set(cfg, |c| c.clamp_refined = clamp)
}

/// Non-positive values restore the per-size default.
///
/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_alpha(cfg: *mut W4dConfig, alpha: f64) -> W4dStatus {
    set(cfg, |c| c.alpha = (alpha > 0.0).then_some(alpha))
}

/// Known noise STD on the 8-bit scale.
///
/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_sigma(cfg: *mut W4dConfig, sigma: f64) -> W4dStatus {
    set(cfg, |c| c.noise = NoiseSpec::Sigma(sigma))
}

/// Estimate noise with the bundle's noise net. Turning it off restores sigma 20.
///
/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_blind(cfg: *mut W4dConfig, blind: bool) -> W4dStatus {
    set(cfg, |c| {
        c.noise = if blind {
            NoiseSpec::Blind
        } else {
            NoiseSpec::Sigma(20.0)
        }
    })
}

/// Zero uses the global pool.
///
/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_threads(cfg: *mut W4dConfig, threads: usize) -> W4dStatus {
    set(cfg, |c| c.threads = (threads > 0).then_some(threads))
}

/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_window(cfg: *mut W4dConfig, window: W4dWindow) -> W4dStatus {
    set(cfg, |c| {
        c.window = match window {
            W4dWindow::Cosine => WindowShape::Cosine,
            W4dWindow::Gaussian => WindowShape::Gaussian,
            W4dWindow::Trained => WindowShape::Trained,
        }
    })
}

/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_dc(cfg: *mut W4dConfig, dc: W4dDc) -> W4dStatus {
    set(cfg, |c| {
        c.dc = match dc {
            W4dDc::Mean => DcMode::Mean,
            W4dDc::Median => DcMode::Median,
            W4dDc::GroundTruth => DcMode::GroundTruth,
        }
    })
}

/// # Safety
/// `cfg` must come from [`w4d_config_new`].
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_mode(cfg: *mut W4dConfig, mode: W4dMode) -> W4dStatus {
    set(cfg, |c| {
        c.mode = match mode {
            W4dMode::Classic => Mode::Classic,
            W4dMode::Refined => Mode::Refined,
        }
    })
}

/// Multi-scale block sizes with optional weights (`weights` may be NULL for
/// uniform). `count` 0 returns to single scale.
///
/// # Safety
/// `sizes` (and `weights` if non-NULL) must hold `count` readable values.
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_scales(
    cfg: *mut W4dConfig,
    sizes: *const usize,
    weights: *const f64,
    count: usize,
) -> W4dStatus {
    guard(|| {
        let c = &mut obj_mut(cfg, "cfg")?.0;
        if count == 0 {
            c.scales.clear();
            c.scale_weights = None;
            return Ok(());
        }
        if sizes.is_null() {
            return Err(Fail::Null("sizes"));
        }
        c.scales = std::slice::from_raw_parts(sizes, count).to_vec();
        c.scale_weights = (!weights.is_null()).then(|| std::slice::from_raw_parts(weights, count).to_vec());
        Ok(())
    })
}

/// Directory of `t{t}_n{k}.flo` files; NULL disables motion compensation.
///
/// # Safety
/// `dir` must be NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn w4d_config_set_flows(cfg: *mut W4dConfig, dir: *const c_char) -> W4dStatus {
    guard(|| {
        let c = &mut obj_mut(cfg, "cfg")?.0;
        c.flows = if dir.is_null() { None } else { Some(path(dir, "dir")?) };
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w4d_bundle_load(p: *const c_char, out: *mut *mut W4dBundle) -> W4dStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let p = path(p, "path")?;
        *out = boxed(W4dBundle(load_weights(&p)?));
        Ok(())
    })
}

/// # Safety
/// `bundle` must be NULL or come from [`w4d_bundle_load`].
#[no_mangle]
pub unsafe extern "C" fn w4d_bundle_free(bundle: *mut W4dBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Runs the 4-D filter. `bundle` and `clean` may be NULL when the
/// configuration does not need them.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w4d_denoise(
    input: *const W4dSequence,
    cfg: *const W4dConfig,
    bundle: *const W4dBundle,
    clean: *const W4dSequence,
    out: *mut *mut W4dSequence,
) -> W4dStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let input = &obj(input, "input")?.0;
        let cfg = &obj(cfg, "cfg")?.0;
        let bundle = bundle.as_ref().map(|b| &b.0);
        let clean = clean.as_ref().map(|s| &s.0);
        let res = engine::run(input, cfg, bundle, clean)?;
        *out = boxed(W4dSequence(res.sequence));
        Ok(())
    })
}

/// Luma-only 3-D reference filter; uses block, taps and sigma from `cfg`.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w4d_denoise_baseline3d(
    input: *const W4dSequence,
    cfg: *const W4dConfig,
    out: *mut *mut W4dSequence,
) -> W4dStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let seq = denoise_baseline3d(&obj(input, "input")?.0, &obj(cfg, "cfg")?.0)?;
        *out = boxed(W4dSequence(seq));
        Ok(())
    })
}

/// Seeded AWGN; `clip` clamps the result to `[0, 255]`.
///
/// # Safety
/// `input` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w4d_add_noise(
    input: *const W4dSequence,
    sigma: f64,
    seed: u64,
    clip: bool,
    out: *mut *mut W4dSequence,
) -> W4dStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = NoiseModel { sigma, seed, clip };
        *out = boxed(W4dSequence(add_awgn(&obj(input, "input")?.0, model)?));
        Ok(())
    })
}

/// Mean per-frame PSNR in dB, capped at 99.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w4d_psnr(reference: *const W4dSequence, test: *const W4dSequence, out: *mut f64) -> W4dStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = psnr(&obj(reference, "reference")?.0, &obj(test, "test")?.0)?.mean;
        Ok(())
    })
}

/// Mean per-frame SSIM.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w4d_ssim(reference: *const W4dSequence, test: *const W4dSequence, out: *mut f64) -> W4dStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ssim(&obj(reference, "reference")?.0, &obj(test, "test")?.0)?.mean;
        Ok(())
    })
}

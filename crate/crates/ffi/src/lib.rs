//! C ABI over the `microdoppler` crate.
//!
//! Objects are opaque handles created by `md_*_new`-style functions and
//! released with the matching `md_*_free`. Every fallible call returns an
//! [`MdStatus`]; on failure `md_last_error_message` describes the problem for
//! the calling thread. Arrays are row-major and sized by the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use microdoppler::denoise::{ca_cfar_2d_power, cfar_threshold_factor, gamma_correct, CfarParams, GammaParams};
use microdoppler::gait::{synthesize_baseband, BasebandSignal, GaitProfile};
use microdoppler::metrics::compare_planes;
use microdoppler::spectrogram::{stft_spectrogram, Spectrogram, SpectrumImage, StftParams};
use microdoppler::{Error, RadarConfig};
use ndarray::{Array2, ArrayView2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Aliasing = 3,
    ShapeMismatch = 4,
    BufferTooSmall = 5,
    Io = 6,
    Format = 7,
    Internal = 8,
}

pub struct MdRadar(RadarConfig);

pub struct MdProfile(GaitProfile);

pub struct MdSignal(BasebandSignal);

pub struct MdSpectrogram(Spectrogram);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MdMetrics {
    pub ssim: f64,
    /// `+inf` for identical inputs.
    pub psnr_db: f64,
    pub mse: f64,
    pub vif: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> MdStatus {
    match err {
        Error::Aliasing { .. } => MdStatus::Aliasing,
        Error::ShapeMismatch { .. } => MdStatus::ShapeMismatch,
        Error::Io { .. } => MdStatus::Io,
        Error::Png { .. } | Error::Json(_) | Error::Config(_) => MdStatus::Format,
        _ => MdStatus::InvalidArgument,
    }
}

struct Fail(MdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MdStatus::NullPointer, format!("`{what}` is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail> + UnwindSafe>(f: F) -> MdStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => MdStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MdStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len < need {
        return Err(Fail(
            MdStatus::BufferTooSmall,
            format!("`{what}` holds {len} elements, {need} needed"),
        ));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn plane<'a>(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<ArrayView2<'a, f64>, Fail> {
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Fail(MdStatus::InvalidArgument, format!("`{what}` dimensions overflow")))?;
    let data = slice_in(p, n, what)?;
    Ok(ArrayView2::from_shape((rows, cols), data).expect("length checked"))
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn md_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn md_radar_new(
    carrier_frequency_hz: f64,
    pulse_repetition_hz: f64,
    out: *mut *mut MdRadar,
) -> MdStatus {
    guard(|| {
        let radar = RadarConfig::new(carrier_frequency_hz, pulse_repetition_hz)?;
        store(out, MdRadar(radar), "out")
    })
}

/// # Safety
/// `radar` must be null or a handle from `md_radar_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_radar_free(radar: *mut MdRadar) {
    free_handle(radar)
}

/// # Safety
/// `radar` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_radar_max_velocity(radar: *const MdRadar, out: *mut f64) -> MdStatus {
    guard(|| {
        let r = deref(radar, "radar")?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.0.max_velocity();
        Ok(())
    })
}

/// # Safety
/// `radar` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_radar_velocity_resolution(
    radar: *const MdRadar,
    window_len: usize,
    out: *mut f64,
) -> MdStatus {
    guard(|| {
        let r = deref(radar, "radar")?;
        let v = r.0.velocity_resolution(window_len)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// # Safety
/// `radar` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_radar_wavelength(radar: *const MdRadar, out: *mut f64) -> MdStatus {
    guard(|| {
        let r = deref(radar, "radar")?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.0.wavelength_m();
        Ok(())
    })
}

/// Seven-scatterer walker at the given treadmill speed and half-gait duration.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_profile_default_walker(
    treadmill_speed_m_s: f64,
    half_gait_duration_s: f64,
    out: *mut *mut MdProfile,
) -> MdStatus {
    guard(|| {
        let profile = GaitProfile::default_walker(treadmill_speed_m_s, half_gait_duration_s);
        profile.validate()?;
        store(out, MdProfile(profile), "out")
    })
}

/// Gait profile parsed from a TOML document.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_profile_from_toml(toml: *const c_char, out: *mut *mut MdProfile) -> MdStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| Fail(MdStatus::Format, format!("profile is not UTF-8: {e}")))?;
        store(out, MdProfile(GaitProfile::load_toml(text)?), "out")
    })
}

/// # Safety
/// `profile` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_profile_free(profile: *mut MdProfile) {
    free_handle(profile)
}

/// Complex baseband of `profile` seen by `radar` for `duration_s` seconds.
///
/// # Safety
/// `profile` and `radar` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_synthesize(
    profile: *const MdProfile,
    radar: *const MdRadar,
    duration_s: f64,
    seed: u64,
    out: *mut *mut MdSignal,
) -> MdStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        let r = deref(radar, "radar")?;
        store(out, MdSignal(synthesize_baseband(&p.0, &r.0, duration_s, seed)?), "out")
    })
}

/// Number of complex samples, or 0 for a null handle.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_signal_len(signal: *const MdSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.len())
}

/// Copies real and imaginary parts into caller buffers of `len` elements.
///
/// # Safety
/// `signal` must be live; `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn md_signal_copy(signal: *const MdSignal, re: *mut f64, im: *mut f64, len: usize) -> MdStatus {
    guard(|| {
        let s = deref(signal, "signal")?;
        let n = s.0.len();
        let re = slice_out(re, len, n, "re")?;
        let im = slice_out(im, len, n, "im")?;
        for (i, z) in s.0.samples.iter().enumerate() {
            re[i] = z.re;
            im[i] = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_signal_free(signal: *mut MdSignal) {
    free_handle(signal)
}

/// Gaussian-window STFT in dB. `sigma_fraction` and `floor_db` of 0 select
/// the defaults.
///
/// # Safety
/// `signal` and `radar` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_stft(
    signal: *const MdSignal,
    radar: *const MdRadar,
    window_len: usize,
    hop: usize,
    sigma_fraction: f64,
    floor_db: f64,
    out: *mut *mut MdSpectrogram,
) -> MdStatus {
    guard(|| {
        let s = deref(signal, "signal")?;
        let r = deref(radar, "radar")?;
        let defaults = StftParams::default();
        let params = StftParams {
            window_len,
            hop,
            sigma_fraction: if sigma_fraction == 0.0 {
                defaults.sigma_fraction
            } else {
                sigma_fraction
            },
            floor_db: if floor_db == 0.0 { defaults.floor_db } else { floor_db },
        };
        store(out, MdSpectrogram(stft_spectrogram(&s.0, &r.0, &params)?), "out")
    })
}

/// # Safety
/// `spec` must be live; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_spectrogram_dims(
    spec: *const MdSpectrogram,
    rows: *mut usize,
    cols: *mut usize,
) -> MdStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        *rows.as_mut().ok_or_else(|| null("rows"))? = s.0.rows();
        *cols.as_mut().ok_or_else(|| null("cols"))? = s.0.cols();
        Ok(())
    })
}

/// Row-major dB values; row `rows / 2` is zero velocity.
///
/// # Safety
/// `spec` must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn md_spectrogram_copy(spec: *const MdSpectrogram, out: *mut f64, len: usize) -> MdStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        let dst = slice_out(out, len, s.0.values_db.len(), "out")?;
        for (d, v) in dst.iter_mut().zip(s.0.values_db.iter()) {
            *d = *v;
        }
        Ok(())
    })
}

/// Velocity in m/s of each row.
///
/// # Safety
/// `spec` must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn md_spectrogram_velocity_axis(
    spec: *const MdSpectrogram,
    out: *mut f64,
    len: usize,
) -> MdStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        let axis = s.0.velocity_axis();
        slice_out(out, len, axis.len(), "out")?.copy_from_slice(&axis);
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_spectrogram_free(spec: *mut MdSpectrogram) {
    free_handle(spec)
}

/// Cell-averaging scale factor for `n_training` cells at false-alarm rate `pfa`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_cfar_threshold_factor(n_training: usize, pfa: f64, out: *mut f64) -> MdStatus {
    guard(|| {
        let a = cfar_threshold_factor(n_training, pfa)?;
        *out.as_mut().ok_or_else(|| null("out"))? = a;
        Ok(())
    })
}

/// 2D CA-CFAR on linear power. Writes 1 for detections and 0 elsewhere.
///
/// # Safety
/// `power` must hold `rows * cols` doubles and `mask` as many bytes.
#[no_mangle]
pub unsafe extern "C" fn md_cfar_detect(
    power: *const f64,
    rows: usize,
    cols: usize,
    guard_cells: usize,
    training_cells: usize,
    pfa: f64,
    mask: *mut u8,
) -> MdStatus {
    guard(|| {
        let p = plane(power, rows, cols, "power")?.to_owned();
        let params = CfarParams::new(guard_cells, training_cells, pfa, 0.0)?;
        let detections = ca_cfar_2d_power(&p, &params)?;
        let dst = slice_out(mask, rows * cols, rows * cols, "mask")?;
        for (d, &hit) in dst.iter_mut().zip(detections.iter()) {
            *d = hit as u8;
        }
        Ok(())
    })
}

/// In-place gamma correction of 16-bit intensities.
///
/// # Safety
/// `pixels` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn md_gamma_u16(pixels: *mut u16, len: usize, gamma: f64) -> MdStatus {
    guard(|| {
        let params = GammaParams::new(gamma)?;
        let data = slice_out(pixels, len, len, "pixels")?;
        if data.is_empty() {
            return Ok(());
        }
        let gray = Array2::from_shape_vec((1, len), data.to_vec()).expect("length checked");
        let corrected = gamma_correct(&SpectrumImage::from_gray(&gray), &params)?.channel(0);
        for (d, v) in data.iter_mut().zip(corrected.iter()) {
            *d = *v;
        }
        Ok(())
    })
}

/// SSIM, PSNR, MSE and VIF of `distorted` against `reference`.
///
/// # Safety
/// Both planes must hold `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_compare(
    reference: *const f64,
    distorted: *const f64,
    rows: usize,
    cols: usize,
    data_range: f64,
    out: *mut MdMetrics,
) -> MdStatus {
    guard(|| {
        let a = plane(reference, rows, cols, "reference")?.to_owned();
        let b = plane(distorted, rows, cols, "distorted")?.to_owned();
        let r = compare_planes(&a, &b, data_range)?;
        *out.as_mut().ok_or_else(|| null("out"))? = MdMetrics {
            ssim: r.ssim,
            psnr_db: r.psnr_db,
            mse: r.mse,
            vif: r.vif,
        };
        Ok(())
    })
}

//! dB-scale STFT spectrograms, half-gait slicing and the 16-bit image format.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{s, Array2};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::BasebandSignal;
use crate::radar::RadarConfig;

pub const IMAGE_SIZE: usize = 256;
pub const IMAGE_CHANNELS: usize = 3;
const PIXEL_MAX: f64 = 65535.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftParams {
    pub window_len: usize,
    pub hop: usize,
    /// Gaussian standard deviation as a fraction of the window half-width.
    pub sigma_fraction: f64,
    /// Floor, in dB below the spectrogram maximum.
    pub floor_db: f64,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 16,
            sigma_fraction: 0.4,
            floor_db: 120.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Orientation {
    /// Orientation of the `k`-th half gait of a recording that starts on a left swing.
    pub fn for_slice(k: usize) -> Self {
        if k.is_multiple_of(2) {
            Orientation::Left
        } else {
            Orientation::Right
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Orientation::Left => "L",
            Orientation::Right => "R",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Rows are velocity bins (row `rows/2` is 0 m/s, increasing upwards in
/// index), columns are time frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values_db: Array2<f64>,
    pub window_len: usize,
    pub hop: usize,
    pub radar: RadarConfig,
    /// Column offset of this spectrogram inside the recording it was cut from.
    pub start_frame: usize,
    /// Set once the values are normalized to `[-range, 0]`.
    pub dynamic_range_db: Option<f64>,
    pub orientation: Option<Orientation>,
}

impl Spectrogram {
    /// Wraps a bare dB matrix; used for image-domain work and tests.
    pub fn from_values(values_db: Array2<f64>, radar: RadarConfig) -> Self {
        let rows = values_db.nrows();
        Self {
            values_db,
            window_len: rows,
            hop: 1,
            radar,
            start_frame: 0,
            dynamic_range_db: None,
            orientation: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.values_db.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values_db.ncols()
    }

    pub fn frame_duration_s(&self) -> f64 {
        self.hop as f64 / self.radar.pulse_repetition_hz()
    }

    pub fn duration_s(&self) -> f64 {
        self.cols() as f64 * self.frame_duration_s()
    }

    /// Velocity of each row; spans `[-v_max, v_max)`.
    pub fn velocity_axis(&self) -> Vec<f64> {
        let n = self.rows();
        let vmax = self.radar.max_velocity();
        (0..n)
            .map(|k| (k as f64 - (n / 2) as f64) * 2.0 * vmax / n as f64)
            .collect()
    }

    pub fn max_db(&self) -> f64 {
        self.values_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_db(&self) -> f64 {
        self.values_db.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn with_values(&self, values_db: Array2<f64>) -> Self {
        Self {
            values_db,
            ..self.clone()
        }
    }
}

pub fn gaussian_window(len: usize, sigma_fraction: f64) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(Error::param("len", format!("window length must be >= 2, got {len}")));
    }
    if !(sigma_fraction.is_finite() && sigma_fraction > 0.0) {
        return Err(Error::param(
            "sigma_fraction",
            format!("must be positive, got {sigma_fraction}"),
        ));
    }
    let half = (len - 1) as f64 / 2.0;
    let sigma = sigma_fraction * half;
    Ok((0..len)
        .map(|k| {
            let x = (k as f64 - half) / sigma;
            (-0.5 * x * x).exp()
        })
        .collect())
}

/// Linear power `|X(m, f)|^2` of a centered Gaussian-window STFT.
///
/// Frame `m` is centred on sample `m * hop` (zero padded at both ends), so a
/// signal of `n` samples yields `ceil(n / hop)` frames. Rows are shifted so
/// that row `window_len / 2` holds zero Doppler.
pub fn stft_power(signal: &BasebandSignal, params: &StftParams) -> Result<Array2<f64>> {
    let n = params.window_len;
    if params.hop == 0 {
        return Err(Error::param("hop", "must be >= 1"));
    }
    if signal.len() < n {
        return Err(Error::TooShort(format!(
            "signal has {} samples, one window needs {n}",
            signal.len()
        )));
    }
    let window = gaussian_window(n, params.sigma_fraction)?;
    let frames = signal.len().div_ceil(params.hop);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut power = Array2::<f64>::zeros((n, frames));
    let half = (n / 2) as isize;

    for m in 0..frames {
        let origin = (m * params.hop) as isize - half;
        for (k, (b, w)) in buf.iter_mut().zip(&window).enumerate() {
            let idx = origin + k as isize;
            *b = if idx >= 0 && (idx as usize) < signal.len() {
                signal.samples[idx as usize] * *w
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (bin, z) in buf.iter().enumerate() {
            let row = (bin + n / 2) % n;
            power[[row, m]] = z.norm_sqr();
        }
    }
    Ok(power)
}

/// `20 log10 |STFT|`, floored at `floor_db` below the global maximum.
pub fn stft_spectrogram(signal: &BasebandSignal, radar: &RadarConfig, params: &StftParams) -> Result<Spectrogram> {
    if !(params.floor_db.is_finite() && params.floor_db > 0.0) {
        return Err(Error::param("floor_db", "must be a positive dB range"));
    }
    let power = stft_power(signal, params)?;
    // 20 log10 |X| == 10 log10 |X|^2
    let mut db = power.mapv(|p| 10.0 * p.log10());
    let peak = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let reference = if peak.is_finite() { peak } else { 0.0 };
    let floor = reference - params.floor_db;
    db.mapv_inplace(|v| if v > floor { v } else { floor });
    Ok(Spectrogram {
        values_db: db,
        window_len: params.window_len,
        hop: params.hop,
        radar: *radar,
        start_frame: 0,
        dynamic_range_db: None,
        orientation: None,
    })
}

/// Cuts consecutive non-overlapping half-gait slices, dropping any partial
/// trailing segment. Boundaries fall on `round(k * h / frame_duration)`.
pub fn segment_half_gaits(spec: &Spectrogram, half_gait_duration_s: f64) -> Result<Vec<Spectrogram>> {
    if !(half_gait_duration_s.is_finite() && half_gait_duration_s > 0.0) {
        return Err(Error::param("half_gait_duration_s", "must be positive"));
    }
    let frames_per_half = half_gait_duration_s / spec.frame_duration_s();
    let count = (spec.cols() as f64 / frames_per_half + 1e-9).floor() as usize;
    if count == 0 {
        return Err(Error::TooShort(format!(
            "spectrogram spans {:.3} s, half gait is {half_gait_duration_s:.3} s",
            spec.duration_s()
        )));
    }
    let boundary = |k: usize| ((k as f64 * frames_per_half).round() as usize).min(spec.cols());
    Ok((0..count)
        .filter_map(|k| {
            let (a, b) = (boundary(k), boundary(k + 1));
            (b > a).then(|| Spectrogram {
                values_db: spec.values_db.slice(s![.., a..b]).to_owned(),
                start_frame: spec.start_frame + a,
                orientation: Some(Orientation::for_slice(k)),
                ..spec.clone()
            })
        })
        .collect())
}

/// Shifts the slice so its maximum is 0 dB and clamps below `-range_db`.
pub fn normalize_gait(slice: &Spectrogram, range_db: f64) -> Result<Spectrogram> {
    if slice.values_db.is_empty() {
        return Err(Error::Degenerate("empty slice".into()));
    }
    if !(range_db.is_finite() && range_db > 0.0) {
        return Err(Error::param("range_db", "must be positive"));
    }
    let peak = slice.max_db();
    let values = slice.values_db.mapv(|v| (v - peak).max(-range_db));
    let mut out = slice.with_values(values);
    out.dynamic_range_db = Some(range_db);
    Ok(out)
}

/// Bilinear resize with half-pixel centres.
pub fn resize_bilinear(values: &Array2<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let (src_r, src_c) = values.dim();
    let map = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let scale = src_len as f64 / dst_len as f64;
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let col_taps: Vec<_> = (0..cols).map(|c| map(c, src_c, cols)).collect();
    let mut out = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        let (r0, r1, fr) = map(r, src_r, rows);
        for (c, &(c0, c1, fc)) in col_taps.iter().enumerate() {
            let top = values[[r0, c0]] * (1.0 - fc) + values[[r0, c1]] * fc;
            let bottom = values[[r1, c0]] * (1.0 - fc) + values[[r1, c1]] * fc;
            out[[r, c]] = top * (1.0 - fr) + bottom * fr;
        }
    }
    out
}

/// Resizes a normalized slice to the square image grid, staying in dB.
pub fn resize_slice(slice: &Spectrogram, size: usize) -> Result<Spectrogram> {
    ensure_normalized(slice)?;
    Ok(slice.with_values(resize_bilinear(&slice.values_db, size, size)))
}

fn ensure_normalized(slice: &Spectrogram) -> Result<f64> {
    let range = slice.dynamic_range_db.ok_or(Error::NotNormalized)?;
    let (lo, hi) = (slice.min_db(), slice.max_db());
    if hi > 1e-9 || lo < -range - 1e-9 {
        return Err(Error::NotNormalized);
    }
    Ok(range)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrTag {
    Clean,
    Db(f64),
}

impl SnrTag {
    pub fn label(&self) -> String {
        match self {
            SnrTag::Clean => "clean".to_owned(),
            SnrTag::Db(v) => format!("{v}dB"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageMeta {
    pub subject_id: usize,
    pub gait_index: usize,
    pub orientation: Option<Orientation>,
    pub snr: Option<SnrTag>,
}

/// 16-bit RGB image, interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumImage {
    width: usize,
    height: usize,
    pixels: Vec<u16>,
    pub meta: ImageMeta,
}

impl SpectrumImage {
    pub fn from_rgb(width: usize, height: usize, pixels: Vec<u16>) -> Result<Self> {
        if pixels.len() != width * height * IMAGE_CHANNELS {
            return Err(Error::param(
                "pixels",
                format!(
                    "expected {} values, got {}",
                    width * height * IMAGE_CHANNELS,
                    pixels.len()
                ),
            ));
        }
        Ok(Self {
            width,
            height,
            pixels,
            meta: ImageMeta::default(),
        })
    }

    /// Replicates one plane into three identical channels.
    pub fn from_gray(plane: &Array2<u16>) -> Self {
        let (height, width) = plane.dim();
        let pixels = plane.iter().flat_map(|&p| [p; IMAGE_CHANNELS]).collect();
        Self {
            width,
            height,
            pixels,
            meta: ImageMeta::default(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn channel(&self, c: usize) -> Array2<u16> {
        Array2::from_shape_fn((self.height, self.width), |(r, col)| {
            self.pixels[(r * self.width + col) * IMAGE_CHANNELS + c]
        })
    }

    pub fn is_gray(&self) -> bool {
        self.pixels.chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2])
    }

    /// Single analysis plane: channel 0 for grayscale images, Rec. 601 luma otherwise.
    pub fn luma(&self) -> Array2<f64> {
        if self.is_gray() {
            return self.channel(0).mapv(f64::from);
        }
        Array2::from_shape_fn((self.height, self.width), |(r, c)| {
            let p = &self.pixels[(r * self.width + c) * 3..][..3];
            0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
        })
    }

    pub fn map_pixels(&self, f: impl Fn(u16) -> u16) -> Self {
        Self {
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
            ..self.clone()
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Sixteen);
        let to_err = |e: png::EncodingError| Error::Png {
            path: path.to_owned(),
            message: e.to_string(),
        };
        let mut writer = encoder.write_header().map_err(to_err)?;
        let bytes: Vec<u8> = self.pixels.iter().flat_map(|p| p.to_be_bytes()).collect();
        writer.write_image_data(&bytes).map_err(to_err)?;
        writer.finish().map_err(to_err)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let to_err = |m: String| Error::Png {
            path: path.to_owned(),
            message: m,
        };
        let decoder = png::Decoder::new(BufReader::new(file));
        let mut reader = decoder.read_info().map_err(|e| to_err(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| to_err("image too large".into()))?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf).map_err(|e| to_err(e.to_string()))?;
        if info.bit_depth != png::BitDepth::Sixteen {
            return Err(to_err(format!("expected 16-bit samples, got {:?}", info.bit_depth)));
        }
        let (w, h) = (info.width as usize, info.height as usize);
        let samples: Vec<u16> = buf[..info.buffer_size()]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect();
        let pixels = match info.color_type {
            png::ColorType::Rgb => samples,
            png::ColorType::Grayscale => samples.iter().flat_map(|&p| [p; 3]).collect(),
            other => return Err(to_err(format!("unsupported color type {other:?}"))),
        };
        Self::from_rgb(w, h, pixels)
    }
}

/// Linear map `[-range, 0] dB -> [0, 65535]` of an already image-sized slice.
pub fn quantize(slice: &Spectrogram) -> Result<SpectrumImage> {
    let range = ensure_normalized(slice)?;
    let plane = slice
        .values_db
        .mapv(|v| (((v + range) / range).clamp(0.0, 1.0) * PIXEL_MAX).round() as u16);
    let mut image = SpectrumImage::from_gray(&plane);
    image.meta.orientation = slice.orientation;
    Ok(image)
}

/// Resize to 256x256 then quantize.
pub fn to_image(slice: &Spectrogram) -> Result<SpectrumImage> {
    quantize(&resize_slice(slice, IMAGE_SIZE)?)
}

/// Inverse of the quantization, back to dB values in `[-range, 0]`.
pub fn from_image(image: &SpectrumImage, range_db: f64) -> Array2<f64> {
    image.luma().mapv(|p| p / PIXEL_MAX * range_db - range_db)
}

/// Wraps an image plane back into a normalized slice.
pub fn image_to_slice(image: &SpectrumImage, range_db: f64, radar: RadarConfig) -> Spectrogram {
    let mut spec = Spectrogram::from_values(from_image(image, range_db), radar);
    spec.dynamic_range_db = Some(range_db);
    spec.orientation = image.meta.orientation;
    spec
}

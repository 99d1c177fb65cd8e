//! Full-reference quality metrics: MSE, PSNR, SSIM and pixel-domain VIF.
//!
//! All functions take single-channel planes of pixel values; `data_range`
//! is the peak pixel value of the convention the planes are expressed in.

use ndarray::{s, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrogram::SpectrumImage;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const VIF_SCALES: u32 = 4;
/// HVS noise variance expressed on an 8-bit pixel scale.
const VIF_NOISE_VAR: f64 = 2.0;

fn check_shapes(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    if a.is_empty() {
        return Err(Error::Degenerate("empty image".into()));
    }
    Ok(())
}

pub fn mse(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    check_shapes(a, b)?;
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// Returns `f64::INFINITY` for identical inputs.
pub fn psnr(a: &Array2<f64>, b: &Array2<f64>, data_range: f64) -> Result<f64> {
    if !(data_range > 0.0) {
        return Err(Error::param("data_range", "must be positive"));
    }
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * data_range.log10() - 10.0 * e.log10())
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let k: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

/// Separable 'valid' correlation with a symmetric 1D kernel.
fn filter_valid(img: &Array2<f64>, kernel: &[f64]) -> Array2<f64> {
    let k = kernel.len();
    let (rows, cols) = img.dim();
    let (out_r, out_c) = (rows + 1 - k, cols + 1 - k);
    let mut tmp = Array2::<f64>::zeros((rows, out_c));
    for r in 0..rows {
        for c in 0..out_c {
            tmp[[r, c]] = (0..k).map(|i| img[[r, c + i]] * kernel[i]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((out_r, out_c));
    for r in 0..out_r {
        for c in 0..out_c {
            out[[r, c]] = (0..k).map(|i| tmp[[r + i, c]] * kernel[i]).sum();
        }
    }
    out
}

struct LocalMoments {
    mu_a: Array2<f64>,
    mu_b: Array2<f64>,
    var_a: Array2<f64>,
    var_b: Array2<f64>,
    cov: Array2<f64>,
}

fn local_moments(a: &Array2<f64>, b: &Array2<f64>, kernel: &[f64]) -> LocalMoments {
    let mu_a = filter_valid(a, kernel);
    let mu_b = filter_valid(b, kernel);
    let var_a = filter_valid(&(a * a), kernel) - &mu_a * &mu_a;
    let var_b = filter_valid(&(b * b), kernel) - &mu_b * &mu_b;
    let cov = filter_valid(&(a * b), kernel) - &mu_a * &mu_b;
    LocalMoments {
        mu_a,
        mu_b,
        var_a,
        var_b,
        cov,
    }
}

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5).
pub fn ssim(a: &Array2<f64>, b: &Array2<f64>, data_range: f64) -> Result<f64> {
    check_shapes(a, b)?;
    let (rows, cols) = a.dim();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::TooShort(format!("{rows}x{cols} image, SSIM needs 11x11")));
    }
    let c1 = (0.01 * data_range).powi(2);
    let c2 = (0.03 * data_range).powi(2);
    let m = local_moments(a, b, &gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA));
    let mut total = 0.0;
    Zip::from(&m.mu_a)
        .and(&m.mu_b)
        .and(&m.var_a)
        .and(&m.var_b)
        .and(&m.cov)
        .for_each(|&ma, &mb, &va, &vb, &cv| {
            total += ((2.0 * ma * mb + c1) * (2.0 * cv + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        });
    Ok(total / m.mu_a.len() as f64)
}

fn vif_window(scale: u32) -> usize {
    (1usize << (VIF_SCALES - scale + 1)) + 1
}

fn pyramid_fits(mut size: usize) -> bool {
    for scale in 1..=VIF_SCALES {
        let n = vif_window(scale);
        if scale > 1 {
            if size < n {
                return false;
            }
            size = (size - n + 1).div_ceil(2);
        }
        if size < n {
            return false;
        }
    }
    true
}

/// Smallest square side that survives the four-scale pyramid.
pub fn vif_min_size() -> usize {
    (1..).find(|&s| pyramid_fits(s)).unwrap_or(usize::MAX)
}

/// Pixel-domain multiscale VIF of `distorted` against `reference`.
///
/// Four Gaussian-pyramid scales; at each, the local gain `g` and residual
/// variance of a GSM channel model give the information ratio
/// `sum log(1 + g^2 var_ref / (var_v + sn)) / sum log(1 + var_ref / sn)`.
pub fn vif(reference: &Array2<f64>, distorted: &Array2<f64>, data_range: f64) -> Result<f64> {
    check_shapes(reference, distorted)?;
    if !(data_range > 0.0) {
        return Err(Error::param("data_range", "must be positive"));
    }
    let to8 = 255.0 / data_range;
    let mut r = reference.mapv(|v| v * to8);
    let mut d = distorted.mapv(|v| v * to8);
    let eps = 1e-10;
    let (mut num, mut den) = (0.0, 0.0);

    for scale in 1..=VIF_SCALES {
        let n = vif_window(scale);
        let kernel = gaussian_kernel(n, n as f64 / 5.0);
        if scale > 1 {
            if r.nrows() < n || r.ncols() < n {
                return Err(too_small_for_vif(reference));
            }
            r = filter_valid(&r, &kernel).slice(s![..;2, ..;2]).to_owned();
            d = filter_valid(&d, &kernel).slice(s![..;2, ..;2]).to_owned();
        }
        if r.nrows() < n || r.ncols() < n {
            return Err(too_small_for_vif(reference));
        }
        let m = local_moments(&r, &d, &kernel);
        Zip::from(&m.var_a).and(&m.var_b).and(&m.cov).for_each(|&va, &vb, &cv| {
            let mut s1 = va.max(0.0);
            let s2 = vb.max(0.0);
            let mut g = cv / (s1 + eps);
            let mut sv = s2 - g * cv;
            if s1 < eps {
                g = 0.0;
                sv = s2;
                s1 = 0.0;
            }
            if s2 < eps {
                g = 0.0;
                sv = 0.0;
            }
            if g < 0.0 {
                sv = s2;
                g = 0.0;
            }
            let sv = sv.max(eps);
            num += (1.0 + g * g * s1 / (sv + VIF_NOISE_VAR)).log10();
            den += (1.0 + s1 / VIF_NOISE_VAR).log10();
        });
    }
    if den == 0.0 {
        // flat reference carries no information
        return Ok(if num == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(num / den)
}

fn too_small_for_vif(img: &Array2<f64>) -> Error {
    Error::TooShort(format!(
        "{}x{} image is too small for a {VIF_SCALES}-scale VIF pyramid",
        img.nrows(),
        img.ncols()
    ))
}

/// Pixel convention used when turning 16-bit images into metric planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PixelScale {
    /// Native 16-bit values, range 65535.
    #[default]
    Native16,
    /// Values rescaled to 8-bit, range 255.
    Eight,
}

impl PixelScale {
    pub fn data_range(self) -> f64 {
        match self {
            PixelScale::Native16 => 65535.0,
            PixelScale::Eight => 255.0,
        }
    }

    pub fn plane(self, image: &SpectrumImage) -> Array2<f64> {
        let luma = image.luma();
        match self {
            PixelScale::Native16 => luma,
            PixelScale::Eight => luma.mapv(|v| v * 255.0 / 65535.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ssim: f64,
    #[serde(with = "inf_as_string")]
    pub psnr_db: f64,
    pub mse: f64,
    pub vif: f64,
    pub pixel_count: usize,
}

pub fn compare_planes(reference: &Array2<f64>, distorted: &Array2<f64>, data_range: f64) -> Result<MetricsReport> {
    Ok(MetricsReport {
        ssim: ssim(reference, distorted, data_range)?,
        psnr_db: psnr(reference, distorted, data_range)?,
        mse: mse(reference, distorted)?,
        vif: vif(reference, distorted, data_range)?,
        pixel_count: reference.len(),
    })
}

pub fn compare_images(
    reference: &SpectrumImage,
    distorted: &SpectrumImage,
    scale: PixelScale,
) -> Result<MetricsReport> {
    compare_planes(&scale.plane(reference), &scale.plane(distorted), scale.data_range())
}

/// Serializes `+inf` as the string `"inf"` since JSON has no infinity.
pub(crate) mod inf_as_string {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("unexpected value {t}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn textured(size: usize) -> Array2<f64> {
        Array2::from_shape_fn((size, size), |(r, c)| {
            let x = r as f64 / 9.0;
            let y = c as f64 / 13.0;
            127.5 + 60.0 * x.sin() * y.cos() + 40.0 * ((r * c) as f64 / 200.0).sin()
        })
    }

    fn noisy(base: &Array2<f64>, sigma: f64, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, sigma).unwrap();
        base.mapv(|v| v + n.sample(&mut rng))
    }

    /// Direct 2D window sums, no separability.
    fn ssim_bruteforce(a: &Array2<f64>, b: &Array2<f64>, range: f64) -> f64 {
        let k = gaussian_kernel(11, 1.5);
        let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
        let (rows, cols) = a.dim();
        let mut total = 0.0;
        let mut count = 0.0;
        for r in 0..=rows - 11 {
            for c in 0..=cols - 11 {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let w = k[i] * k[j];
                        let (x, y) = (a[[r + i, c + j]], b[[r + i, c + j]]);
                        ma += w * x;
                        mb += w * y;
                        saa += w * x * x;
                        sbb += w * y * y;
                        sab += w * x * y;
                    }
                }
                let (va, vb, cv) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                total += ((2.0 * ma * mb + c1) * (2.0 * cv + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1.0;
            }
        }
        total / count
    }

    #[test]
    fn mse_and_psnr_closed_forms() {
        let a = textured(32);
        let b = a.mapv(|v| v + 1.0);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert!((mse(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
        assert!((psnr(&a, &b, 255.0).unwrap() - 48.1308).abs() < 1e-3);
        assert!((psnr(&a, &b, 65535.0).unwrap() - 96.3296).abs() < 1e-3);
        let c = Array2::zeros((3, 4));
        assert!(matches!(mse(&a, &c), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn ssim_matches_bruteforce() {
        let a = textured(40);
        let b = noisy(&a, 20.0, 4);
        let fast = ssim(&a, &b, 255.0).unwrap();
        let slow = ssim_bruteforce(&a, &b, 255.0);
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    }

    #[test]
    fn ssim_identities() {
        let a = textured(64);
        assert!((ssim(&a, &a, 255.0).unwrap() - 1.0).abs() < 1e-12);
        let inv = a.mapv(|v| 255.0 - v);
        assert!(ssim(&a, &inv, 255.0).unwrap() < 0.2);
        let b = noisy(&a, 10.0, 1);
        assert_eq!(ssim(&a, &b, 255.0).unwrap(), ssim(&b, &a, 255.0).unwrap());
        assert!(matches!(
            ssim(&textured(8), &textured(8), 255.0),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn one_pixel_shift_lowers_ssim() {
        let a = textured(64);
        let shifted = Array2::from_shape_fn((64, 64), |(r, c)| a[[r, c.saturating_sub(1)]]);
        assert!(ssim(&a, &shifted, 255.0).unwrap() < 1.0);
    }

    #[test]
    fn vif_identity_and_monotonicity() {
        let a = textured(128);
        assert!((vif(&a, &a, 255.0).unwrap() - 1.0).abs() < 1e-6);
        let weak = vif(&a, &noisy(&a, 5.0, 2), 255.0).unwrap();
        let strong = vif(&a, &noisy(&a, 40.0, 2), 255.0).unwrap();
        assert!(strong < weak && weak < 1.0 && strong >= 0.0);
    }

    #[test]
    fn vif_is_asymmetric() {
        let a = textured(96);
        let b = noisy(&a, 25.0, 6);
        let ab = vif(&a, &b, 255.0).unwrap();
        let ba = vif(&b, &a, 255.0).unwrap();
        assert!((ab - ba).abs() > 1e-3);
    }

    #[test]
    fn vif_scale_convention() {
        let a = textured(64);
        let b = noisy(&a, 15.0, 9);
        let eight = vif(&a, &b, 255.0).unwrap();
        let sixteen = vif(&a.mapv(|v| v * 257.0), &b.mapv(|v| v * 257.0), 65535.0).unwrap();
        assert!((eight - sixteen).abs() < 1e-9);
    }

    #[test]
    fn vif_size_limits() {
        let min = vif_min_size();
        let ok = textured(min);
        assert!(vif(&ok, &ok, 255.0).is_ok());
        let small = textured(min - 1);
        assert!(matches!(vif(&small, &small, 255.0), Err(Error::TooShort(_))));
    }

    #[test]
    fn report_serializes_infinite_psnr() {
        let a = textured(64);
        let report = compare_planes(&a, &a, 255.0).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"psnr_db\":\"inf\""));
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.psnr_db, f64::INFINITY);
    }

    #[test]
    fn random_pairs_reasonable() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = Array2::from_shape_fn((48, 48), |_| rng.random_range(0.0..255.0));
        let b = Array2::from_shape_fn((48, 48), |_| rng.random_range(0.0..255.0));
        let s = ssim(&a, &b, 255.0).unwrap();
        assert!(s.abs() < 0.2);
    }
}

//! Additive white Gaussian noise on dB spectrograms and residual analysis.
//!
//! SNR is the ratio of the clean dB-image variance to the noise variance:
//! `sigma = sqrt(var(values_db) / 10^(snr/10))`.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrogram::Spectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// `+inf` means no noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::param("snr_db", format!("must be finite or +inf, got {snr_db}")));
        }
        Ok(Self { snr_db, seed })
    }
}

/// Derives an independent RNG seed for one work item, e.g. `(seed, subject, gait, level)`.
pub fn stream_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix(base);
    for &p in parts {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn variance(values: &Array2<f64>) -> f64 {
    let n = values.len() as f64;
    let mean = values.sum() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

pub fn sigma_for_snr_values(values: &Array2<f64>, snr_db: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Degenerate("empty slice".into()));
    }
    let var = variance(values);
    if !(var > 0.0) {
        return Err(Error::Degenerate("constant slice has zero variance".into()));
    }
    Ok((var / 10f64.powf(snr_db / 10.0)).sqrt())
}

pub fn sigma_for_snr(slice: &Spectrogram, snr_db: f64) -> Result<f64> {
    sigma_for_snr_values(&slice.values_db, snr_db)
}

/// Noisy copy of `slice` without the final clamp.
pub fn add_awgn_unclamped(slice: &Spectrogram, spec: &NoiseSpec) -> Result<Spectrogram> {
    let sigma = sigma_for_snr(slice, spec.snr_db)?;
    let mut out = slice.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for v in out.values_db.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * z;
    }
    Ok(out)
}

/// Adds i.i.d. Gaussian noise to the dB values and clamps back into `[-R, 0]`.
pub fn add_awgn(slice: &Spectrogram, spec: &NoiseSpec) -> Result<Spectrogram> {
    let range = slice.dynamic_range_db.ok_or(Error::NotNormalized)?;
    let mut out = add_awgn_unclamped(slice, spec)?;
    out.values_db.mapv_inplace(|v| v.clamp(-range, 0.0));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub pixel_count: usize,
    pub mean_db: f64,
    pub std_db: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Moment accumulator over residual values; merges associatively.
#[derive(Debug, Clone, Default)]
pub struct ResidualAccumulator {
    values: Vec<f64>,
}

impl ResidualAccumulator {
    pub fn push_pair(&mut self, noisy: &Array2<f64>, clean: &Array2<f64>) -> Result<()> {
        if noisy.dim() != clean.dim() {
            return Err(Error::ShapeMismatch {
                left: noisy.dim(),
                right: clean.dim(),
            });
        }
        self.values.extend(noisy.iter().zip(clean).map(|(a, b)| a - b));
        Ok(())
    }

    pub fn finish(&self, bins: usize) -> Result<ResidualStats> {
        summarize(&self.values, bins)
    }
}

pub fn residual_stats(noisy: &Spectrogram, clean: &Spectrogram, bins: usize) -> Result<ResidualStats> {
    let mut acc = ResidualAccumulator::default();
    acc.push_pair(&noisy.values_db, &clean.values_db)?;
    acc.finish(bins)
}

fn summarize(values: &[f64], bins: usize) -> Result<ResidualStats> {
    if bins == 0 {
        return Err(Error::param("bins", "must be >= 1"));
    }
    if values.is_empty() {
        return Err(Error::Degenerate("no residual values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };

    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (bin_edges, counts) = if hi > lo {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        (edges, counts)
    } else {
        (vec![lo, hi], vec![values.len() as u64])
    };

    Ok(ResidualStats {
        bin_edges,
        counts,
        pixel_count: values.len(),
        mean_db: mean,
        std_db: std,
        skewness,
        excess_kurtosis,
    })
}

/// Normalized autocorrelation of a residual field at `lag` along `axis` (0 = rows, 1 = columns).
pub fn lag_autocorrelation(residual: &Array2<f64>, lag: usize, axis: usize) -> f64 {
    let mean = residual.mean().unwrap_or(0.0);
    let centered = residual.mapv(|v| v - mean);
    let var = centered.iter().map(|v| v * v).sum::<f64>();
    if var == 0.0 {
        return 0.0;
    }
    let len = centered.len_of(Axis(axis));
    if lag >= len {
        return 0.0;
    }
    let head = centered.slice_axis(Axis(axis), (0..len - lag).into());
    let tail = centered.slice_axis(Axis(axis), (lag..len).into());
    let cross: f64 = head.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
    cross / var
}

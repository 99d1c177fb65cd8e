//! Classical baselines: 2D cell-averaging CFAR gating and gamma correction.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrogram::{Spectrogram, SpectrumImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarParams {
    /// Guard half-width per axis, `[rows, cols]`.
    pub guard_cells: [usize; 2],
    /// Training band width per axis beyond the guard ring, `[rows, cols]`.
    pub training_cells: [usize; 2],
    pub pfa: f64,
    /// Value written into rejected cells.
    pub floor_db: f64,
}

impl CfarParams {
    pub fn new(guard: usize, training: usize, pfa: f64, floor_db: f64) -> Result<Self> {
        let p = Self {
            guard_cells: [guard, guard],
            training_cells: [training, training],
            pfa,
            floor_db,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.training_cells.contains(&0) {
            return Err(Error::param("training_cells", "training band must be non-empty"));
        }
        check_pfa(self.pfa)?;
        if !self.floor_db.is_finite() {
            return Err(Error::param("floor_db", "must be finite"));
        }
        Ok(())
    }

    fn window(&self, axis: usize) -> usize {
        2 * (self.guard_cells[axis] + self.training_cells[axis]) + 1
    }
}

impl Default for CfarParams {
    fn default() -> Self {
        Self {
            guard_cells: [2, 2],
            training_cells: [4, 4],
            pfa: 1e-2,
            floor_db: -45.0,
        }
    }
}

fn check_pfa(pfa: f64) -> Result<()> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::param("pfa", format!("must lie in (0, 1), got {pfa}")));
    }
    Ok(())
}

/// CA-CFAR scale `alpha = n (pfa^(-1/n) - 1)` for exponentially distributed power.
pub fn cfar_threshold_factor(n_training: usize, pfa: f64) -> Result<f64> {
    if n_training == 0 {
        return Err(Error::param("n_training", "must be >= 1"));
    }
    check_pfa(pfa)?;
    let n = n_training as f64;
    Ok(n * (pfa.powf(-1.0 / n) - 1.0))
}

struct SummedArea {
    table: Array2<f64>,
}

impl SummedArea {
    fn new(values: &Array2<f64>) -> Self {
        let (rows, cols) = values.dim();
        let mut table = Array2::<f64>::zeros((rows + 1, cols + 1));
        for r in 0..rows {
            let mut row_sum = 0.0;
            for c in 0..cols {
                row_sum += values[[r, c]];
                table[[r + 1, c + 1]] = table[[r, c + 1]] + row_sum;
            }
        }
        Self { table }
    }

    /// Sum over rows `r0..r1` and cols `c0..c1` (half open).
    fn sum(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        self.table[[r1, c1]] - self.table[[r0, c1]] - self.table[[r1, c0]] + self.table[[r0, c0]]
    }
}

fn clipped(center: usize, half: usize, len: usize) -> (usize, usize) {
    (center.saturating_sub(half), (center + half + 1).min(len))
}

/// Detection mask over a linear power map. Near the borders the training
/// ring is truncated and `alpha` recomputed for the cells actually used.
pub fn ca_cfar_2d_power(power: &Array2<f64>, params: &CfarParams) -> Result<Array2<bool>> {
    params.validate()?;
    let (rows, cols) = power.dim();
    if rows < params.window(0) || cols < params.window(1) {
        return Err(Error::TooShort(format!(
            "{rows}x{cols} input is smaller than the {}x{} CFAR window",
            params.window(0),
            params.window(1)
        )));
    }
    let sat = SummedArea::new(power);
    let [gr, gc] = params.guard_cells;
    let (hr, hc) = (gr + params.training_cells[0], gc + params.training_cells[1]);
    let mut alphas = vec![f64::NAN; params.window(0) * params.window(1) + 1];

    let mut mask = Array2::from_elem((rows, cols), false);
    for r in 0..rows {
        let (or0, or1) = clipped(r, hr, rows);
        let (ir0, ir1) = clipped(r, gr, rows);
        for c in 0..cols {
            let (oc0, oc1) = clipped(c, hc, cols);
            let (ic0, ic1) = clipped(c, gc, cols);
            let count = (or1 - or0) * (oc1 - oc0) - (ir1 - ir0) * (ic1 - ic0);
            let sum = (sat.sum(or0, or1, oc0, oc1) - sat.sum(ir0, ir1, ic0, ic1)).max(0.0);
            let alpha = &mut alphas[count];
            if alpha.is_nan() {
                *alpha = cfar_threshold_factor(count, params.pfa)?;
            }
            mask[[r, c]] = power[[r, c]] > *alpha * sum / count as f64;
        }
    }
    Ok(mask)
}

/// CFAR on a dB slice, evaluated on linear power `10^(dB/10)`.
pub fn ca_cfar_2d(slice: &Spectrogram, params: &CfarParams) -> Result<Array2<bool>> {
    let power = slice.values_db.mapv(|v| 10f64.powf(v / 10.0));
    ca_cfar_2d_power(&power, params)
}

/// Keeps detected cells and fills everything else with `floor_db`.
pub fn apply_cfar(slice: &Spectrogram, params: &CfarParams) -> Result<Spectrogram> {
    let mask = ca_cfar_2d(slice, params)?;
    Ok(gate(slice, &mask, params.floor_db))
}

pub fn gate(slice: &Spectrogram, mask: &Array2<bool>, floor_db: f64) -> Spectrogram {
    let mut out = slice.clone();
    out.values_db.zip_mut_with(mask, |v, &keep| {
        if !keep {
            *v = floor_db;
        }
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub gamma: f64,
}

impl GammaParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

/// Identity correction.
impl Default for GammaParams {
    fn default() -> Self {
        Self { gamma: 1.0 }
    }
}

/// Pointwise `I -> I^gamma` on intensities normalized to [0, 1].
pub trait GammaCorrect: Sized {
    fn gamma_correct(&self, params: &GammaParams) -> Result<Self>;
}

pub fn gamma_correct<T: GammaCorrect>(input: &T, params: &GammaParams) -> Result<T> {
    input.gamma_correct(params)
}

impl GammaCorrect for SpectrumImage {
    fn gamma_correct(&self, params: &GammaParams) -> Result<Self> {
        GammaParams::new(params.gamma)?;
        if params.gamma == 1.0 {
            return Ok(self.clone());
        }
        let lut: Vec<u16> = (0..=u16::MAX)
            .map(|p| ((f64::from(p) / 65535.0).powf(params.gamma) * 65535.0).round() as u16)
            .collect();
        Ok(self.map_pixels(|p| lut[p as usize]))
    }
}

impl GammaCorrect for Spectrogram {
    /// dB range `[-R, 0]` is mapped linearly onto [0, 1] and back.
    fn gamma_correct(&self, params: &GammaParams) -> Result<Self> {
        GammaParams::new(params.gamma)?;
        let range = self.dynamic_range_db.ok_or(Error::NotNormalized)?;
        let mut out = self.clone();
        out.values_db.mapv_inplace(|v| {
            let i = ((v + range) / range).clamp(0.0, 1.0);
            i.powf(params.gamma) * range - range
        });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::RadarConfig;
    use crate::spectrogram::normalize_gait;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exponential_field(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            -u.ln()
        })
    }

    #[test]
    fn threshold_factor_values() {
        let a = cfar_threshold_factor(16, 1e-3).unwrap();
        assert!((a - 8.639).abs() < 1e-3, "{a}");
        let asym = cfar_threshold_factor(4096, 1e-3).unwrap();
        let limit = (1e3f64).ln();
        assert!((asym - limit).abs() / limit < 2e-3);
        assert!(cfar_threshold_factor(16, 1.0).is_err());
        assert!(cfar_threshold_factor(16, 0.0).is_err());
        assert!(cfar_threshold_factor(0, 0.1).is_err());
    }

    #[test]
    fn threshold_factor_matches_monte_carlo() {
        // P(X > alpha * mean of n i.i.d. Exp(1)) estimated by direct simulation.
        let (n, pfa) = (16usize, 1e-2);
        let alpha = cfar_threshold_factor(n, pfa).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut exp = || -rng.random_range(f64::EPSILON..1.0f64).ln();
        let trials = 400_000;
        let mut hits = 0;
        for _ in 0..trials {
            let mean: f64 = (0..n).map(|_| exp()).sum::<f64>() / n as f64;
            if exp() > alpha * mean {
                hits += 1;
            }
        }
        let rate = hits as f64 / trials as f64;
        assert!((rate - pfa).abs() < 0.1 * pfa, "{rate}");
    }

    #[test]
    fn false_alarm_rate_on_exponential_noise() {
        let power = exponential_field(1024, 1024, 3);
        let params = CfarParams::new(1, 3, 1e-2, -45.0).unwrap();
        let mask = ca_cfar_2d_power(&power, &params).unwrap();
        let rate = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
        assert!(rate > 0.5e-2 && rate < 2e-2, "{rate}");
    }

    #[test]
    fn point_target_detected_without_neighbour_masking() {
        let mut power = exponential_field(64, 64, 8);
        power[[32, 32]] = 1000.0;
        let params = CfarParams::new(2, 4, 1e-3, -45.0).unwrap();
        let mask = ca_cfar_2d_power(&power, &params).unwrap();
        assert!(mask[[32, 32]]);
        // The target sits inside the guard ring of its immediate neighbours,
        // so their thresholds are not inflated by it.
        let baseline = ca_cfar_2d_power(&exponential_field(64, 64, 8), &params).unwrap();
        for (dr, dc) in [(0, 1), (1, 0), (1, 1), (2, 2)] {
            assert_eq!(mask[[32 + dr, 32 + dc]], baseline[[32 + dr, 32 + dc]]);
        }
    }

    #[test]
    fn flat_slice_gives_no_detections() {
        let slice = Spectrogram::from_values(Array2::from_elem((64, 64), -45.0), RadarConfig::default());
        let mask = ca_cfar_2d(&slice, &CfarParams::default()).unwrap();
        assert!(mask.iter().all(|&m| !m));
        assert_eq!(mask.dim(), (64, 64));
    }

    #[test]
    fn window_too_large() {
        let slice = Spectrogram::from_values(Array2::zeros((10, 64)), RadarConfig::default());
        assert!(matches!(
            ca_cfar_2d(&slice, &CfarParams::default()),
            Err(Error::TooShort(_))
        ));
        assert!(CfarParams::new(2, 0, 0.1, -45.0).is_err());
        assert!(CfarParams::new(2, 2, 1.5, -45.0).is_err());
    }

    #[test]
    fn gating_extremes() {
        let values = Array2::from_shape_fn((16, 16), |(r, c)| -((r + c) as f64));
        let slice = Spectrogram::from_values(values, RadarConfig::default());
        assert_eq!(gate(&slice, &Array2::from_elem((16, 16), true), -45.0), slice);
        let floor = gate(&slice, &Array2::from_elem((16, 16), false), -45.0);
        assert!(floor.values_db.iter().all(|&v| v == -45.0));
    }

    #[test]
    fn gamma_on_slice() {
        let values = Array2::from_shape_fn((8, 8), |(r, c)| -((r * 8 + c) as f64 % 45.0));
        let slice = normalize_gait(&Spectrogram::from_values(values, RadarConfig::default()), 45.0).unwrap();
        let same = gamma_correct(&slice, &GammaParams::new(1.0).unwrap()).unwrap();
        for (a, b) in same.values_db.iter().zip(slice.values_db.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let two = GammaParams::new(2.0).unwrap();
        let twice = gamma_correct(&gamma_correct(&slice, &two).unwrap(), &two).unwrap();
        let four = gamma_correct(&slice, &GammaParams::new(4.0).unwrap()).unwrap();
        for (a, b) in twice.values_db.iter().zip(four.values_db.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        // I = 0.25 maps to 0.0625
        let mut q = slice.clone();
        q.values_db[[0, 0]] = 0.25 * 45.0 - 45.0;
        let out = gamma_correct(&q, &two).unwrap();
        assert!(((out.values_db[[0, 0]] + 45.0) / 45.0 - 0.0625).abs() < 1e-12);
        assert!(GammaParams::new(0.0).is_err());
        assert!(GammaParams::new(-1.0).is_err());
    }

    #[test]
    fn gamma_identity_on_image_is_exact() {
        let plane = Array2::from_shape_fn((32, 32), |(r, c)| (r * 2000 + c * 17) as u16);
        let img = SpectrumImage::from_gray(&plane);
        let out = gamma_correct(&img, &GammaParams { gamma: 1.0 }).unwrap();
        assert_eq!(out, img);
        let squared = gamma_correct(&img, &GammaParams { gamma: 2.0 }).unwrap();
        assert!(squared.pixels().iter().zip(img.pixels()).all(|(a, b)| a <= b));
    }

    proptest! {
        #[test]
        fn cfar_scale_invariant(seed in 0u64..1000, exponent in -8i32..8) {
            let power = exponential_field(40, 48, seed);
            let params = CfarParams::new(1, 3, 1e-2, -45.0).unwrap();
            let scaled = power.mapv(|p| p * 2f64.powi(exponent));
            prop_assert_eq!(
                ca_cfar_2d_power(&power, &params).unwrap(),
                ca_cfar_2d_power(&scaled, &params).unwrap()
            );
        }

        #[test]
        fn gamma_monotone(a in 0u16.., b in 0u16.., gamma in 0.05f64..8.0) {
            let img = SpectrumImage::from_rgb(2, 1, vec![a, a, a, b, b, b]).unwrap();
            let out = gamma_correct(&img, &GammaParams::new(gamma).unwrap()).unwrap();
            let (x, y) = (out.pixels()[0], out.pixels()[3]);
            if a < b { prop_assert!(x <= y); }
            if a > b { prop_assert!(x >= y); }
        }
    }
}

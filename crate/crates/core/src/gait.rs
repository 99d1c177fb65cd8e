//! Point-scatterer model of a treadmill-walking human and its complex
//! baseband radar return.
//!
//! Velocities are radial and expressed in the treadmill frame, so the torso
//! sits at 0 m/s. Each swinging limb produces a half-sinusoid velocity pulse
//! once per full gait cycle; left and right limbs are offset by half a cycle.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::RadarConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    /// Constant radial velocity `peak_velocity_m_s` at all times.
    Rigid,
    /// Half-sinusoid swing pulse followed by stance at 0 m/s.
    Swing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    #[serde(default)]
    pub name: String,
    pub motion: Motion,
    /// Relative RCS weight.
    pub amplitude: f64,
    pub peak_velocity_m_s: f64,
    /// Where in the full gait cycle the swing starts, in radians (pi = one half gait).
    #[serde(default)]
    pub phase_rad: f64,
    /// Swing length as a fraction of one half gait.
    #[serde(default = "default_duty")]
    pub duty: f64,
}

/// Observed half-gait durations at 1.4-1.6 m/s treadmill speed.
pub const HALF_GAIT_RANGE_S: [f64; 2] = [0.4, 0.6];

fn default_duty() -> f64 {
    0.7
}

impl Scatterer {
    pub fn rigid(name: &str, amplitude: f64, velocity_m_s: f64) -> Self {
        Self {
            name: name.to_owned(),
            motion: Motion::Rigid,
            amplitude,
            peak_velocity_m_s: velocity_m_s,
            phase_rad: 0.0,
            duty: 1.0,
        }
    }

    pub fn swing(name: &str, amplitude: f64, peak_velocity_m_s: f64, phase_rad: f64, duty: f64) -> Self {
        Self {
            name: name.to_owned(),
            motion: Motion::Swing,
            amplitude,
            peak_velocity_m_s,
            phase_rad,
            duty,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::param(
                "amplitude",
                format!("scatterer {index}: must be finite and >= 0, got {}", self.amplitude),
            ));
        }
        if !self.peak_velocity_m_s.is_finite() || !self.phase_rad.is_finite() {
            return Err(Error::param(
                "scatterer",
                format!("scatterer {index}: non-finite parameter"),
            ));
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(Error::param(
                "duty",
                format!("scatterer {index}: must lie in (0, 1], got {}", self.duty),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitProfile {
    pub treadmill_speed_m_s: f64,
    pub half_gait_duration_s: f64,
    /// Global shift of every swing, in radians of the full cycle.
    #[serde(default)]
    pub phase_offset_rad: f64,
    pub scatterers: Vec<Scatterer>,
}

impl GaitProfile {
    /// Seven-scatterer walker: torso, arms, upper legs and feet.
    ///
    /// The left leg swings during the first half gait, the right leg during
    /// the second; arms counter-swing with the contralateral leg.
    pub fn default_walker(treadmill_speed_m_s: f64, half_gait_duration_s: f64) -> Self {
        let v = treadmill_speed_m_s;
        let duty = default_duty();
        let scatterers = vec![
            Scatterer::rigid("torso", 1.0, 0.0),
            Scatterer::swing("left_arm", 0.3, -1.6 * v, PI, duty),
            Scatterer::swing("right_arm", 0.3, -1.6 * v, 0.0, duty),
            Scatterer::swing("left_upper_leg", 0.4, 1.8 * v, 0.0, duty),
            Scatterer::swing("right_upper_leg", 0.4, 1.8 * v, PI, duty),
            Scatterer::swing("left_foot", 0.25, 2.8 * v, 0.0, duty),
            Scatterer::swing("right_foot", 0.25, 2.8 * v, PI, duty),
        ];
        Self {
            treadmill_speed_m_s,
            half_gait_duration_s,
            phase_offset_rad: 0.0,
            scatterers,
        }
    }

    /// Draws a jittered subject from the default walker with treadmill
    /// speed in [1.4, 1.6] m/s.
    pub fn random_subject<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let speed = rng.random_range(1.4..=1.6);
        Self::default_walker(speed, 0.5).jittered(rng, HALF_GAIT_RANGE_S)
    }

    /// Per-subject variation: half gait redrawn uniformly from
    /// `half_gait_range_s`, amplitudes scaled by +-10% and peak velocities by +-15%.
    pub fn jittered<R: Rng + ?Sized>(&self, rng: &mut R, half_gait_range_s: [f64; 2]) -> Self {
        let mut profile = self.clone();
        let [lo, hi] = half_gait_range_s;
        profile.half_gait_duration_s = rng.random_range(lo..=hi);
        for s in &mut profile.scatterers {
            s.amplitude *= rng.random_range(0.9..=1.1);
            s.peak_velocity_m_s *= rng.random_range(0.85..=1.15);
        }
        profile
    }

    pub fn gait_period_s(&self) -> f64 {
        2.0 * self.half_gait_duration_s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_gait_duration_s.is_finite() && self.half_gait_duration_s > 0.0) {
            return Err(Error::param(
                "half_gait_duration_s",
                format!("must be positive, got {}", self.half_gait_duration_s),
            ));
        }
        if self.scatterers.is_empty() {
            return Err(Error::param("scatterers", "profile needs at least one scatterer"));
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            s.validate(i)?;
        }
        Ok(())
    }

    /// Rejects any scatterer whose speed would alias at this radar's PRF.
    pub fn check_aliasing(&self, config: &RadarConfig) -> Result<()> {
        let limit = config.max_velocity();
        for (index, s) in self.scatterers.iter().enumerate() {
            if s.peak_velocity_m_s.abs() > limit {
                return Err(Error::Aliasing {
                    index,
                    velocity: s.peak_velocity_m_s,
                    limit,
                });
            }
        }
        Ok(())
    }

    pub fn load_toml(text: &str) -> Result<Self> {
        let profile: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }
}

/// Instantaneous radial velocity of one scatterer at time `t`.
pub fn limb_velocity_profile(profile: &GaitProfile, scatterer_index: usize, t: f64) -> Result<f64> {
    let s = profile.scatterers.get(scatterer_index).ok_or(Error::IndexOutOfRange {
        index: scatterer_index,
        len: profile.scatterers.len(),
    })?;
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be >= 0, got {t}")));
    }
    Ok(velocity_at(profile, s, t))
}

fn velocity_at(profile: &GaitProfile, s: &Scatterer, t: f64) -> f64 {
    match s.motion {
        Motion::Rigid => s.peak_velocity_m_s,
        Motion::Swing => {
            let period = profile.gait_period_s();
            let start = (s.phase_rad + profile.phase_offset_rad) / TAU * period;
            let tau = (t - start).rem_euclid(period);
            let swing = s.duty * profile.half_gait_duration_s;
            if tau < swing {
                s.peak_velocity_m_s * (PI * tau / swing).sin()
            } else {
                0.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl BasebandSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// Superposition of all scatterer returns sampled at the PRF.
///
/// Each return has phase `(4 pi / lambda) * integral(v) + phi`, with the
/// integral taken by a compensated cumulative trapezoid. The seed draws the
/// per-scatterer carrier phase `phi` uniformly from [0, 2 pi).
pub fn synthesize_baseband(
    profile: &GaitProfile,
    config: &RadarConfig,
    duration_s: f64,
    seed: u64,
) -> Result<BasebandSignal> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::param(
            "duration_s",
            format!("must be positive, got {duration_s}"),
        ));
    }
    profile.validate()?;
    profile.check_aliasing(config)?;

    let fs = config.pulse_repetition_hz();
    let n = (duration_s * fs).round() as usize;
    let k = 4.0 * PI / config.wavelength_m();
    let dt = 1.0 / fs;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![Complex64::new(0.0, 0.0); n];

    for s in &profile.scatterers {
        let carrier_phase: f64 = rng.random_range(0.0..TAU);
        if s.amplitude == 0.0 || n == 0 {
            continue;
        }
        // Neumaier-compensated running integral of velocity.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut prev_v = velocity_at(profile, s, 0.0);
        for (i, out) in samples.iter_mut().enumerate() {
            if i > 0 {
                let v = velocity_at(profile, s, i as f64 * dt);
                let step = 0.5 * (prev_v + v) * dt;
                let t = sum + step;
                if sum.abs() >= step.abs() {
                    comp += (sum - t) + step;
                } else {
                    comp += (step - t) + sum;
                }
                sum = t;
                prev_v = v;
            }
            let phase = (k * (sum + comp)).rem_euclid(TAU) + carrier_phase;
            *out += Complex64::from_polar(s.amplitude, phase);
        }
    }

    Ok(BasebandSignal {
        samples,
        sample_rate_hz: fs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walker() -> GaitProfile {
        GaitProfile::default_walker(1.5, 0.5)
    }

    #[test]
    fn torso_is_stationary() {
        let p = walker();
        for i in 0..50 {
            assert_eq!(limb_velocity_profile(&p, 0, i as f64 * 0.037).unwrap(), 0.0);
        }
    }

    #[test]
    fn foot_reaches_peak_at_mid_swing() {
        let p = walker();
        let foot = 5;
        let mid = 0.5 * p.scatterers[foot].duty * p.half_gait_duration_s;
        let v = limb_velocity_profile(&p, foot, mid).unwrap();
        assert_eq!(v, p.scatterers[foot].peak_velocity_m_s);
    }

    #[test]
    fn swing_is_periodic() {
        let p = walker();
        for i in 0..40 {
            let t = i as f64 * 0.0271;
            let a = limb_velocity_profile(&p, 5, t).unwrap();
            let b = limb_velocity_profile(&p, 5, t + p.gait_period_s()).unwrap();
            assert!((a - b).abs() < 1e-9, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn left_and_right_offset_by_half_gait() {
        let p = walker();
        for i in 0..40 {
            let t = i as f64 * 0.0213;
            let left = limb_velocity_profile(&p, 5, t).unwrap();
            let right = limb_velocity_profile(&p, 6, t + p.half_gait_duration_s).unwrap();
            assert!((left - right).abs() < 1e-9);
        }
    }

    #[test]
    fn stance_is_zero() {
        let p = walker();
        let swing_end = p.scatterers[5].duty * p.half_gait_duration_s;
        assert_eq!(limb_velocity_profile(&p, 5, swing_end + 0.01).unwrap(), 0.0);
    }

    #[test]
    fn index_out_of_range() {
        let p = walker();
        assert!(matches!(
            limb_velocity_profile(&p, 7, 0.0),
            Err(Error::IndexOutOfRange { index: 7, len: 7 })
        ));
    }

    #[test]
    fn aliasing_rejected() {
        let mut p = walker();
        p.scatterers.push(Scatterer::rigid("fast", 1.0, 12.5));
        let err = synthesize_baseband(&p, &RadarConfig::default(), 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::Aliasing { index: 7, .. }));
    }

    #[test]
    fn zero_amplitude_gives_silence() {
        let mut p = walker();
        for s in &mut p.scatterers {
            s.amplitude = 0.0;
        }
        let sig = synthesize_baseband(&p, &RadarConfig::default(), 0.5, 3).unwrap();
        assert_eq!(sig.len(), 2000);
        assert!(sig.samples.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn length_is_rounded_duration() {
        let sig = synthesize_baseband(&walker(), &RadarConfig::default(), 0.30012, 1).unwrap();
        assert_eq!(sig.len(), 1200);
    }

    #[test]
    fn constant_velocity_is_pure_tone() {
        let radar = RadarConfig::default();
        let p = GaitProfile {
            treadmill_speed_m_s: 1.5,
            half_gait_duration_s: 0.5,
            phase_offset_rad: 0.0,
            scatterers: vec![Scatterer::rigid("target", 1.0, 3.0)],
        };
        let sig = synthesize_baseband(&p, &radar, 0.25, 9).unwrap();
        let fd = radar.doppler_hz(3.0);
        let step = Complex64::from_polar(1.0, TAU * fd / radar.pulse_repetition_hz());
        for w in sig.samples.windows(2) {
            assert!((w[1] - w[0] * step).norm() < 1e-9);
        }
    }

    #[test]
    fn phase_linear_for_constant_velocity() {
        let radar = RadarConfig::default();
        let v = 4.2;
        let p = GaitProfile {
            treadmill_speed_m_s: 1.5,
            half_gait_duration_s: 0.5,
            phase_offset_rad: 0.0,
            scatterers: vec![Scatterer::rigid("target", 1.0, v)],
        };
        let sig = synthesize_baseband(&p, &radar, 1.0, 5).unwrap();
        let slope = TAU * radar.doppler_hz(v) / radar.pulse_repetition_hz();
        let mut unwrapped = sig.samples[0].arg();
        let phi0 = unwrapped;
        let mut max_dev = 0.0f64;
        for (n, w) in sig.samples.windows(2).enumerate() {
            let mut d = w[1].arg() - w[0].arg();
            d -= TAU * (d / TAU).round();
            unwrapped += d;
            let expected = phi0 + slope * (n + 1) as f64;
            max_dev = max_dev.max((unwrapped - expected).abs());
        }
        assert!(max_dev < 1e-9, "max deviation {max_dev}");
    }

    #[test]
    fn superposition_of_disjoint_sets() {
        let radar = RadarConfig::default();
        let full = walker();
        // Carrier phases are drawn in scatterer order, so split while
        // preserving each subset's draws through zero-amplitude placeholders.
        let mut a = full.clone();
        let mut b = full.clone();
        for (i, s) in a.scatterers.iter_mut().enumerate() {
            if i % 2 == 1 {
                s.amplitude = 0.0;
            }
        }
        for (i, s) in b.scatterers.iter_mut().enumerate() {
            if i % 2 == 0 {
                s.amplitude = 0.0;
            }
        }
        let x = synthesize_baseband(&full, &radar, 0.5, 11).unwrap();
        let xa = synthesize_baseband(&a, &radar, 0.5, 11).unwrap();
        let xb = synthesize_baseband(&b, &radar, 0.5, 11).unwrap();
        for ((s, sa), sb) in x.samples.iter().zip(&xa.samples).zip(&xb.samples) {
            assert!((s - (sa + sb)).norm() < 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let radar = RadarConfig::default();
        let a = synthesize_baseband(&walker(), &radar, 0.7, 42).unwrap();
        let b = synthesize_baseband(&walker(), &radar, 0.7, 42).unwrap();
        assert_eq!(a, b);
        let c = synthesize_baseband(&walker(), &radar, 0.7, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_subjects_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let radar = RadarConfig::default();
        for _ in 0..100 {
            let p = GaitProfile::random_subject(&mut rng);
            assert!((0.4..=0.6).contains(&p.half_gait_duration_s));
            assert!((1.4..=1.6).contains(&p.treadmill_speed_m_s));
            p.validate().unwrap();
            p.check_aliasing(&radar).unwrap();
        }
    }

    #[test]
    fn profile_toml_round_trip() {
        let p = walker();
        let text = toml::to_string(&p).unwrap();
        assert_eq!(GaitProfile::load_toml(&text).unwrap(), p);
        assert!(
            GaitProfile::load_toml("treadmill_speed_m_s = 1.5\nhalf_gait_duration_s = 0.5\nscatterers = []").is_err()
        );
    }
}

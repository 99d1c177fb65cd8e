//! CW radar parametrization and the velocity limits derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed used for wavelength computation.
///
/// The rounded value keeps the nominal 25 GHz / 4 kHz setup at exactly
/// 12 m/s unambiguous velocity.
pub const SPEED_OF_LIGHT_M_S: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRadarConfig", into = "RawRadarConfig")]
pub struct RadarConfig {
    carrier_frequency_hz: f64,
    pulse_repetition_hz: f64,
    speed_of_light_m_s: f64,
}

impl RadarConfig {
    pub fn new(carrier_frequency_hz: f64, pulse_repetition_hz: f64) -> Result<Self> {
        Self::with_speed_of_light(carrier_frequency_hz, pulse_repetition_hz, SPEED_OF_LIGHT_M_S)
    }

    pub fn with_speed_of_light(
        carrier_frequency_hz: f64,
        pulse_repetition_hz: f64,
        speed_of_light_m_s: f64,
    ) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(carrier_frequency_hz) {
            return Err(Error::InvalidRadar(format!(
                "carrier frequency must be positive, got {carrier_frequency_hz}"
            )));
        }
        if !positive(pulse_repetition_hz) {
            return Err(Error::InvalidRadar(format!(
                "pulse repetition frequency must be positive, got {pulse_repetition_hz}"
            )));
        }
        if !positive(speed_of_light_m_s) {
            return Err(Error::InvalidRadar(format!(
                "speed of light must be positive, got {speed_of_light_m_s}"
            )));
        }
        Ok(Self {
            carrier_frequency_hz,
            pulse_repetition_hz,
            speed_of_light_m_s,
        })
    }

    pub fn carrier_frequency_hz(&self) -> f64 {
        self.carrier_frequency_hz
    }

    pub fn pulse_repetition_hz(&self) -> f64 {
        self.pulse_repetition_hz
    }

    pub fn speed_of_light_m_s(&self) -> f64 {
        self.speed_of_light_m_s
    }

    pub fn wavelength_m(&self) -> f64 {
        self.speed_of_light_m_s / self.carrier_frequency_hz
    }

    /// Doppler shift in Hz produced by a radial velocity.
    pub fn doppler_hz(&self, velocity_m_s: f64) -> f64 {
        2.0 * velocity_m_s / self.wavelength_m()
    }

    /// Radial velocity corresponding to a Doppler shift in Hz.
    pub fn velocity_for_doppler(&self, doppler_hz: f64) -> f64 {
        doppler_hz * self.wavelength_m() / 2.0
    }

    /// Unambiguous velocity `(F_p / 2) * lambda / 2`.
    pub fn max_velocity(&self) -> f64 {
        self.pulse_repetition_hz / 2.0 * self.wavelength_m() / 2.0
    }

    /// Width of one DFT bin in velocity units for a window of `window_len` samples.
    pub fn velocity_resolution(&self, window_len: usize) -> Result<f64> {
        if window_len < 2 {
            return Err(Error::param("window_len", format!("must be >= 2, got {window_len}")));
        }
        Ok(self.pulse_repetition_hz / window_len as f64 * self.wavelength_m() / 2.0)
    }
}

impl Default for RadarConfig {
    /// 25 GHz carrier, 4 kHz pulse repetition.
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 25.0e9,
            pulse_repetition_hz: 4.0e3,
            speed_of_light_m_s: SPEED_OF_LIGHT_M_S,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawRadarConfig {
    carrier_frequency_hz: f64,
    pulse_repetition_hz: f64,
    #[serde(default = "default_c")]
    speed_of_light_m_s: f64,
}

fn default_c() -> f64 {
    SPEED_OF_LIGHT_M_S
}

impl TryFrom<RawRadarConfig> for RadarConfig {
    type Error = Error;

    fn try_from(raw: RawRadarConfig) -> Result<Self> {
        Self::with_speed_of_light(
            raw.carrier_frequency_hz,
            raw.pulse_repetition_hz,
            raw.speed_of_light_m_s,
        )
    }
}

impl From<RadarConfig> for RawRadarConfig {
    fn from(c: RadarConfig) -> Self {
        Self {
            carrier_frequency_hz: c.carrier_frequency_hz,
            pulse_repetition_hz: c.pulse_repetition_hz,
            speed_of_light_m_s: c.speed_of_light_m_s,
        }
    }
}

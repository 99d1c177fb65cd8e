//! Synthetic micro-Doppler spectrogram toolkit.
//!
//! Simulates treadmill-walking human radar returns, builds dB spectrogram
//! half-gait images, corrupts them with SNR-controlled noise, runs the
//! classical CFAR and gamma-correction denoisers, and scores results with
//! SSIM, PSNR, MSE and VIF.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corruption;
pub mod denoise;
pub mod error;
pub mod gait;
pub mod metrics;
pub mod pipeline;
pub mod radar;
pub mod spectrogram;

pub use error::{Error, Result};
pub use radar::RadarConfig;

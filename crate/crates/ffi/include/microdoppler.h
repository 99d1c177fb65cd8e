#ifndef MICRODOPPLER_H
#define MICRODOPPLER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_NULL_POINTER = 1,
  MD_STATUS_INVALID_ARGUMENT = 2,
  MD_STATUS_ALIASING = 3,
  MD_STATUS_SHAPE_MISMATCH = 4,
  MD_STATUS_BUFFER_TOO_SMALL = 5,
  MD_STATUS_IO = 6,
  MD_STATUS_FORMAT = 7,
  MD_STATUS_INTERNAL = 8,
} MdStatus;

typedef struct MdProfile MdProfile;

typedef struct MdRadar MdRadar;

typedef struct MdSignal MdSignal;

typedef struct MdSpectrogram MdSpectrogram;

typedef struct MdMetrics {
  double ssim;
  /**
   * `+inf` for identical inputs.
   */
  double psnr_db;
  double mse;
  double vif;
} MdMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *md_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *md_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum MdStatus md_radar_new(double carrier_frequency_hz,
                           double pulse_repetition_hz,
                           struct MdRadar **out);

/**
 * # Safety
 * `radar` must be null or a handle from `md_radar_new` not yet freed.
 */
void md_radar_free(struct MdRadar *radar);

/**
 * # Safety
 * `radar` must be a live handle; `out` must be writable.
 */
enum MdStatus md_radar_max_velocity(const struct MdRadar *radar, double *out);

/**
 * # Safety
 * `radar` must be a live handle; `out` must be writable.
 */
enum MdStatus md_radar_velocity_resolution(const struct MdRadar *radar,
                                           size_t window_len,
                                           double *out);

/**
 * # Safety
 * `radar` must be a live handle; `out` must be writable.
 */
enum MdStatus md_radar_wavelength(const struct MdRadar *radar, double *out);

/**
 * Seven-scatterer walker at the given treadmill speed and half-gait duration.
 *
 * # Safety
 * `out` must be writable.
 */
enum MdStatus md_profile_default_walker(double treadmill_speed_m_s,
                                        double half_gait_duration_s,
                                        struct MdProfile **out);

/**
 * Gait profile parsed from a TOML document.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum MdStatus md_profile_from_toml(const char *toml, struct MdProfile **out);

/**
 * # Safety
 * `profile` must be null or a live handle.
 */
void md_profile_free(struct MdProfile *profile);

/**
 * Complex baseband of `profile` seen by `radar` for `duration_s` seconds.
 *
 * # Safety
 * `profile` and `radar` must be live handles; `out` must be writable.
 */
enum MdStatus md_synthesize(const struct MdProfile *profile,
                            const struct MdRadar *radar,
                            double duration_s,
                            uint64_t seed,
                            struct MdSignal **out);

/**
 * Number of complex samples, or 0 for a null handle.
 *
 * # Safety
 * `signal` must be null or a live handle.
 */
size_t md_signal_len(const struct MdSignal *signal);

/**
 * Copies real and imaginary parts into caller buffers of `len` elements.
 *
 * # Safety
 * `signal` must be live; `re` and `im` must hold `len` doubles.
 */
enum MdStatus md_signal_copy(const struct MdSignal *signal, double *re, double *im, size_t len);

/**
 * # Safety
 * `signal` must be null or a live handle.
 */
void md_signal_free(struct MdSignal *signal);

/**
 * Gaussian-window STFT in dB. `sigma_fraction` and `floor_db` of 0 select
 * the defaults.
 *
 * # Safety
 * `signal` and `radar` must be live handles; `out` must be writable.
 */
enum MdStatus md_stft(const struct MdSignal *signal,
                      const struct MdRadar *radar,
                      size_t window_len,
                      size_t hop,
                      double sigma_fraction,
                      double floor_db,
                      struct MdSpectrogram **out);

/**
 * # Safety
 * `spec` must be live; `rows` and `cols` must be writable.
 */
enum MdStatus md_spectrogram_dims(const struct MdSpectrogram *spec, size_t *rows, size_t *cols);

/**
 * Row-major dB values; row `rows / 2` is zero velocity.
 *
 * # Safety
 * `spec` must be live; `out` must hold `len` doubles.
 */
enum MdStatus md_spectrogram_copy(const struct MdSpectrogram *spec, double *out, size_t len);

/**
 * Velocity in m/s of each row.
 *
 * # Safety
 * `spec` must be live; `out` must hold `len` doubles.
 */
enum MdStatus md_spectrogram_velocity_axis(const struct MdSpectrogram *spec,
                                           double *out,
                                           size_t len);

/**
 * # Safety
 * `spec` must be null or a live handle.
 */
void md_spectrogram_free(struct MdSpectrogram *spec);

/**
 * Cell-averaging scale factor for `n_training` cells at false-alarm rate `pfa`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MdStatus md_cfar_threshold_factor(size_t n_training, double pfa, double *out);

/**
 * 2D CA-CFAR on linear power. Writes 1 for detections and 0 elsewhere.
 *
 * # Safety
 * `power` must hold `rows * cols` doubles and `mask` as many bytes.
 */
enum MdStatus md_cfar_detect(const double *power,
                             size_t rows,
                             size_t cols,
                             size_t guard_cells,
                             size_t training_cells,
                             double pfa,
                             uint8_t *mask);

/**
 * In-place gamma correction of 16-bit intensities.
 *
 * # Safety
 * `pixels` must hold `len` values.
 */
enum MdStatus md_gamma_u16(uint16_t *pixels, size_t len, double gamma);

/**
 * SSIM, PSNR, MSE and VIF of `distorted` against `reference`.
 *
 * # Safety
 * Both planes must hold `rows * cols` doubles; `out` must be writable.
 */
enum MdStatus md_compare(const double *reference,
                         const double *distorted,
                         size_t rows,
                         size_t cols,
                         double data_range,
                         struct MdMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MICRODOPPLER_H */

#ifndef DOA_BCS_H
#define DOA_BCS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum DoaStatus {
  DOA_STATUS_OK = 0,
  DOA_STATUS_NULL_POINTER = 1,
  DOA_STATUS_DOMAIN = 2,
  DOA_STATUS_CONFIG = 3,
  DOA_STATUS_DIMENSION = 4,
  DOA_STATUS_NUMERICAL = 5,
  DOA_STATUS_IO = 6,
  DOA_STATUS_PARSE = 7,
  DOA_STATUS_PANIC = 8,
} DoaStatus;

/**
 * Estimator selector for [`doa_tracker_new`].
 */
typedef enum DoaEstimator {
  /**
   * Zero-mean RVM inside the Kalman filter.
   */
  DOA_ESTIMATOR_RVM = 0,
  /**
   * Prediction-centred RVM inside the Kalman filter.
   */
  DOA_ESTIMATOR_MODIFIED_RVM = 1,
  /**
   * Windowed spike-and-slab Gibbs sampler.
   */
  DOA_ESTIMATOR_GIBBS = 2,
} DoaEstimator;

/**
 * Array geometry, coupling and angle grid.
 */
typedef struct DoaArray DoaArray;

/**
 * Sequential single-target estimator bound to one array.
 */
typedef struct DoaTracker DoaTracker;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to fit. Returns the full message length
 * in bytes, excluding the terminator.
 */
size_t doa_last_error_message(char *buf, size_t len);

/**
 * Twenty antennas at half-wavelength spacing with the default coupling
 * and a 1° grid.
 */
enum DoaStatus doa_array_new_standard(struct DoaArray **out);

/**
 * Array from a JSON description with keys `m`, `delta_d_wavelengths`,
 * `coupling` and optionally `grid_step_deg`.
 */
enum DoaStatus doa_array_from_json(const char *json, struct DoaArray **out);

void doa_array_free(struct DoaArray *array);

/**
 * Number of antennas, or 0 for a null handle.
 */
size_t doa_array_antennas(const struct DoaArray *array);

/**
 * Number of grid angles, or 0 for a null handle.
 */
size_t doa_array_grid_len(const struct DoaArray *array);

/**
 * Grid angle in degrees at `index`, or NaN when out of range.
 */
double doa_array_grid_angle(const struct DoaArray *array, size_t index);

/**
 * Writes one noisy snapshot of a single source at grid angle `theta_deg`
 * with real amplitude `value`. Noise has variance `sigma2` on each real and
 * imaginary part and is drawn from a generator seeded by `seed`. Both
 * output buffers hold `len` values, which must equal the antenna count.
 */
enum DoaStatus doa_array_synthesize(const struct DoaArray *array,
                                    double theta_deg,
                                    double value,
                                    double sigma2,
                                    uint64_t seed,
                                    double *out_re,
                                    double *out_im,
                                    size_t len);

/**
 * Creates a tracker for `array`. `delta_deg` is the assumed per-snapshot
 * DOA change, `sigma2_init` the initial noise variance, `eta` the retained
 * energy fraction and `seed` keys the Gibbs sampler's random stream. The
 * tracker copies what it needs, so `array` may be freed afterwards.
 */
enum DoaStatus doa_tracker_new(const struct DoaArray *array,
                               enum DoaEstimator estimator,
                               double delta_deg,
                               double sigma2_init,
                               double eta,
                               uint64_t seed,
                               struct DoaTracker **out);

void doa_tracker_free(struct DoaTracker *tracker);

/**
 * Feeds one complex snapshot (`len` antennas, split into real and
 * imaginary parts). On success `out_doa` receives the strongest retained
 * angle in degrees (NaN when nothing is retained) and `out_count`, when
 * non-null, the number of retained angles.
 */
enum DoaStatus doa_tracker_step(struct DoaTracker *tracker,
                                const double *re,
                                const double *im,
                                size_t len,
                                double *out_doa,
                                size_t *out_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOA_BCS_H */

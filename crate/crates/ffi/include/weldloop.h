#ifndef WELDLOOP_H
#define WELDLOOP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WlPreset {
  WL_PRESET_BRUSHED = 0,
  WL_PRESET_SANDBLASTED = 1,
  WL_PRESET_MIXED = 2,
} WlPreset;

typedef enum WlStatus {
  WL_STATUS_OK = 0,
  WL_STATUS_NULL_POINTER = 1,
  WL_STATUS_INVALID_ARGUMENT = 2,
  WL_STATUS_BAD_BLOB = 3,
  WL_STATUS_SIMULATION = 4,
  WL_STATUS_PANIC = 5,
} WlStatus;

/**
 * Quantized policy as loaded on the device.
 */
typedef struct WlPolicy WlPolicy;

/**
 * One simulated weld line.
 */
typedef struct WlWeldEnv WlWeldEnv;

/**
 * A sensor reading in volts.
 */
typedef struct WlReading {
  double or_volts;
  double oe_volts;
} WlReading;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if none.
 * Valid until the next failing call on the same thread.
 */
const char *wl_last_error(void);

/**
 * Piecewise-polynomial tanh used by the device.
 */
double wl_tanh_poly(double x);

/**
 * Parse a serialized policy blob.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be writable.
 */
enum WlStatus wl_policy_from_blob(const uint8_t *data, size_t len, struct WlPolicy **out);

/**
 * Version stamped into the blob, 0 for a null handle.
 *
 * # Safety
 * `policy` must be null or a live handle.
 */
uint32_t wl_policy_version(const struct WlPolicy *policy);

/**
 * One device inference: observation in volts, standard-normal epsilon
 * (0 for the deterministic action), commanded power in watts.
 *
 * # Safety
 * `policy` must be a live handle and `power_watts` writable.
 */
enum WlStatus wl_policy_infer(const struct WlPolicy *policy,
                              double or_volts,
                              double oe_volts,
                              double epsilon,
                              double *power_watts);

/**
 * # Safety
 * `policy` must be null or a handle not yet freed.
 */
void wl_policy_free(struct WlPolicy *policy);

/**
 * New weld line on a preset surface with default process parameters.
 * `noise == false` gives the deterministic process.
 *
 * # Safety
 * `out` must be writable.
 */
enum WlStatus wl_weld_env_new(enum WlPreset preset,
                              uint64_t seed,
                              uint64_t episode,
                              bool noise,
                              struct WlWeldEnv **out);

/**
 * Read the sensors under `power_watts` without advancing the line.
 *
 * # Safety
 * `env` must be a live handle and `reading` writable.
 */
enum WlStatus wl_weld_env_probe(struct WlWeldEnv *env,
                                double power_watts,
                                struct WlReading *reading);

/**
 * Apply `power_watts` for one step and read the sensors.
 *
 * # Safety
 * `env` must be a live handle and `reading` writable.
 */
enum WlStatus wl_weld_env_step(struct WlWeldEnv *env,
                               double power_watts,
                               struct WlReading *reading);

/**
 * True once the line has run its full number of steps.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
bool wl_weld_env_done(const struct WlWeldEnv *env);

/**
 * # Safety
 * `env` must be null or a handle not yet freed.
 */
void wl_weld_env_free(struct WlWeldEnv *env);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WELDLOOP_H */

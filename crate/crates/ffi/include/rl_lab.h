#ifndef RL_LAB_H
#define RL_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_PARAMETER = 2,
  // Solver, eigen-iteration or calibration failure.
  RL_STATUS_NUMERICAL = 3,
  RL_STATUS_BUFFER_TOO_SMALL = 4,
  RL_STATUS_PANIC = 5,
} RlStatus;

typedef enum RlLimits {
  RL_LIMITS_EXACT = 0,
  RL_LIMITS_FIXED = 1,
} RlLimits;

typedef enum RlMeasure {
  RL_MEASURE_ZERO_STATE = 0,
  RL_MEASURE_STEADY_STATE = 1,
} RlMeasure;

// Opaque chart handle.
typedef struct RlChart RlChart;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Synthetic chart with rule `variant` (1-4), window `h` and warning limit
// `k1`; `k2` adds an outer Shewhart limit (NaN for none).
//
// # Safety
// `out` must be null or valid for writing a pointer.
enum RlStatus rl_synthetic_new(uint8_t variant,
                               bool head_start,
                               size_t h,
                               double k1,
                               double k2,
                               struct RlChart **out);

// EWMA chart; `grid` of 0 keeps the default discretization.
//
// # Safety
// `out` must be null or valid for writing a pointer.
enum RlStatus rl_ewma_new(double lambda,
                          double c,
                          enum RlLimits limits,
                          double k2,
                          size_t grid,
                          struct RlChart **out);

// Upper CUSUM chart; `grid` of 0 keeps the default discretization.
//
// # Safety
// `out` must be null or valid for writing a pointer.
enum RlStatus rl_cusum_new(double k_ref, double h, double k2, size_t grid, struct RlChart **out);

// # Safety
// `out` must be null or valid for writing a pointer.
enum RlStatus rl_shewhart_new(double k, struct RlChart **out);

// # Safety
// `chart` must be null or a handle from an `rl_*_new` call not yet freed.
void rl_chart_free(struct RlChart *chart);

// Current value of the chart's free parameter (k1, c, h or k).
//
// # Safety
// `chart` must be a live handle or null; `out` must be null or writable.
enum RlStatus rl_chart_parameter(const struct RlChart *chart, double *out);

// Zero-state or steady-state ARL at shift `delta`.
//
// # Safety
// `chart` must be a live handle or null; `out` must be null or writable.
enum RlStatus rl_chart_arl(const struct RlChart *chart,
                           double delta,
                           enum RlMeasure measure,
                           double *out);

// Writes `D_1 .. D_tau_max` into `values` (capacity `capacity`), the
// number written into `written` and the limit into `limit`. Fewer than
// `tau_max` values are written if the in-control survival underflows.
//
// # Safety
// `chart` must be a live handle or null; `values` must be null or valid
// for `capacity` doubles; `written` and `limit` must be null or writable.
enum RlStatus rl_chart_ced(const struct RlChart *chart,
                           double delta,
                           size_t tau_max,
                           double *values,
                           size_t capacity,
                           size_t *written,
                           double *limit);

// Solves the free parameter so that the in-control ARL under `measure`
// equals `arl0`, updates the chart in place and writes the value to `out`
// (which may be null).
//
// # Safety
// `chart` must be a live handle or null; `out` must be null or writable.
enum RlStatus rl_chart_calibrate(struct RlChart *chart,
                                 double arl0,
                                 enum RlMeasure measure,
                                 double *out);

// Copies the calling thread's last error message (NUL-terminated,
// truncated to fit) into `buf` and returns the length it needs including
// the NUL, or 0 if no error has been recorded.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t rl_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *rl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RL_LAB_H */

#ifndef BATCHLENS_H
#define BATCHLENS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BatchlensStatus {
  BATCHLENS_STATUS_OK = 0,
  BATCHLENS_STATUS_NULL_POINTER = 1,
  BATCHLENS_STATUS_INVALID_ARGUMENT = 2,
  BATCHLENS_STATUS_SHAPE_MISMATCH = 3,
  BATCHLENS_STATUS_VALUE_OUT_OF_RANGE = 4,
  BATCHLENS_STATUS_EMPTY_INPUT = 5,
  BATCHLENS_STATUS_INTERNAL = 6,
} BatchlensStatus;

// Opaque session: a selector configuration plus pivot state.
typedef struct BatchlensHandle BatchlensHandle;

// Selector settings passed by value to [`batchlens_handle_new`].
// `min_pts = 0` means `max(3, ceil(0.01 N))`.
typedef struct BatchlensConfig {
  size_t b;
  double big_batch_ratio;
  double delta;
  double beta;
  double weight_si;
  double weight_eg;
  double weight_tv;
  uint64_t seed;
  double eps;
  size_t min_pts;
} BatchlensConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library defaults: b = 16, B = 2b, delta = 0.01, TV-only weights,
// eps = 0.05, automatic min_pts.
struct BatchlensConfig batchlens_config_default(void);

// NUL-terminated message of the last failed call on this thread; empty
// after a successful call. Valid until the next call on this thread.
const char *batchlens_last_error(void);

// Creates a session. The handle must be released with
// [`batchlens_handle_free`].
//
// # Safety
// `config` must be null or point to a valid `BatchlensConfig`; `out` must be
// null or writable.
enum BatchlensStatus batchlens_handle_new(const struct BatchlensConfig *config,
                                          struct BatchlensHandle **out);

// Releases a session; null is ignored.
//
// # Safety
// `handle` must come from [`batchlens_handle_new`] and not be used again.
void batchlens_handle_free(struct BatchlensHandle *handle);

// Fixes the pivot used by [`batchlens_score`]. A NaN clears it, so the
// next score call calibrates on its batch.
//
// # Safety
// `handle` must be a live handle or null.
enum BatchlensStatus batchlens_set_pivot(struct BatchlensHandle *handle, double pivot);

// Current pivot, or NaN when none has been set or calibrated.
//
// # Safety
// `handle` must be a live handle or null; `out` writable or null.
enum BatchlensStatus batchlens_get_pivot(const struct BatchlensHandle *handle, double *out);

// Proposed scores of a batch.
//
// `images` holds `n` images of `height x width x channels` values in
// `[0, 1]`, row-major with channels innermost. `masks` holds `n` masks of
// `height x width` bytes, 1 = observed and 0 = missing. Complexities are
// min-max normalized over the batch. When the handle has no pivot it is
// calibrated on the batch and kept. `out_complexities` may be null.
//
// # Safety
// All non-null pointers must cover the sizes implied by `n`, `height`,
// `width` and `channels`.
enum BatchlensStatus batchlens_score(struct BatchlensHandle *handle,
                                     const double *images,
                                     const uint8_t *masks,
                                     const double *losses,
                                     size_t n,
                                     size_t height,
                                     size_t width,
                                     size_t channels,
                                     double *out_scores,
                                     double *out_complexities);

// Indices of the `b` largest scores, largest first, ties to the lower
// index. `out_indices` receives `b` values.
//
// # Safety
// `scores` must cover `n` values and `out_indices` `b` slots.
enum BatchlensStatus batchlens_select(const double *scores,
                                      size_t n,
                                      size_t b,
                                      size_t *out_indices);

// Calibrates the pivot from normalized complexities with the handle's
// DBSCAN settings, stores it in the handle and writes it to `out_pivot`.
//
// # Safety
// `values` must cover `n` values; `out_pivot` writable or null.
enum BatchlensStatus batchlens_calibrate(struct BatchlensHandle *handle,
                                         const double *values,
                                         size_t n,
                                         double *out_pivot);

// Big-batch size `ceil(ratio * b)` of the handle's configuration.
//
// # Safety
// `handle` must be a live handle or null; `out` writable or null.
enum BatchlensStatus batchlens_big_batch(const struct BatchlensHandle *handle, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BATCHLENS_H */

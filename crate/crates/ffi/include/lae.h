#ifndef LAE_H
#define LAE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LaeStatus {
  LAE_STATUS_OK = 0,
  LAE_STATUS_NULL_POINTER = 1,
  LAE_STATUS_INVALID_ARGUMENT = 2,
  LAE_STATUS_DIMENSION_MISMATCH = 3,
  LAE_STATUS_SINGULAR = 4,
  LAE_STATUS_RANK_DEFICIENT = 5,
  LAE_STATUS_NOT_FINITE = 6,
  LAE_STATUS_BUFFER_TOO_SMALL = 7,
  LAE_STATUS_INTERNAL = 99,
} LaeStatus;

/**
 * Terminal state of a training run.
 */
typedef enum LaeTerminal {
  LAE_TERMINAL_CONVERGED = 0,
  LAE_TERMINAL_MAX_ITERATIONS = 1,
  LAE_TERMINAL_DIVERGED = 2,
} LaeTerminal;

typedef struct LaeCovariance LaeCovariance;

typedef struct LaeDataset LaeDataset;

typedef struct LaeTrace LaeTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *lae_last_error_message(void);

/**
 * Build a dataset of `m` samples of dimension `n`. `targets` may be null for
 * an auto-associative dataset.
 *
 * # Safety
 * `inputs` (and `targets` when non-null) must point to `2·n·m` doubles and
 * `out` to writable storage for one pointer.
 */
enum LaeStatus lae_dataset_new(size_t n,
                               size_t m,
                               const double *inputs,
                               const double *targets,
                               struct LaeDataset **out);

/**
 * # Safety
 * `ds` must be null or a pointer from [`lae_dataset_new`] not yet freed.
 */
void lae_dataset_free(struct LaeDataset *ds);

/**
 * Covariances of a dataset; `ridge` is added to `Σ_XX` only for inversion.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` writable.
 */
enum LaeStatus lae_covariance_new(const struct LaeDataset *ds,
                                  double ridge,
                                  struct LaeCovariance **out);

/**
 * # Safety
 * `cov` must be null or a live covariance handle.
 */
void lae_covariance_free(struct LaeCovariance *cov);

/**
 * Smallest achievable error with `p` hidden units.
 *
 * # Safety
 * `cov` must be a live covariance handle and `out` writable.
 */
enum LaeStatus lae_covariance_error_floor(const struct LaeCovariance *cov, size_t p, double *out);

/**
 * Train with schedule `algorithm` (1 to 7) from a seeded random start.
 * `max_iterations = 0` keeps the default limit.
 *
 * # Safety
 * `cov` must be a live covariance handle and `out` writable.
 */
enum LaeStatus lae_train(const struct LaeCovariance *cov,
                         uint8_t algorithm,
                         size_t p,
                         uint64_t seed,
                         size_t max_iterations,
                         struct LaeTrace **out);

/**
 * # Safety
 * `trace` must be null or a live trace handle.
 */
void lae_trace_free(struct LaeTrace *trace);

/**
 * # Safety
 * `trace` must be a live trace handle and `out` writable.
 */
enum LaeStatus lae_trace_status(const struct LaeTrace *trace, enum LaeTerminal *out);

/**
 * Number of recorded iterations.
 *
 * # Safety
 * `trace` must be null or a live trace handle.
 */
size_t lae_trace_iterations(const struct LaeTrace *trace);

/**
 * # Safety
 * `trace` must be a live trace handle and `out` writable.
 */
enum LaeStatus lae_trace_final_error(const struct LaeTrace *trace, double *out);

/**
 * Copy the per-iteration errors into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `trace` must be a live trace handle and `buf` valid for `len` writes.
 */
enum LaeStatus lae_trace_errors(const struct LaeTrace *trace, double *buf, size_t len);

/**
 * Copy the trained map `W = AB` (interleaved, column-major) into `buf`,
 * which holds `len` doubles; `2·n²` are needed.
 *
 * # Safety
 * `trace` must be a live trace handle and `buf` valid for `len` writes.
 */
enum LaeStatus lae_trace_weights(const struct LaeTrace *trace, double *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lae_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAE_H */

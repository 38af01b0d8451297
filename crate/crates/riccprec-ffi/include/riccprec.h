/* C ABI for the riccprec precision-matrix library. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
enum RpStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  /**
   * Success.
   */
  RP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RP_STATUS_NULL_ARGUMENT = 1,
  /**
   * Input validation failed (dimensions, ranges, formats).
   */
  RP_STATUS_INVALID_INPUT = 3,
  /**
   * A numerical contract was violated (non-positive-definite result).
   */
  RP_STATUS_NUMERICAL = 4,
  /**
   * File I/O failed.
   */
  RP_STATUS_IO = 5,
  /**
   * The penalty does not support the requested fast path.
   */
  RP_STATUS_UNSUPPORTED_PENALTY = 6,
  /**
   * A dense materialization would exceed the cap.
   */
  RP_STATUS_TOO_LARGE = 7,
  /**
   * An internal panic was caught at the boundary.
   */
  RP_STATUS_PANIC = 9,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum RpStatus RpStatus;
#else
typedef int32_t RpStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque signal-matrix handle.
 */
typedef struct RpMatrix RpMatrix;

/**
 * Opaque factored-precision handle.
 */
typedef struct RpPrecision RpPrecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *rp_last_error_message(void);

/**
 * Loads a matrix from `path`; `format` 0 = csv, 1 = raw64.
 */
RpStatus rp_matrix_load(const char *path, int32_t format, struct RpMatrix **out);

/**
 * Wraps a row-major `rows x cols` buffer (copied).
 */
RpStatus rp_matrix_from_values(uintptr_t rows,
                               uintptr_t cols,
                               const double *values,
                               struct RpMatrix **out);

uintptr_t rp_matrix_rows(const struct RpMatrix *matrix);

uintptr_t rp_matrix_cols(const struct RpMatrix *matrix);

/**
 * Replaces the handle's contents with row-normalized data (zero mean,
 * unit variance per row).
 */
RpStatus rp_matrix_normalize(struct RpMatrix *matrix);

/**
 * Randomized compression of the sample dimension to `t` with `q` power
 * iterations. Writes a new handle and the retained energy fraction.
 */
RpStatus rp_matrix_project(const struct RpMatrix *matrix,
                           uintptr_t t,
                           uintptr_t q,
                           uint64_t seed,
                           struct RpMatrix **out,
                           double *retained);

void rp_matrix_free(struct RpMatrix *matrix);

/**
 * Riccati estimate with identity weights.
 */
RpStatus rp_estimate_identity(const struct RpMatrix *matrix, double rho, struct RpPrecision **out);

/**
 * Riccati estimate with node suppression: weight 1 on `inside` (zero-based
 * indices), `alpha` elsewhere.
 */
RpStatus rp_estimate_roi(const struct RpMatrix *matrix,
                         double rho,
                         double alpha,
                         const uintptr_t *inside,
                         uintptr_t inside_len,
                         struct RpPrecision **out);

/**
 * Tikhonov estimate `(C + rho I)^{-1}` in factored form.
 */
RpStatus rp_estimate_tikhonov(const struct RpMatrix *matrix, double rho, struct RpPrecision **out);

RpStatus rp_precision_load(const char *path, struct RpPrecision **out);

RpStatus rp_precision_save(const struct RpPrecision *precision, const char *path);

/**
 * Number of nodes N.
 */
uintptr_t rp_precision_dim(const struct RpPrecision *precision);

/**
 * Rank m of the low-rank block.
 */
uintptr_t rp_precision_rank(const struct RpPrecision *precision);

RpStatus rp_precision_logdet(const struct RpPrecision *precision, double *out);

/**
 * Gaussian entropy of the node subset `nodes` (zero-based), fast path.
 */
RpStatus rp_precision_tsee(const struct RpPrecision *precision,
                           const uintptr_t *nodes,
                           uintptr_t nodes_len,
                           double *out);

/**
 * Mahalanobis distance between two length-N maps under the precision.
 */
RpStatus rp_precision_mahalanobis(const struct RpPrecision *precision,
                                  const double *a,
                                  const double *b,
                                  uintptr_t len,
                                  double *out);

/**
 * Densifies the precision (refused above `cap`) and writes the partial
 * correlations row-major into `out_values`, which must hold N*N doubles.
 */
RpStatus rp_precision_partials(const struct RpPrecision *precision,
                               uintptr_t cap,
                               double *out_values);

void rp_precision_free(struct RpPrecision *precision);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

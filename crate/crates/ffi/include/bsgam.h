/* C interface for the bsgam library. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes for every fallible entry point.
 */
typedef enum BsgamStatus {
  BSGAM_STATUS_OK = 0,
  BSGAM_STATUS_NULL_POINTER = 1,
  BSGAM_STATUS_INVALID_UTF8 = 2,
  BSGAM_STATUS_INVALID_ARGUMENT = 3,
  BSGAM_STATUS_COMPUTE_FAILED = 4,
} BsgamStatus;

/**
 * Opaque fit handle.
 */
typedef struct BsgamFit BsgamFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *bsgam_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bsgam_version(void);

/**
 * Fits a CSV dataset. `config_text` uses the same `key = value` grammar as
 * the CLI configuration file and may be NULL for defaults. On success,
 * writes a handle to `out`.
 *
 * # Safety
 * `data_path` must be a valid NUL-terminated string, `config_text` NULL or
 * valid, and `out` a valid location to store the handle.
 */
enum BsgamStatus bsgam_fit_csv(const char *data_path,
                               const char *config_text,
                               struct BsgamFit **out);

/**
 * Releases a fit handle. NULL is a no-op.
 *
 * # Safety
 * `fit` must be a handle produced by `bsgam_fit_csv` (or NULL) and must not
 * be used afterwards.
 */
void bsgam_fit_free(struct BsgamFit *fit);

/**
 * JSON summary of the fit (schema-stable); release with
 * `bsgam_string_free`.
 *
 * # Safety
 * `fit` must be a live handle.
 */
char *bsgam_fit_summary_json(const struct BsgamFit *fit);

/**
 * Number of covariates in the fitted model.
 *
 * # Safety
 * `fit` must be a live handle.
 */
uintptr_t bsgam_fit_num_covariates(const struct BsgamFit *fit);

/**
 * Grid length of covariate `j`'s component summary.
 *
 * # Safety
 * `fit` must be a live handle.
 */
uintptr_t bsgam_fit_grid_len(const struct BsgamFit *fit, uintptr_t j);

/**
 * Copies the pointwise component summary of covariate `j` into the supplied
 * buffers (each of capacity `len`; `bsgam_fit_grid_len` values are written).
 * Any output pointer may be NULL to skip that field.
 *
 * # Safety
 * `fit` must be a live handle and the non-NULL buffers valid for `len`
 * doubles.
 */
enum BsgamStatus bsgam_fit_component(const struct BsgamFit *fit,
                                     uintptr_t j,
                                     double *grid,
                                     double *mean,
                                     double *lower,
                                     double *upper,
                                     uintptr_t len);

/**
 * Releases a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must have been returned by a bsgam FFI call and not freed before.
 */
void bsgam_string_free(char *s);

/**
 * Log marginal likelihood under a named mixture-of-g prior (or the
 * unit-information point mass) given the fit statistics.
 *
 * # Safety
 * `prior` must be a valid NUL-terminated string and `out` a valid `double*`.
 */
enum BsgamStatus bsgam_log_marginal(const char *prior,
                                    uintptr_t n,
                                    uintptr_t j,
                                    double loglik,
                                    double info_trace,
                                    double q_wald,
                                    double *out);

/**
 * Log Bayes factor of an equal-fit one-knot refinement at model size `j`
 * and pseudo-R^2 `r2` (one row of the Bayes-factor table).
 *
 * # Safety
 * `prior` must be a valid NUL-terminated string and `out` a valid `double*`.
 */
enum BsgamStatus bsgam_log_bf_redundant_knot(const char *prior,
                                             uintptr_t n,
                                             uintptr_t j,
                                             double r2,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

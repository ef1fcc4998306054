#ifndef MTS_H
#define MTS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum MtsStatus {
  MTS_STATUS_OK = 0,
  MTS_STATUS_NULL_POINTER = 1,
  MTS_STATUS_INVALID_ARGUMENT = 2,
  MTS_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * Eigen, whitening or singular-matrix failure.
   */
  MTS_STATUS_NUMERICAL = 4,
  MTS_STATUS_INFEASIBLE = 5,
  MTS_STATUS_BUFFER_TOO_SMALL = 6,
  MTS_STATUS_PANIC = 7,
} MtsStatus;

/**
 * Structured covariance targets.
 */
typedef enum MtsTarget {
  MTS_TARGET_IDENTITY = 0,
  MTS_TARGET_DIAGONAL = 1,
  MTS_TARGET_CONST_CORR = 2,
} MtsTarget;

typedef enum MtsWhiten {
  MTS_WHITEN_NONE = 0,
  MTS_WHITEN_FULL = 1,
  /**
   * Uses the `partial_rank` argument as k.
   */
  MTS_WHITEN_PARTIAL = 2,
} MtsWhiten;

/**
 * A p × n data matrix.
 */
typedef struct MtsDataset MtsDataset;

/**
 * Output of a mean or covariance estimate.
 */
typedef struct MtsResult MtsResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies `data` (p·n doubles, column-major) into a new dataset.
 *
 * # Safety
 * `data` must point to `p * n` readable doubles and `out` must be writable.
 */
enum MtsStatus mts_dataset_new(const double *data, size_t p, size_t n, struct MtsDataset **out);

/**
 * # Safety
 * `ds` must be null or a handle from [`mts_dataset_new`] not yet freed.
 */
void mts_dataset_free(struct MtsDataset *ds);

/**
 * Number of dimensions, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t mts_dataset_dim(const struct MtsDataset *ds);

/**
 * Number of observations, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t mts_dataset_len(const struct MtsDataset *ds);

/**
 * Shrinks the mean of `x` toward the means of `k` auxiliary datasets.
 *
 * # Safety
 * `x` must be a live handle, `aux` must point to `k` live handles and `out`
 * must be writable.
 */
enum MtsStatus mts_mean_estimate(const struct MtsDataset *x,
                                 const struct MtsDataset *const *aux,
                                 size_t k,
                                 bool weight_constraint,
                                 enum MtsWhiten whiten,
                                 size_t partial_rank,
                                 struct MtsResult **out);

/**
 * Shrinks the sample covariance of `x` toward structured targets followed
 * by the sample covariances of auxiliary datasets, in that order.
 *
 * # Safety
 * `targets` must point to `n_targets` values, `aux` to `n_aux` live handles,
 * and `out` must be writable.
 */
enum MtsStatus mts_cov_estimate(const struct MtsDataset *x,
                                const enum MtsTarget *targets,
                                size_t n_targets,
                                const struct MtsDataset *const *aux,
                                size_t n_aux,
                                enum MtsWhiten whiten,
                                size_t partial_rank,
                                bool assume_zero_mean,
                                struct MtsResult **out);

/**
 * # Safety
 * `r` must be null or a live result handle.
 */
void mts_result_free(struct MtsResult *r);

/**
 * Number of targets K, or 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
size_t mts_result_num_targets(const struct MtsResult *r);

/**
 * Length of the estimate: p for a mean, p·p for a covariance.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
size_t mts_result_estimate_len(const struct MtsResult *r);

/**
 * # Safety
 * `r` must be null or a live handle.
 */
double mts_result_objective(const struct MtsResult *r);

/**
 * Copies the estimate (column-major for a covariance) into `buf`.
 *
 * # Safety
 * `buf` must have room for `len` doubles.
 */
enum MtsStatus mts_result_estimate(const struct MtsResult *r, double *buf, size_t len);

/**
 * Copies the K intensities into `buf`.
 *
 * # Safety
 * `buf` must have room for `len` doubles.
 */
enum MtsStatus mts_result_lambda(const struct MtsResult *r, double *buf, size_t len);

/**
 * Copies the K × K matrix Â into `buf`.
 *
 * # Safety
 * `buf` must have room for `len` doubles.
 */
enum MtsStatus mts_result_a_hat(const struct MtsResult *r, double *buf, size_t len);

/**
 * Copies the K entries of b̂ into `buf`.
 *
 * # Safety
 * `buf` must have room for `len` doubles.
 */
enum MtsStatus mts_result_b_hat(const struct MtsResult *r, double *buf, size_t len);

/**
 * Minimizes ½λᵀAλ − bᵀλ over λ ≥ 0, Σλ ≤ 1 and `m` extra rows
 * `rows[i·k .. i·k+k]·λ ≤ rhs[i]`. Writes K values to `lambda_out`.
 *
 * # Safety
 * `a` must hold k·k doubles, `b` k, `rows` m·k, `rhs` m; `lambda_out` must
 * have room for k.
 */
enum MtsStatus mts_qp_solve(const double *a,
                            const double *b,
                            size_t k,
                            const double *rows,
                            const double *rhs,
                            size_t m,
                            double *lambda_out);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to fit) and returns the full length including the terminator.
 * Pass a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or have room for `len` bytes.
 */
size_t mts_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mts_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTS_H */

#ifndef QCRL_H
#define QCRL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QcrlStatus {
  QCRL_STATUS_OK = 0,
  QCRL_STATUS_NULL_POINTER = 1,
  QCRL_STATUS_INVALID_UTF8 = 2,
  QCRL_STATUS_INVALID_ARGUMENT = 3,
  QCRL_STATUS_DIMENSION_MISMATCH = 4,
  QCRL_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * Non-Hermitian or non-unitary matrix, or an ambiguous logarithm branch.
   */
  QCRL_STATUS_NUMERICAL = 6,
  QCRL_STATUS_IRREGULAR_POINT = 7,
  QCRL_STATUS_STEP_DEVIATION = 8,
  QCRL_STATUS_MAX_ITERS = 9,
  QCRL_STATUS_OUT_OF_RANGE = 10,
  QCRL_STATUS_NO_DESCENT = 11,
  QCRL_STATUS_UNSUPPORTED = 12,
  /**
   * A Rust panic was caught at the boundary.
   */
  QCRL_STATUS_PANIC = 99,
} QcrlStatus;

/**
 * A model preset with the default 9-term Fourier basis per control.
 */
typedef struct QcrlModel QcrlModel;

/**
 * A finished traversal together with its interpolant.
 */
typedef struct QcrlTraversal QcrlTraversal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qcrl_version(void);

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL. Zero after a successful call.
 */
size_t qcrl_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len - 1` bytes). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t qcrl_last_error_message(char *buf, size_t len);

/**
 * Builds `sq_x_z`, `sq_xy_xyz` or `tq_xy_detuning`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum QcrlStatus qcrl_model_new(const char *name, struct QcrlModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`qcrl_model_new`] not yet freed.
 */
void qcrl_model_free(struct QcrlModel *model);

/**
 * Number of pulse parameters, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qcrl_model_param_count(const struct QcrlModel *model);

/**
 * Number of noise terms, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qcrl_model_noise_count(const struct QcrlModel *model);

/**
 * Gate time `T`, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
double qcrl_model_gate_time(const struct QcrlModel *model);

/**
 * Rotation angle on the model's gate axis.
 *
 * # Safety
 * `model` must be a live handle, `params` must hold `n_params` values and
 * `theta` must be writable.
 */
enum QcrlStatus qcrl_gate_angle(const struct QcrlModel *model,
                                const double *params,
                                size_t n_params,
                                size_t nt,
                                double *theta);

/**
 * `S1` and `S2` for every noise term, in model order. Either output may be
 * null to skip it; a non-null one must hold `len >= noise count` values.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum QcrlStatus qcrl_susceptibilities(const struct QcrlModel *model,
                                      const double *params,
                                      size_t n_params,
                                      size_t nt,
                                      double *s1,
                                      double *s2,
                                      size_t len);

/**
 * `log10 T - log10(Sn) / n`; `+inf` when `sn == 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QcrlStatus qcrl_robustness_order_n(double gate_time, uint32_t n, double sn, double *out);

/**
 * `1 - F` between the noiseless and noisy propagators, one strength per
 * noise term.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum QcrlStatus qcrl_infidelity(const struct QcrlModel *model,
                                const double *params,
                                size_t n_params,
                                const double *deltas,
                                size_t n_deltas,
                                size_t nt,
                                double *out);

/**
 * Monte-Carlo mean fidelity with every noise strength uniform on
 * `[-half_widths[j], half_widths[j]]`. Deterministic for a given seed.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum QcrlStatus qcrl_integral_robustness_uniform(const struct QcrlModel *model,
                                                 const double *params,
                                                 size_t n_params,
                                                 const double *half_widths,
                                                 size_t n_widths,
                                                 size_t samples,
                                                 uint64_t seed,
                                                 size_t nt,
                                                 double *out);

/**
 * Minimizes the summed `S1^2` (and undesired rotations, for presets that
 * have them) from `init` until every `S1 <= s1_target`. The best point is
 * written to `params_out` either way; `converged` reports whether the target
 * was met.
 *
 * # Safety
 * Pointers must be valid for `n_params` values; `converged` must be writable.
 */
enum QcrlStatus qcrl_optimize_beginning(const struct QcrlModel *model,
                                        const double *init,
                                        size_t n_params,
                                        double s1_target,
                                        size_t max_iters,
                                        size_t nt,
                                        double *params_out,
                                        bool *converged);

/**
 * Walks the level set through `params` from its own angle out to both ends
 * of `[theta_lo, theta_hi]` in steps of `|dtheta|`. Holds `S1` of every noise
 * term, `S2` as well when `hold_s2`, and the undesired rotations of presets
 * that have them.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum QcrlStatus qcrl_traverse(const struct QcrlModel *model,
                              const double *params,
                              size_t n_params,
                              double dtheta,
                              double theta_lo,
                              double theta_hi,
                              bool hold_s2,
                              size_t nt,
                              struct QcrlTraversal **out);

/**
 * # Safety
 * `t` must be null or a handle from [`qcrl_traverse`] not yet freed.
 */
void qcrl_traversal_free(struct QcrlTraversal *t);

/**
 * Number of records, sorted by increasing angle; 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t qcrl_traversal_len(const struct QcrlTraversal *t);

/**
 * Angle and parameters of record `index`. `params_out` may be null.
 *
 * # Safety
 * `theta` must be writable; a non-null `params_out` must hold `n_params` values.
 */
enum QcrlStatus qcrl_traversal_record(const struct QcrlTraversal *t,
                                      size_t index,
                                      double *theta,
                                      double *params_out,
                                      size_t n_params);

/**
 * Parameters at an arbitrary angle inside the recorded range.
 *
 * # Safety
 * `params_out` must hold `n_params` values.
 */
enum QcrlStatus qcrl_traversal_interpolate(const struct QcrlTraversal *t,
                                           double theta,
                                           double *params_out,
                                           size_t n_params);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCRL_H */

#ifndef KMS_STATIONARY_H
#define KMS_STATIONARY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KmsStatus {
  KMS_STATUS_OK = 0,
  KMS_STATUS_NULL_POINTER = 1,
  KMS_STATUS_INVALID_UTF8 = 2,
  KMS_STATUS_INVALID_CONFIG = 3,
  KMS_STATUS_INVALID_ARGUMENT = 4,
  KMS_STATUS_COMPUTATION = 5,
  KMS_STATUS_BUFFER_TOO_SMALL = 6,
  KMS_STATUS_PANIC = 7,
} KmsStatus;

/**
 * Opaque handle holding the exact and truncated generators of one config.
 */
typedef struct KmsModel KmsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *kms_last_error(void);

/**
 * Build a model from a JSON config (see the command-line `--help` for the fields).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KmsStatus kms_model_from_json(const char *json, struct KmsModel **out);

/**
 * # Safety
 * `model` must come from `kms_model_from_json` and not be used afterwards. Null is ignored.
 */
void kms_model_free(struct KmsModel *model);

/**
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum KmsStatus kms_model_dim(const struct KmsModel *model, size_t *out);

/**
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum KmsStatus kms_model_num_jumps(const struct KmsModel *model, size_t *out);

/**
 * Energy bound `S` (half period of the target function).
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum KmsStatus kms_model_energy_bound(const struct KmsModel *model, double *out);

/**
 * Truncation orders `M` and `M'`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum KmsStatus kms_model_truncation(const struct KmsModel *model, size_t *m, size_t *m_prime);

/**
 * Eigenvalues of `H` in ascending order; `len >= dim`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum KmsStatus kms_model_eigenvalues(const struct KmsModel *model, double *buf, size_t len);

/**
 * Target state `σ` with unit trace.
 *
 * # Safety
 * `re` and `im` must hold `len` doubles each.
 */
enum KmsStatus kms_model_sigma(const struct KmsModel *model, double *re, double *im, size_t len);

/**
 * Jump operator `index` of the exact (`truncated == 0`) or truncated generator.
 *
 * # Safety
 * `re` and `im` must hold `len` doubles each.
 */
enum KmsStatus kms_model_jump(const struct KmsModel *model,
                              size_t index,
                              int truncated,
                              double *re,
                              double *im,
                              size_t len);

/**
 * Detailed-balance residual `‖σ^{-1/2} L σ^{1/2} - L†‖` of one jump.
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum KmsStatus kms_model_kms_residual(const struct KmsModel *model,
                                      size_t index,
                                      int truncated,
                                      double *out);

/**
 * `‖L(σ)‖_F / ‖L‖_F`
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum KmsStatus kms_model_stationarity_residual(const struct KmsModel *model,
                                               int truncated,
                                               double *out);

/**
 * `e^{tL}(ρ)` for a density matrix given and returned as row-major real/imaginary parts.
 *
 * # Safety
 * Input and output arrays must hold `len` doubles each.
 */
enum KmsStatus kms_model_propagate(const struct KmsModel *model,
                                   const double *rho_re,
                                   const double *rho_im,
                                   size_t len,
                                   double t,
                                   int truncated,
                                   double *out_re,
                                   double *out_im);

/**
 * Full verification report as a JSON string; release it with `kms_string_free`.
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum KmsStatus kms_model_verify_json(const struct KmsModel *model, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void kms_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KMS_STATIONARY_H */

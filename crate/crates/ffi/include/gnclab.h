#ifndef GNCLAB_H
#define GNCLAB_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GnclabStatus {
  GNCLAB_STATUS_OK = 0,
  GNCLAB_STATUS_NULL_POINTER = 1,
  GNCLAB_STATUS_INVALID_UTF8 = 2,
  GNCLAB_STATUS_INVALID_ARGUMENT = 3,
  GNCLAB_STATUS_ARCHITECTURE = 4,
  GNCLAB_STATUS_SHAPE = 5,
  GNCLAB_STATUS_BUFFER_TOO_SMALL = 6,
  GNCLAB_STATUS_DEGENERATE = 7,
  GNCLAB_STATUS_PANIC = 8,
} GnclabStatus;

/**
 * A network topology together with one parameter vector.
 */
typedef struct GnclabNetwork GnclabNetwork;

/**
 * Fit-probability estimate from a guess-and-check run.
 */
typedef struct GnclabFitEstimate {
  size_t accepted;
  uint64_t draws;
  double p_hat;
  double neg_log2;
  /**
   * In bits; NaN when `upper_bound_only`.
   */
  double std_err;
  bool censored;
  bool upper_bound_only;
} GnclabFitEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gnclab_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL,
 * or 0 when the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t gnclab_last_error(char *buf, size_t len);

/**
 * Builds a network from an architecture descriptor such as
 * `"lenet:2/6:2c-3f"`, `"mlp:1:0"` or `"dense:8-8"` and a dataset name
 * (`"mnist"`, `"cifar10"`, `"synthetic"`). Parameters start at zero.
 *
 * # Safety
 * `arch` and `dataset` must be NUL-terminated strings; `out` must be
 * writable. Free the result with [`gnclab_network_free`].
 */
enum GnclabStatus gnclab_network_new(const char *arch,
                                     const char *dataset,
                                     struct GnclabNetwork **out);

/**
 * # Safety
 * `net` must be null or a handle from [`gnclab_network_new`] not yet freed.
 */
void gnclab_network_free(struct GnclabNetwork *net);

/**
 * Number of weights and biases; 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t gnclab_network_param_count(const struct GnclabNetwork *net);

/**
 * Flattened input length; 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t gnclab_network_input_len(const struct GnclabNetwork *net);

/**
 * Replaces the parameters with draw `index` of `prior` under `seed`.
 * `prior` is one of `uniform1`, `uniform02`, `kaiming_uniform`,
 * `kaiming_gaussian` or `uniform(<bound>)`, optionally suffixed with
 * `+zero_bias`.
 *
 * # Safety
 * `net` must be a live handle and `prior` a NUL-terminated string.
 */
enum GnclabStatus gnclab_network_sample(struct GnclabNetwork *net,
                                        const char *prior,
                                        uint64_t seed,
                                        uint64_t index);

/**
 * Copies the flattened parameters (layer order, weight then bias) into
 * `out`, which must hold `len >= param_count` values.
 *
 * # Safety
 * `net` must be a live handle; `out` must point to `len` writable doubles.
 */
enum GnclabStatus gnclab_network_get_params(const struct GnclabNetwork *net,
                                            double *out,
                                            size_t len);

/**
 * Replaces the parameters from a flat vector of exactly `param_count`
 * values.
 *
 * # Safety
 * `net` must be a live handle; `values` must point to `len` doubles.
 */
enum GnclabStatus gnclab_network_set_params(struct GnclabNetwork *net,
                                            const double *values,
                                            size_t len);

/**
 * Writes the two logits at `input` to `logits[0..2]`.
 *
 * # Safety
 * `net` must be a live handle, `input` must point to `input_len` doubles
 * and `logits` to two writable doubles.
 */
enum GnclabStatus gnclab_network_forward(const struct GnclabNetwork *net,
                                         const double *input,
                                         size_t input_len,
                                         double *logits);

/**
 * Logit difference `g = f_0 - f_1` at `input`.
 *
 * # Safety
 * As for [`gnclab_network_forward`]; `out` must be writable.
 */
enum GnclabStatus gnclab_network_margin(const struct GnclabNetwork *net,
                                        const double *input,
                                        size_t input_len,
                                        double *out);

/**
 * Gradient of `g` with respect to the input, written to `grad[0..input_len]`.
 * `margin` may be null; otherwise it receives `g`.
 *
 * # Safety
 * `input` and `grad` must each point to `input_len` doubles.
 */
enum GnclabStatus gnclab_network_grad_input(const struct GnclabNetwork *net,
                                            const double *input,
                                            size_t input_len,
                                            double *grad,
                                            double *margin);

/**
 * Parameter count of an architecture without allocating a handle.
 *
 * # Safety
 * `arch` and `dataset` must be NUL-terminated strings; `out` writable.
 */
enum GnclabStatus gnclab_count_params(const char *arch, const char *dataset, size_t *out);

/**
 * `log(1 + exp(-y g))`, stable for large `|g|`.
 */
double gnclab_logistic_loss(double g, double y);

/**
 * Fit-probability estimate after `accepted` acceptances in `draws` draws.
 *
 * # Safety
 * `out` must be writable.
 */
enum GnclabStatus gnclab_fit_estimate(size_t accepted,
                                      uint64_t draws,
                                      bool censored,
                                      struct GnclabFitEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GNCLAB_H */

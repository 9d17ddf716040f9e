#ifndef POLYMERLAB_H
#define POLYMERLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum PlStatus {
  PL_OK = 0,
  PL_DOMAIN_ERROR = 1,
  PL_ARGUMENT_ERROR = 2,
  PL_RESOURCE_CAP = 3,
  PL_NUMERIC_ERROR = 4,
  PL_NULL_POINTER = 5,
  PL_PANIC = 6,
} PlStatus;

/**
 * Opaque disorder environment.
 */
typedef struct PlEnvironment PlEnvironment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an environment. `kind` is one of `gaussian` (p1 = sigma),
 * `centered_exponential` (p1 = rate), `centered_gamma` (p1 = shape,
 * p2 = scale) or `centered_uniform` (p1 = half_width); unused parameters
 * are ignored.
 *
 * # Safety
 * `kind` must be a nul-terminated string and `out` a valid pointer.
 */
enum PlStatus pl_env_new(const char *kind,
                         double p1,
                         double p2,
                         uint64_t base_seed,
                         uint64_t replica,
                         struct PlEnvironment **out);

/**
 * Releases an environment. Null is ignored.
 *
 * # Safety
 * `env` must come from this library and not be used afterwards.
 */
void pl_env_free(struct PlEnvironment *env);

/**
 * Disorder value at site `(n, x)`; `x1` is ignored in one dimension.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum PlStatus pl_env_omega(const struct PlEnvironment *env,
                           int64_t n,
                           int64_t x0,
                           int64_t x1,
                           double *out);

/**
 * Pins the disorder at one site to `value`.
 *
 * # Safety
 * `env` must be a live handle.
 */
enum PlStatus pl_env_set_override(struct PlEnvironment *env,
                                  int64_t n,
                                  int64_t x0,
                                  int64_t x1,
                                  double value);

/**
 * New environment equal to `env` except for a fresh draw at one site.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum PlStatus pl_env_resample(const struct PlEnvironment *env,
                              int64_t n,
                              int64_t x0,
                              int64_t x1,
                              uint64_t fresh_seed,
                              struct PlEnvironment **out);

/**
 * `ln Z_N` for walks of `n` steps in dimension `d`.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum PlStatus pl_log_partition(const struct PlEnvironment *env,
                               uint32_t d,
                               uint64_t n,
                               double beta,
                               double *out);

/**
 * `ln Z_N(z)`; negative infinity when `z` is unreachable.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum PlStatus pl_log_partition_p2p(const struct PlEnvironment *env,
                                   uint32_t d,
                                   uint64_t n,
                                   double beta,
                                   int64_t z0,
                                   int64_t z1,
                                   double *out);

/**
 * Number of reachable endpoints after `n` steps in dimension `d`.
 */
size_t pl_endpoint_count(uint32_t d, uint64_t n);

/**
 * Gibbs law of the endpoint. Writes `len` points as `(x0, x1)` pairs into
 * `points` (2 * capacity slots) and their probabilities into `probs`.
 * Fails with an argument error, after setting `len`, when `capacity` is too
 * small.
 *
 * # Safety
 * `env` must be a live handle; `points` and `probs` must hold `2 * capacity`
 * and `capacity` values; `len` must be a valid pointer.
 */
enum PlStatus pl_endpoint_distribution(const struct PlEnvironment *env,
                                       uint32_t d,
                                       uint64_t n,
                                       double beta,
                                       int64_t *points,
                                       double *probs,
                                       size_t capacity,
                                       size_t *len);

/**
 * `ln E exp(theta omega)` for the environment's disorder law.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum PlStatus pl_log_mgf(const struct PlEnvironment *env, double theta, double *out);

/**
 * Gaussian transport derivative `psi(y)` of the environment's disorder law.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum PlStatus pl_psi(const struct PlEnvironment *env, double y, double *out);

/**
 * Message for the last failure on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *pl_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *pl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYMERLAB_H */

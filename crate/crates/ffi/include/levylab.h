#ifndef LEVYLAB_H
#define LEVYLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every entry point.
typedef enum LlStatus {
  LL_STATUS_OK = 0,
  LL_STATUS_NULL_POINTER = 1,
  LL_STATUS_INVALID_ARGUMENT = 2,
  LL_STATUS_DIMENSION = 3,
  LL_STATUS_PRECONDITION = 4,
  LL_STATUS_HYPOTHESIS = 5,
  LL_STATUS_NUMERIC = 6,
  LL_STATUS_CONFIG = 7,
  LL_STATUS_IO = 8,
  LL_STATUS_PANIC = 9,
} LlStatus;

// Norm families for [`ll_lyapunov_new`].
typedef enum LlNormKind {
  LL_NORM_KIND_GAUSSIAN = 0,
  LL_NORM_KIND_LEVY = 1,
} LlNormKind;

// Compact Lyapunov norm `q_x`.
typedef struct LlLyapunov LlLyapunov;

// Truncated coordinate space.
typedef struct LlSpace LlSpace;

// Lévy triplet `(b, R, M)`.
typedef struct LlTriplet LlTriplet;

// A Monte Carlo estimate.
typedef struct LlEstimate {
  double mean;
  double stderr;
  uint64_t n;
  double confidence;
  double bias;
} LlEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *ll_last_error(void);

// Library version as a static NUL-terminated string.
const char *ll_version(void);

// Builds a space of `dim` coordinates. `weights` names the weight family
// ("4^-n" or "sine"); null selects the default.
//
// # Safety
// `weights` is null or a NUL-terminated string; `out` is writable.
enum LlStatus ll_space_new(size_t dim, const char *weights, struct LlSpace **out);

// # Safety
// `space` is null or came from [`ll_space_new`] and is not used again.
void ll_space_free(struct LlSpace *space);

// # Safety
// `space` is a live handle; `out` is writable.
enum LlStatus ll_space_dim(const struct LlSpace *space, size_t *out);

// Weight `λ_k`, zero-based.
//
// # Safety
// `space` is a live handle; `out` is writable.
enum LlStatus ll_space_weight(const struct LlSpace *space, size_t k, double *out);

// Standard Brownian motion on `dim` coordinates.
//
// # Safety
// `out` is writable.
enum LlStatus ll_triplet_brownian(size_t dim, struct LlTriplet **out);

// Drift and diagonal Gaussian variance, both of length `dim`, plus
// optional point-mass jumps: `n_atoms` atoms stored row-major in `atoms`
// (`n_atoms * dim` values) with total intensity `intensity`. Pass
// `n_atoms = 0` for no jumps.
//
// # Safety
// Each non-null array holds the stated number of values; `out` is writable.
enum LlStatus ll_triplet_new(size_t dim,
                             const double *drift,
                             const double *variance,
                             double intensity,
                             const double *atoms,
                             size_t n_atoms,
                             struct LlTriplet **out);

// # Safety
// `triplet` is null or a handle that is not used again.
void ll_triplet_free(struct LlTriplet *triplet);

// Estimates `E <ξ, X_t>²` from the origin.
//
// # Safety
// `triplet` is live; `xi` holds `len` values; `out` is writable.
enum LlStatus ll_second_moment(const struct LlTriplet *triplet,
                               const double *xi,
                               size_t len,
                               double t,
                               uint64_t samples,
                               uint64_t seed,
                               struct LlEstimate *out);

// Canonical compact Lyapunov norm on `space`.
//
// # Safety
// `space` is live; `out` is writable.
enum LlStatus ll_lyapunov_new(const struct LlSpace *space,
                              enum LlNormKind kind,
                              struct LlLyapunov **out);

// # Safety
// `norm` is null or a handle that is not used again.
void ll_lyapunov_free(struct LlLyapunov *norm);

// `q_x(z)²`.
//
// # Safety
// `norm` is live; `z` holds `len` values; `out` is writable.
enum LlStatus ll_lyapunov_q_sq(const struct LlLyapunov *norm,
                               const double *z,
                               size_t len,
                               double *out);

// Estimates `v_0(z) = U_1 q_x²(z)`.
//
// # Safety
// Handles are live; `z` holds `len` values; `out` is writable.
enum LlStatus ll_v0_estimate(const struct LlLyapunov *norm,
                             const struct LlTriplet *triplet,
                             const double *z,
                             size_t len,
                             uint64_t samples,
                             uint64_t seed,
                             struct LlEstimate *out);

// Runs a suite config and writes `summary.csv` and `run.json` into
// `out_dir`. `exit_code` receives the CLI exit code (0 all as expected,
// 1 failures present).
//
// # Safety
// Strings are NUL-terminated; `exit_code` is writable.
enum LlStatus ll_run_config(const char *config_path,
                            const char *out_dir,
                            double samples_scale,
                            int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEVYLAB_H */

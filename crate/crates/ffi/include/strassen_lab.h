#ifndef STRASSEN_LAB_H
#define STRASSEN_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_INVALID_ARGUMENT = 1,
  SL_STATUS_INVALID_DISTRIBUTION = 2,
  SL_STATUS_DIMENSION_MISMATCH = 3,
  SL_STATUS_ALPHABET_MISMATCH = 4,
  SL_STATUS_SIZE_GUARD = 5,
  SL_STATUS_INFEASIBLE = 6,
  SL_STATUS_NULL_POINTER = 7,
  SL_STATUS_PANIC = 8,
} SlStatus;

// Cost matrix.
typedef struct SlCost SlCost;

// Probability distribution on a finite alphabet.
typedef struct SlDist SlDist;

// Type-lattice instance for a fixed `n`, reusable across thresholds.
typedef struct SlNested SlNested;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *sl_last_error(void);

// Distribution from `len` masses.
//
// # Safety
// `mass` must point to `len` readable doubles; `out` must be writable.
enum SlStatus sl_dist_new(const double *mass, size_t len, struct SlDist **out);

// Bernoulli distribution `[a, 1 - a]`.
//
// # Safety
// `out` must be writable.
enum SlStatus sl_dist_binary(double a, struct SlDist **out);

// # Safety
// `d` must come from `sl_dist_new`/`sl_dist_binary` and not be freed twice.
void sl_dist_free(struct SlDist *d);

// Cost matrix from `rows * cols` doubles in row-major order.
//
// # Safety
// `data` must point to `rows * cols` readable doubles; `out` must be writable.
enum SlStatus sl_cost_new(const double *data, size_t rows, size_t cols, struct SlCost **out);

// Hamming cost on a `k`-letter alphabet.
//
// # Safety
// `out` must be writable.
enum SlStatus sl_cost_hamming(size_t k, struct SlCost **out);

// # Safety
// `c` must come from `sl_cost_new`/`sl_cost_hamming` and not be freed twice.
void sl_cost_free(struct SlCost *c);

// Optimal transport cost `E(P_X, P_Y)`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum SlStatus sl_ot_cost(const struct SlDist *px,
                         const struct SlDist *py,
                         const struct SlCost *c,
                         double *out);

// Single-letter excess-cost probability `G_α(P_X, P_Y)`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum SlStatus sl_ecp(const struct SlDist *px,
                     const struct SlDist *py,
                     const struct SlCost *c,
                     double alpha,
                     double *out);

// Builds the type-lattice instance for block length `n`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum SlStatus sl_nested_new(const struct SlDist *px,
                            const struct SlDist *py,
                            const struct SlCost *c,
                            size_t n,
                            struct SlNested **out);

// `G_α(P_X^n, P_Y^n)` and `1 - G`, the latter accurate even when `G` is
// within rounding of one. Either out-pointer may be null.
//
// # Safety
// `nested` must be live; non-null out-pointers must be writable.
enum SlStatus sl_nested_gn(const struct SlNested *nested,
                           double alpha,
                           double *g,
                           double *one_minus_g);

// # Safety
// `nested` must come from `sl_nested_new` and not be freed twice.
void sl_nested_free(struct SlNested *nested);

// Lower-tail rate `f(α)` for Bernoulli marginals under Hamming cost.
//
// # Safety
// `out` must be writable.
enum SlStatus sl_rate_f_binary(double a, double b, double alpha, double *out);

// Upper-tail rate `g(α)` for Bernoulli marginals under Hamming cost.
//
// # Safety
// `out` must be writable.
enum SlStatus sl_rate_g_binary(double a, double b, double alpha, double *out);

// Gaussian limit `Λ_Δ` for Bernoulli marginals.
//
// # Safety
// `out` must be writable.
enum SlStatus sl_lambda_binary(double a, double b, double delta, double *out);

// Moderate-deviation rate below the transport cost (`delta < 0`).
//
// # Safety
// Handles must be live; `out` must be writable.
enum SlStatus sl_mdp_rate_lower(const struct SlDist *px,
                                const struct SlDist *py,
                                const struct SlCost *c,
                                double delta,
                                double *out);

// Moderate-deviation rate above the transport cost (`delta > 0`).
//
// # Safety
// Handles must be live; `out` must be writable.
enum SlStatus sl_mdp_rate_upper(const struct SlDist *px,
                                const struct SlDist *py,
                                const struct SlCost *c,
                                double delta,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRASSEN_LAB_H */

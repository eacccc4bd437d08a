#ifndef KREIN_H
#define KREIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KreinStatus {
  KREIN_STATUS_OK = 0,
  // Input rejected: bad shape, non-positive values, not in the three-spectra class.
  KREIN_STATUS_INVALID_INPUT = 1,
  // Numerical failure: tolerance unreachable, precision exhausted, positivity lost.
  KREIN_STATUS_NUMERICAL = 2,
  KREIN_STATUS_NULL_POINTER = 3,
  // Output buffer smaller than the object.
  KREIN_STATUS_BUFFER_TOO_SMALL = 4,
  KREIN_STATUS_PANIC = 5,
} KreinStatus;

// Finite spectral measure.
typedef struct KreinMeasure KreinMeasure;

// Finite Stieltjes string.
typedef struct KreinString KreinString;

// Three spectra with couplings.
typedef struct KreinTriple KreinTriple;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty if none. Valid until the next call
// into this library from the same thread.
const char *krein_last_error(void);

// String with `n` masses at `positions` on `(a, b)`.
//
// # Safety
// `positions` and `masses` must point to `n` readable doubles; `out` must be writable.
enum KreinStatus krein_string_new(double a,
                                  double b,
                                  const double *positions,
                                  const double *masses,
                                  size_t n,
                                  struct KreinString **out);

// # Safety
// `s` must come from this library and not be used afterwards; null is ignored.
void krein_string_free(struct KreinString *s);

// Number of masses, or 0 for null.
//
// # Safety
// `s` must be null or a live handle.
size_t krein_string_len(const struct KreinString *s);

// Copies positions and masses into buffers of `capacity` doubles each.
//
// # Safety
// `s` must be a live handle; the buffers must hold `capacity` doubles.
enum KreinStatus krein_string_get(const struct KreinString *s,
                                  double *positions,
                                  double *masses,
                                  size_t capacity);

// Spectral data: eigenvalues, norming constants `γ²`, couplings and signs `θ`, each
// written to a buffer of `capacity` entries. `len` receives the number of eigenvalues.
//
// # Safety
// `s` must be a live handle; the buffers must hold `capacity` entries.
enum KreinStatus krein_spectral_data(const struct KreinString *s,
                                     double *lambdas,
                                     double *gamma_sq,
                                     double *couplings,
                                     uint8_t *theta,
                                     size_t capacity,
                                     size_t *len);

// Measure with `n` atoms `weights[k] δ_{lambdas[k]}`, for strings on `(a, b)`.
//
// # Safety
// `lambdas` and `weights` must point to `n` readable doubles; `out` must be writable.
enum KreinStatus krein_measure_new(double a,
                                   double b,
                                   const double *lambdas,
                                   const double *weights,
                                   size_t n,
                                   struct KreinMeasure **out);

// # Safety
// `m` must come from this library and not be used afterwards; null is ignored.
void krein_measure_free(struct KreinMeasure *m);

// # Safety
// `m` must be null or a live handle.
size_t krein_measure_len(const struct KreinMeasure *m);

// # Safety
// `m` must be a live handle; the buffers must hold `capacity` doubles.
enum KreinStatus krein_measure_get(const struct KreinMeasure *m,
                                   double *lambdas,
                                   double *weights,
                                   size_t capacity);

// Spectral measure of a string.
//
// # Safety
// `s` must be a live handle; `out` must be writable.
enum KreinStatus krein_string_measure(const struct KreinString *s, struct KreinMeasure **out);

// String whose spectral measure is `m`. `precision_bits == 0` selects the automatic policy.
//
// # Safety
// `m` must be a live handle; `out` must be writable.
enum KreinStatus krein_invert_measure(const struct KreinMeasure *m,
                                      size_t precision_bits,
                                      struct KreinString **out);

// Triple on `(a, b)` split at `c`; `coupling_lambdas[k]` carries `coupling_values[k]`.
//
// # Safety
// Every array must hold the stated number of readable doubles; `out` must be writable.
enum KreinStatus krein_triple_new(double a,
                                  double b,
                                  double c,
                                  const double *sigma,
                                  size_t n_sigma,
                                  const double *sigma_a,
                                  size_t n_sigma_a,
                                  const double *sigma_b,
                                  size_t n_sigma_b,
                                  const double *coupling_lambdas,
                                  const double *coupling_values,
                                  size_t n_couplings,
                                  struct KreinTriple **out);

// # Safety
// `t` must come from this library and not be used afterwards; null is ignored.
void krein_triple_free(struct KreinTriple *t);

// Sizes of `σ`, `σ_a`, `σ_b` and the coupling list.
//
// # Safety
// `t` must be a live handle; `sizes` must hold 4 entries.
enum KreinStatus krein_triple_sizes(const struct KreinTriple *t, size_t *sizes);

// Copies the three spectra and the couplings; each buffer holds `capacity` doubles.
//
// # Safety
// `t` must be a live handle; the buffers must hold `capacity` doubles.
enum KreinStatus krein_triple_get(const struct KreinTriple *t,
                                  double *sigma,
                                  double *sigma_a,
                                  double *sigma_b,
                                  double *coupling_lambdas,
                                  double *coupling_values,
                                  size_t capacity);

// Three spectra of a string split at `c`.
//
// # Safety
// `s` must be a live handle; `out` must be writable.
enum KreinStatus krein_three_spectra(const struct KreinString *s,
                                     double c,
                                     struct KreinTriple **out);

// Writes 1 to `member` for class members and 0 otherwise.
//
// # Safety
// `t` must be a live handle; `member` must be writable.
enum KreinStatus krein_validate_triple(const struct KreinTriple *t, int32_t *member);

// String reproducing the triple. `precision_bits == 0` selects the automatic policy.
//
// # Safety
// `t` must be a live handle; `out` must be writable.
enum KreinStatus krein_invert_triple(const struct KreinTriple *t,
                                     size_t precision_bits,
                                     struct KreinString **out);

// Weak-star distance between two strings on the same interval.
//
// # Safety
// Both handles must be live; `out` must be writable.
enum KreinStatus krein_weakstar_distance(const struct KreinString *s1,
                                         const struct KreinString *s2,
                                         double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* KREIN_H */

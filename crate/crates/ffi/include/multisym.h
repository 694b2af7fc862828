#ifndef MULTISYM_H
#define MULTISYM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsymStatus {
  MSYM_STATUS_OK = 0,
  MSYM_STATUS_NULL_POINTER = 1,
  MSYM_STATUS_INVALID_ARGUMENT = 2,
  MSYM_STATUS_INVALID_UTF8 = 3,
  MSYM_STATUS_UNSUPPORTED = 4,
  MSYM_STATUS_NO_CONVERGENCE = 5,
  MSYM_STATUS_SINGULAR_MATRIX = 6,
  MSYM_STATUS_IO = 7,
  MSYM_STATUS_INTERNAL = 8,
} MsymStatus;

// Opaque Lagrangian density.
typedef struct MsymModel MsymModel;

typedef struct MsymSimulationSummary {
  size_t steps;
  size_t rows;
  size_t max_newton_iterations;
  double energy_initial;
  double energy_rel_drift;
  double momentum_rel_drift;
  double max_div_residual;
} MsymSimulationSummary;

typedef struct MsymPatternSummary {
  size_t dim;
  size_t index;
  bool degenerate;
  double determinant;
  double asymmetry;
  double closure;
} MsymPatternSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Crate version as a static NUL-terminated string.
const char *msym_version(void);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *msym_last_error_message(void);

// Built-in model by name (`nonlinear_wave`, `elliptic_pattern`,
// `mechanics`, `harmonic_oscillator`) and potential string, e.g.
// `"sine_gordon"` or `"duffing(-1, 0.5)"`.
//
// # Safety
// `name` and `potential` must be NUL-terminated strings; `out` must be
// writable.
enum MsymStatus msym_model_new(const char *name,
                               size_t n_space,
                               size_t fiber_dim,
                               const char *potential,
                               struct MsymModel **out);

// # Safety
// `model` must come from `msym_model_new` and not be used afterwards.
void msym_model_free(struct MsymModel *model);

// # Safety
// `model` must be valid; the outputs must be writable.
enum MsymStatus msym_model_dims(const struct MsymModel *model, size_t *n_space, size_t *fiber_dim);

// `p_A^μ = ∂L/∂v^A_μ` and `p = L − p·v` at the jet `(x, y, v)`.
//
// # Safety
// `x` has `n+1` entries, `y` has `N`, `v` and `p_out` have `N(n+1)`;
// `p_affine_out` may be null.
enum MsymStatus msym_legendre(const struct MsymModel *model,
                              const double *x,
                              const double *y,
                              const double *v,
                              double *p_out,
                              double *p_affine_out);

// Jet `v` with `∂L/∂v = p` by Newton iteration.
//
// # Safety
// Array lengths as for `msym_legendre`.
enum MsymStatus msym_invert_legendre(const struct MsymModel *model,
                                     const double *x,
                                     const double *y,
                                     const double *p,
                                     double *v_out);

// # Safety
// Array lengths as for `msym_legendre`.
enum MsymStatus msym_hamiltonian(const struct MsymModel *model,
                                 const double *x,
                                 const double *y,
                                 const double *p,
                                 double *h_out);

// `H` with `∂H/∂x` (`n+1`), `∂H/∂y` (`N`) and `∂H/∂p` (`N(n+1)`). Any
// output may be null.
//
// # Safety
// Non-null pointers must have the stated lengths.
enum MsymStatus msym_hamiltonian_partials(const struct MsymModel *model,
                                          const double *x,
                                          const double *y,
                                          const double *p,
                                          double *h_out,
                                          double *dh_dx_out,
                                          double *dh_dy_out,
                                          double *dh_dp_out);

// Writes the `n+1` structure matrices, each `d × d` row-major with
// `d = N(n+2)`, into `out` (`capacity` entries). `*d_out` receives `d`
// even when `out` is null, so the call can size the buffer first.
//
// # Safety
// `out`, when non-null, must hold `capacity` entries.
enum MsymStatus msym_structure_matrices(size_t n_space,
                                        size_t fiber_dim,
                                        int32_t *out,
                                        size_t capacity,
                                        size_t *d_out);

// Runs a simulation from TOML text (null for the default kink run),
// optionally writing the diagnostics CSV to `csv_path`.
//
// # Safety
// Strings must be NUL-terminated or null; `out` must be writable.
enum MsymStatus msym_simulate_config(const char *config_toml,
                                     const char *csv_path,
                                     struct MsymSimulationSummary *out);

// Pattern index about `(amplitude, k)` with `k[free_index]` solved.
// `k_out` and `levels_out` take `n+1` entries, `hessian_out` `(n+1)²`
// row-major; each may be null.
//
// # Safety
// `k` has `k_len = n+1` entries; non-null outputs have the stated sizes.
enum MsymStatus msym_pattern_index(const struct MsymModel *model,
                                   const double *k,
                                   size_t k_len,
                                   double amplitude,
                                   size_t free_index,
                                   double *k_out,
                                   double *levels_out,
                                   double *hessian_out,
                                   struct MsymPatternSummary *summary_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTISYM_H */

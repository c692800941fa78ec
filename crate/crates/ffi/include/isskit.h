#ifndef ISSKIT_H
#define ISSKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum IsskitStatus {
  ISSKIT_STATUS_OK = 0,
  ISSKIT_STATUS_NULL_POINTER = 1,
  ISSKIT_STATUS_INVALID_UTF8 = 2,
  ISSKIT_STATUS_INVALID_ARGUMENT = 3,
  ISSKIT_STATUS_INVALID_JSON = 4,
  ISSKIT_STATUS_SHAPE_MISMATCH = 5,
  ISSKIT_STATUS_NOT_HURWITZ = 6,
  ISSKIT_STATUS_SMALL_GAIN_VIOLATED = 7,
  ISSKIT_STATUS_NUMERICAL = 8,
  ISSKIT_STATUS_IO = 9,
  ISSKIT_STATUS_PANIC = 10,
} IsskitStatus;

// Gain matrix handle.
typedef struct IsskitGainMatrix IsskitGainMatrix;

// Comparison function handle.
typedef struct IsskitKFun IsskitKFun;

// Discretized system handle.
typedef struct IsskitModel IsskitModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *isskit_version(void);

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *isskit_last_error(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed; null is ignored.
void isskit_string_free(char *s);

// `k(r) = coeff · r^expo`.
//
// # Safety
// `out` must be a valid pointer.
enum IsskitStatus isskit_kfun_power(double coeff, double expo, struct IsskitKFun **out);

// Parses a comparison function from its JSON form.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum IsskitStatus isskit_kfun_from_json(const char *text, struct IsskitKFun **out);

// # Safety
// `k` must be a live handle and `out` a valid pointer.
enum IsskitStatus isskit_kfun_eval(const struct IsskitKFun *k, double r, double *out);

// `outer ∘ inner` as a new handle.
//
// # Safety
// Both handles must be live and `out` a valid pointer.
enum IsskitStatus isskit_kfun_compose(const struct IsskitKFun *outer,
                                      const struct IsskitKFun *inner,
                                      struct IsskitKFun **out);

// Inverse function as a new handle.
//
// # Safety
// `k` must be a live handle and `out` a valid pointer.
enum IsskitStatus isskit_kfun_invert(const struct IsskitKFun *k, struct IsskitKFun **out);

// # Safety
// `k` must come from this library and not have been freed; null is ignored.
void isskit_kfun_free(struct IsskitKFun *k);

// Empty `n × n` gain matrix.
//
// # Safety
// `out` must be a valid pointer.
enum IsskitStatus isskit_gains_new(size_t n, struct IsskitGainMatrix **out);

// Parses a gain matrix from JSON (1-based `from`/`to` node labels).
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum IsskitStatus isskit_gains_from_json(const char *text, struct IsskitGainMatrix **out);

// Sets the gain from node `j` into node `i` to a copy of `k`.
//
// # Safety
// Both handles must be live.
enum IsskitStatus isskit_gains_set(struct IsskitGainMatrix *g,
                                   size_t i,
                                   size_t j,
                                   const struct IsskitKFun *k);

// Cycle small-gain check. Writes the verdict to `holds` and, when
// `certificate_json` is non-null, the certificate as a JSON string.
//
// # Safety
// `g` must be a live handle, `holds` a valid pointer, and
// `certificate_json` null or a valid pointer.
enum IsskitStatus isskit_small_gain_check(const struct IsskitGainMatrix *g,
                                          bool *holds,
                                          char **certificate_json);

// Builds `σ(t) = MAX{a t, Γ(a t), …}` and verifies it at `r_samples` radii.
// Returns `SmallGainViolated` when the cycle condition fails. `path_json`
// receives the verified path.
//
// # Safety
// `g` must be live, `a` must hold `n` values, and `verified`/`path_json`
// must be valid pointers.
enum IsskitStatus isskit_omega_path(const struct IsskitGainMatrix *g,
                                    const double *a,
                                    size_t n,
                                    size_t r_samples,
                                    bool *verified,
                                    char **path_json);

// # Safety
// `g` must come from this library and not have been freed; null is ignored.
void isskit_gains_free(struct IsskitGainMatrix *g);

// Discretizes a system spec (JSON) on `(0, d)` with `n_interior` points.
//
// # Safety
// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
enum IsskitStatus isskit_model_new(const char *spec_json,
                                   double d,
                                   size_t n_interior,
                                   struct IsskitModel **out);

// Number of species and of nodes per species.
//
// # Safety
// `m` must be live and both out pointers valid.
enum IsskitStatus isskit_model_shape(const struct IsskitModel *m, size_t *species, size_t *nodes);

// Largest real part of the spectrum of the discretized linear part.
//
// # Safety
// `m` must be live and `out` valid.
enum IsskitStatus isskit_model_spectral_abscissa(const struct IsskitModel *m, double *out);

// Simulates from `x0` (species-major, `species · nodes` values) with zero
// input to `t_end` and writes the final state into `x_out`. `dt ≤ 0` picks
// the default step. `blowup` receives whether the run was halted.
//
// # Safety
// `m` must be live; `x0` and `x_out` must each hold `len` values.
enum IsskitStatus isskit_model_simulate(const struct IsskitModel *m,
                                        const double *x0,
                                        double *x_out,
                                        size_t len,
                                        double t_end,
                                        double dt,
                                        bool *blowup);

// # Safety
// `m` must come from this library and not have been freed; null is ignored.
void isskit_model_free(struct IsskitModel *m);

// Solves `RᵀP + PR = −I` for a Hurwitz `n × n` matrix `r` (row-major) and
// writes `P` (row-major) and the residual `‖RᵀP + PR + I‖_max`.
//
// # Safety
// `r` and `p` must each hold `n · n` values; `residual` must be valid.
enum IsskitStatus isskit_solve_lyapunov(const double *r, size_t n, double *p, double *residual);

// Runs a worked example with default parameters and writes its artifacts
// under `out_dir/<id>/`. `verdict` receives the overall verdict and
// `report_json`, when non-null, the report.
//
// # Safety
// `id` and `out_dir` must be NUL-terminated strings; `verdict` must be
// valid; `report_json` null or valid.
enum IsskitStatus isskit_run_example(const char *id,
                                     const char *out_dir,
                                     uint64_t seed,
                                     size_t n_interior,
                                     bool *verdict,
                                     char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISSKIT_H */

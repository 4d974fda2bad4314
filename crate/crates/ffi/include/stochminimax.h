#ifndef STOCHMINIMAX_H
#define STOCHMINIMAX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SmxStatus {
  SMX_STATUS_OK = 0,
  SMX_STATUS_NULL_POINTER = 1,
  SMX_STATUS_INVALID_ARGUMENT = 2,
  SMX_STATUS_DIMENSION_MISMATCH = 3,
  SMX_STATUS_SINGULAR = 4,
  SMX_STATUS_INDEFINITE_SCENARIO = 5,
  SMX_STATUS_NOT_CONVERGED = 6,
  SMX_STATUS_PARSE = 7,
  SMX_STATUS_IO = 8,
  SMX_STATUS_CONFIG = 9,
  SMX_STATUS_PANIC = 10,
} SmxStatus;

typedef struct SmxProblem SmxProblem;

typedef struct SmxTrace SmxTrace;

typedef struct SmxDims {
  size_t n1;
  size_t m1;
  size_t n2;
  size_t m2;
  size_t l2;
  size_t s2;
} SmxDims;

// Subset of the solver configuration; nonpositive step sizes select the
// library defaults.
typedef struct SmxSolverOptions {
  double beta_x;
  double beta_y;
  double resval_tol;
  double newton_tol_cap;
  size_t max_outer_iters;
  int parallel;
} SmxSolverOptions;

typedef struct SmxTraceRecord {
  size_t k;
  double resval;
  double delta;
  double epsilon;
  double objective;
  size_t newton_iters;
} SmxTraceRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call into the library on this thread.
const char *smx_last_error_message(void);

struct SmxDims smx_default_dims(void);

struct SmxSolverOptions smx_solver_options_default(void);

// Generates an instance and `n` scenarios.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum SmxStatus smx_problem_generate(struct SmxDims dims,
                                    double tau,
                                    double lb,
                                    double ub,
                                    size_t n,
                                    uint64_t instance_seed,
                                    uint64_t scenario_seed,
                                    struct SmxProblem **out);

// Parses a problem serialized by `smx_problem_to_json` or the CLI `gen`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SmxStatus smx_problem_from_json(const char *json, struct SmxProblem **out);

// Serializes a problem; free the string with `smx_string_free`.
//
// # Safety
// `problem` must be a live handle and `out` writable.
enum SmxStatus smx_problem_to_json(const struct SmxProblem *problem, char **out);

// # Safety
// `s` must come from this library or be null.
void smx_string_free(char *s);

// # Safety
// `problem` must be a handle from this library (or null) and not used afterwards.
void smx_problem_free(struct SmxProblem *problem);

// # Safety
// `problem` must be a live handle and `out` writable.
enum SmxStatus smx_problem_dims(const struct SmxProblem *problem, struct SmxDims *out);

// Number of scenarios, or 0 for a null handle.
//
// # Safety
// `problem` must be a live handle or null.
size_t smx_problem_num_scenarios(const struct SmxProblem *problem);

// Solves scenario `index` at `(x1, y1)` from a cold start. `mu_out`
// receives `(x₂, y₂, π_x, π_y)` and must hold `n2 + m2 + l2 + s2` values;
// `iterations` and `residual` may be null.
//
// # Safety
// Array pointers must be valid for their stated lengths.
enum SmxStatus smx_solve_scenario(const struct SmxProblem *problem,
                                  size_t index,
                                  const double *x1,
                                  size_t n1,
                                  const double *y1,
                                  size_t m1,
                                  double tol,
                                  double *mu_out,
                                  size_t mu_len,
                                  size_t *iterations,
                                  double *residual);

// `ψ_N(x₁, y₁)` with second stages solved to `tol`.
//
// # Safety
// Array pointers must be valid for their stated lengths; `out` writable.
enum SmxStatus smx_saa_objective(const struct SmxProblem *problem,
                                 const double *x1,
                                 size_t n1,
                                 const double *y1,
                                 size_t m1,
                                 double tol,
                                 double *out);

// Runs IPPGDA from `(x0, y0)`. `options` may be null for defaults.
//
// # Safety
// Array pointers must be valid for their stated lengths; `out` writable.
enum SmxStatus smx_run_ippgda(const struct SmxProblem *problem,
                              const double *x0,
                              size_t n1,
                              const double *y0,
                              size_t m1,
                              const struct SmxSolverOptions *options,
                              struct SmxTrace **out);

// Number of records, or 0 for a null handle.
//
// # Safety
// `trace` must be a live handle or null.
size_t smx_trace_len(const struct SmxTrace *trace);

// 1 if the run met the Res.val tolerance, 0 otherwise (including null).
//
// # Safety
// `trace` must be a live handle or null.
int smx_trace_converged(const struct SmxTrace *trace);

// # Safety
// `trace` must be a live handle and `out` writable.
enum SmxStatus smx_trace_record(const struct SmxTrace *trace, size_t i, struct SmxTraceRecord *out);

// Copies the final iterate into `x1` (length n1) and `y1` (length m1).
//
// # Safety
// Array pointers must be valid for their stated lengths.
enum SmxStatus smx_trace_solution(const struct SmxTrace *trace,
                                  double *x1,
                                  size_t n1,
                                  double *y1,
                                  size_t m1);

// Writes the trace CSV (`k,resval,delta,objective,newton_iters`).
//
// # Safety
// `trace` must be a live handle and `path` a NUL-terminated string.
enum SmxStatus smx_trace_write_csv(const struct SmxTrace *trace, const char *path);

// # Safety
// `trace` must be a handle from this library (or null) and not used afterwards.
void smx_trace_free(struct SmxTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOCHMINIMAX_H */

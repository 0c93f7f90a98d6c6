#ifndef WHITNEY_DESCENT_H
#define WHITNEY_DESCENT_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WdStatus {
  WD_STATUS_OK = 0,
  WD_STATUS_NULL_POINTER = 1,
  WD_STATUS_INVALID_UTF8 = 2,
  WD_STATUS_INVALID_ARGUMENT = 3,
  WD_STATUS_BUFFER_TOO_SMALL = 4,
  WD_STATUS_IO = 5,
  WD_STATUS_PARSE = 6,
  WD_STATUS_TRIANGULAR = 7,
  WD_STATUS_GEOMETRY = 8,
  WD_STATUS_START_OFF_MANIFOLD = 9,
  WD_STATUS_PROJECTION_FAILED = 10,
  WD_STATUS_DESCENT = 11,
  WD_STATUS_CONSTRAINT_CHECK = 12,
  WD_STATUS_PANIC = 13,
} WdStatus;

typedef enum WdPollEvent {
  WD_POLL_EVENT_SUCCESS = 0,
  WD_POLL_EVENT_UNSUCCESSFUL = 1,
  WD_POLL_EVENT_REBASE = 2,
} WdPollEvent;

/**
 * A validated problem: constraints, partition, objective and start point.
 */
typedef struct WdProblem WdProblem;

/**
 * Outcome of one descent run.
 */
typedef struct WdRunResult WdRunResult;

typedef struct WdProjectionConfig {
  double residual_tol;
  size_t max_iters;
  double oracle_radius;
  double divergence_factor;
} WdProjectionConfig;

/**
 * `c_forcing <= 0` selects the default `1e-4 (1 + |f(p0)|)`;
 * `alpha_max` may be `INFINITY`.
 */
typedef struct WdDescentConfig {
  double alpha0;
  double alpha_max;
  double theta;
  double gamma;
  double c_forcing;
  size_t max_iters;
  uint64_t seed;
  double alpha_min;
  size_t convergence_window;
  struct WdProjectionConfig projection;
} WdDescentConfig;

/**
 * Objective over ambient coordinates: `f(z, n, user_data)`.
 */
typedef double (*WdObjectiveFn)(const double *z, size_t n, void *user_data);

typedef struct WdTraceRecord {
  size_t j;
  double alpha;
  double f;
  enum WdPollEvent event;
} WdTraceRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Fills `out` with the default projection settings.
 */
enum WdStatus wd_projection_config_default(struct WdProjectionConfig *out);

/**
 * Fills `out` with the default descent settings.
 */
enum WdStatus wd_descent_config_default(struct WdDescentConfig *out);

/**
 * Parses and validates a problem given as text. `cfg` may be null.
 */
enum WdStatus wd_problem_parse(const char *text,
                               const struct WdProjectionConfig *cfg,
                               struct WdProblem **out);

/**
 * Reads, parses and validates a problem file. `cfg` may be null.
 */
enum WdStatus wd_problem_load(const char *path,
                              const struct WdProjectionConfig *cfg,
                              struct WdProblem **out);

void wd_problem_free(struct WdProblem *problem);

/**
 * Number of ambient variables, or 0 for a null handle.
 */
size_t wd_problem_num_vars(const struct WdProblem *problem);

/**
 * Number of retained (reduced) coordinates, or 0 for a null handle.
 */
size_t wd_problem_reduced_dim(const struct WdProblem *problem);

/**
 * Manifold dimension, or 0 for a null handle.
 */
size_t wd_problem_manifold_dim(const struct WdProblem *problem);

/**
 * Copies the (projected) start point in retained coordinates.
 */
enum WdStatus wd_problem_start(const struct WdProblem *problem, double *out, size_t out_len);

/**
 * Lifts a reduced point to ambient coordinates. `warm` (eliminated
 * variables only) may be null.
 */
enum WdStatus wd_lift(const struct WdProblem *problem,
                      const double *reduced,
                      size_t reduced_len,
                      const double *warm,
                      size_t warm_len,
                      double *out,
                      size_t out_len);

/**
 * Projects the tangent step `w` taken at `base` back onto the reduced
 * manifold; `WD_STATUS_PROJECTION_FAILED` is the oracle saying no.
 */
enum WdStatus wd_project(const struct WdProblem *problem,
                         const double *base,
                         size_t base_len,
                         const double *w,
                         size_t w_len,
                         double *out,
                         size_t out_len);

/**
 * Runs descent from the problem's start point. With a null `objective`
 * the problem file's polynomial objective is used and `user_data` is
 * ignored. `cfg` may be null for defaults.
 */
enum WdStatus wd_run(const struct WdProblem *problem,
                     const struct WdDescentConfig *cfg,
                     WdObjectiveFn objective,
                     void *user_data,
                     struct WdRunResult **out);

void wd_run_result_free(struct WdRunResult *result);

size_t wd_run_result_iterations(const struct WdRunResult *result);

bool wd_run_result_converged(const struct WdRunResult *result);

/**
 * Final objective value, NaN for a null handle.
 */
double wd_run_result_final_value(const struct WdRunResult *result);

double wd_run_result_final_alpha(const struct WdRunResult *result);

enum WdStatus wd_run_result_final_reduced(const struct WdRunResult *result,
                                          double *out,
                                          size_t out_len);

enum WdStatus wd_run_result_final_ambient(const struct WdRunResult *result,
                                          double *out,
                                          size_t out_len);

/**
 * Summary of iteration `index`.
 */
enum WdStatus wd_run_result_record(const struct WdRunResult *result,
                                   size_t index,
                                   struct WdTraceRecord *out);

/**
 * Reduced point kept after iteration `index`.
 */
enum WdStatus wd_run_result_point(const struct WdRunResult *result,
                                  size_t index,
                                  double *out,
                                  size_t out_len);

/**
 * Machine-readable code of the last error on this thread, or null. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *wd_last_error_code(void);

/**
 * Human-readable message of the last error on this thread, or null.
 */
const char *wd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WHITNEY_DESCENT_H */

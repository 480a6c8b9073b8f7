#ifndef DOUBLEPHASE_H
#define DOUBLEPHASE_H

#include <stdbool.h>
#include <stddef.h>

typedef enum DpStatus {
  DP_STATUS_OK = 0,
  DP_STATUS_NULL_POINTER = 1,
  DP_STATUS_INVALID_UTF8 = 2,
  DP_STATUS_CONFIG = 3,
  DP_STATUS_LENGTH_MISMATCH = 4,
  DP_STATUS_NUMERICAL = 5,
  DP_STATUS_NOT_CONVERGED = 6,
  DP_STATUS_PANIC = 7,
} DpStatus;

typedef enum DpRootKind {
  DP_ROOT_KIND_TWO = 0,
  DP_ROOT_KIND_TANGENT = 1,
  DP_ROOT_KIND_NONE = 2,
} DpRootKind;

typedef enum DpNehariKind {
  DP_NEHARI_KIND_NOT_ON_NEHARI = 0,
  DP_NEHARI_KIND_PLUS = 1,
  DP_NEHARI_KIND_ZERO = 2,
  DP_NEHARI_KIND_MINUS = 3,
} DpNehariKind;

/**
 * Opaque handle.
 */
typedef struct DpModel DpModel;

typedef struct DpNorms {
  double custom;
  double one_p;
  double circ;
  double star;
} DpNorms;

/**
 * `t1` and `t2` are NaN unless `kind` is `Two`.
 */
typedef struct DpFiberRoots {
  enum DpRootKind kind;
  double t1;
  double t_circ;
  double t2;
} DpFiberRoots;

typedef struct DpBranchSummary {
  double energy;
  double residual;
  double min_value;
  bool converged;
} DpBranchSummary;

typedef struct DpSolveSummary {
  double lambda;
  struct DpBranchSummary plus;
  struct DpBranchSummary minus;
  bool sign_pattern_ok;
  bool positive;
} DpSolveSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or "" after a success.
 * The pointer stays valid until the next `dp_*` call on the same thread.
 */
const char *dp_last_error_message(void);

/**
 * Builds a model from TOML config text and stores it in `*out`.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DpStatus dp_model_new(const char *config_toml, struct DpModel **out);

/**
 * # Safety
 * `model` must come from [`dp_model_new`] and not be used afterwards.
 * Null is ignored.
 */
void dp_model_free(struct DpModel *model);

/**
 * Number of mesh nodes, 0 for a null model.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t dp_model_node_count(const struct DpModel *model);

/**
 * Writes the node coordinates as `x0, y0, x1, y1, ...` into `xy`, which
 * must hold `2 * node_count` values.
 *
 * # Safety
 * `model` must be a live handle and `xy` must point to `len` writable doubles.
 */
enum DpStatus dp_model_nodes(const struct DpModel *model, double *xy, size_t len);

/**
 * Θ_λ of the nodal function `values`.
 *
 * # Safety
 * `model` must be a live handle, `values` must point to `len` doubles and
 * `out` must be writable.
 */
enum DpStatus dp_energy(const struct DpModel *model,
                        const double *values,
                        size_t len,
                        double lambda,
                        double *out);

/**
 * # Safety
 * As for [`dp_energy`].
 */
enum DpStatus dp_norms(const struct DpModel *model,
                       const double *values,
                       size_t len,
                       struct DpNorms *out);

/**
 * # Safety
 * As for [`dp_energy`].
 */
enum DpStatus dp_fiber_roots(const struct DpModel *model,
                             const double *values,
                             size_t len,
                             double lambda,
                             struct DpFiberRoots *out);

/**
 * Nehari classification at the default tolerance.
 *
 * # Safety
 * As for [`dp_energy`].
 */
enum DpStatus dp_classify(const struct DpModel *model,
                          const double *values,
                          size_t len,
                          double lambda,
                          enum DpNehariKind *out);

/**
 * Computes both solutions at the configured λ. The nodal values are written
 * to `plus` and `minus` (each `len` doubles, either may be null) and the
 * summary to `*out`. Returns `NotConverged` when the sign pattern or
 * positivity fails; the outputs are filled in that case too.
 *
 * # Safety
 * `model` must be a live handle, `plus`/`minus` null or valid for `len`
 * writes, `out` writable.
 */
enum DpStatus dp_solve_two(const struct DpModel *model,
                           double *plus,
                           double *minus,
                           size_t len,
                           struct DpSolveSummary *out);

/**
 * Library version, a static NUL-terminated string.
 */
const char *dp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOUBLEPHASE_H */

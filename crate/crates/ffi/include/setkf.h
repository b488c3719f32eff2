#ifndef SETKF_H
#define SETKF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SetkfStatus {
  SETKF_STATUS_OK = 0,
  SETKF_STATUS_NULL_POINTER = 1,
  SETKF_STATUS_DIMENSION_MISMATCH = 2,
  SETKF_STATUS_NOT_POSITIVE_DEFINITE = 3,
  SETKF_STATUS_INVALID_ARGUMENT = 4,
  SETKF_STATUS_UNSTABLE_SYSTEM = 5,
  SETKF_STATUS_NO_CONVERGENCE = 6,
  SETKF_STATUS_INFEASIBLE = 7,
  SETKF_STATUS_NUMERICAL = 8,
  SETKF_STATUS_PANIC = 9,
} SetkfStatus;

typedef enum SetkfFilterKind {
  /**
   * Plain Kalman filter, every measurement delivered.
   */
  SETKF_FILTER_KIND_STANDARD = 0,
  /**
   * Open-loop stochastic trigger, weight `Y`.
   */
  SETKF_FILTER_KIND_OLSET = 1,
  /**
   * Closed-loop stochastic trigger on the innovation, weight `Z`.
   */
  SETKF_FILTER_KIND_CLSET = 2,
} SetkfFilterKind;

/**
 * Estimator state bound to a model and trigger.
 */
typedef struct SetkfFilter SetkfFilter;

/**
 * Validated plant.
 */
typedef struct SetkfModel SetkfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *setkf_last_error(void);

/**
 * Builds a model from row-major `A` (n x n), `C` (m x n), `Q` (n x n),
 * `R` (m x m) and `Sigma0` (n x n).
 *
 * # Safety
 * Every matrix pointer must reference the stated number of doubles and `out`
 * must be writable.
 */
enum SetkfStatus setkf_model_new(size_t n,
                                 size_t m,
                                 const double *a,
                                 const double *c,
                                 const double *q,
                                 const double *r,
                                 const double *sigma0,
                                 struct SetkfModel **out);

/**
 * # Safety
 * `model` must come from [`setkf_model_new`] and not be used afterwards.
 */
void setkf_model_free(struct SetkfModel *model);

/**
 * # Safety
 * `model` must be a live handle; `n` and `m` writable.
 */
enum SetkfStatus setkf_model_dims(const struct SetkfModel *model, size_t *n, size_t *m);

/**
 * Stationary state covariance (n x n) and output covariance (m x m) of a
 * stable plant.
 *
 * # Safety
 * `model` must be a live handle; outputs must hold n*n and m*m doubles.
 */
enum SetkfStatus setkf_steady_state(const struct SetkfModel *model,
                                    double *sigma_out,
                                    double *pi_out);

/**
 * Fixed point of the prior-covariance Riccati map with measurement noise
 * `w` (m x m).
 *
 * # Safety
 * `w` must hold m*m doubles and `out` n*n.
 */
enum SetkfStatus setkf_riccati_fixed_point(const struct SetkfModel *model,
                                           const double *w,
                                           double *out);

/**
 * Average transmission rate of the open-loop trigger with weight `y`.
 *
 * # Safety
 * `y` must hold m*m doubles; `rate` writable.
 */
enum SetkfStatus setkf_open_loop_rate(const struct SetkfModel *model,
                                      const double *y,
                                      double *rate);

/**
 * Asymptotic lower and upper bounds on the closed-loop transmission rate.
 *
 * # Safety
 * `z` must hold m*m doubles; `lower` and `upper` writable.
 */
enum SetkfStatus setkf_closed_loop_rate_bounds(const struct SetkfModel *model,
                                               const double *z,
                                               double *lower,
                                               double *upper);

/**
 * Sensor-side decision of a stochastic trigger. `v` is the measurement
 * (open loop) or the innovation (closed loop), `weight` its m x m weight and
 * `zeta` a uniform draw on [0, 1). Writes 1 to `transmit` when the packet is
 * sent.
 *
 * # Safety
 * `weight` must hold m*m doubles, `v` m doubles; `transmit` writable.
 */
enum SetkfStatus setkf_stochastic_trigger(size_t m,
                                          const double *weight,
                                          const double *v,
                                          double zeta,
                                          bool *transmit);

/**
 * Creates a filter at `k = 0` with prior `N(0, Sigma0)`. `weight` (m x m) is
 * `Y` for [`SetkfFilterKind::Olset`], `Z` for [`SetkfFilterKind::Clset`] and
 * ignored (may be null) for [`SetkfFilterKind::Standard`].
 *
 * # Safety
 * `model` must be a live handle, `weight` as described, `out` writable.
 */
enum SetkfStatus setkf_filter_new(const struct SetkfModel *model,
                                  enum SetkfFilterKind kind,
                                  const double *weight,
                                  struct SetkfFilter **out);

/**
 * # Safety
 * `filter` must come from [`setkf_filter_new`] and not be used afterwards.
 */
void setkf_filter_free(struct SetkfFilter *filter);

/**
 * Measurement update at the current step. Pass `arrived = false` and a null
 * `y` when no packet came; the absence is still informative for the
 * stochastic filters.
 *
 * # Safety
 * `filter` must be a live handle; `y` null or m doubles.
 */
enum SetkfStatus setkf_filter_measurement_update(struct SetkfFilter *filter,
                                                 bool arrived,
                                                 const double *y);

/**
 * Propagates the posterior to the next step's prior.
 *
 * # Safety
 * `filter` must be a live handle.
 */
enum SetkfStatus setkf_filter_time_update(struct SetkfFilter *filter);

/**
 * Predicted measurement `C x_prior` (m doubles); a sensor running the
 * closed-loop trigger subtracts it from `y` to form the innovation.
 *
 * # Safety
 * `filter` must be a live handle; `out` must hold m doubles.
 */
enum SetkfStatus setkf_filter_predicted_measurement(const struct SetkfFilter *filter, double *out);

/**
 * Prior mean (n) and covariance (n x n) at the current step. Either output
 * may be null to skip it.
 *
 * # Safety
 * `filter` must be a live handle; non-null outputs sized as stated.
 */
enum SetkfStatus setkf_filter_prior(const struct SetkfFilter *filter, double *mean, double *cov);

/**
 * Posterior mean (n) and covariance (n x n) after the last measurement
 * update. Either output may be null to skip it.
 *
 * # Safety
 * `filter` must be a live handle; non-null outputs sized as stated.
 */
enum SetkfStatus setkf_filter_posterior(const struct SetkfFilter *filter,
                                        double *mean,
                                        double *cov);

/**
 * Whether the open-loop weight `y` keeps the worst-case steady prior
 * covariance strictly below `delta0`. With `use_lmi` the answer comes from
 * the LMI certificate instead of the fixed-point comparison.
 *
 * # Safety
 * `y` must hold m*m doubles, `delta0` n*n; `feasible` writable.
 */
enum SetkfStatus setkf_design_feasible(const struct SetkfModel *model,
                                       const double *y,
                                       const double *delta0,
                                       bool use_lmi,
                                       bool *feasible);

/**
 * Smallest `theta` with `theta * I` meeting the covariance bound `delta0`.
 * `rate` receives the achieved rate (closed loop: its upper bound).
 *
 * # Safety
 * `delta0` must hold n*n doubles; `theta` and `rate` writable.
 */
enum SetkfStatus setkf_design_search(const struct SetkfModel *model,
                                     const double *delta0,
                                     bool closed_loop,
                                     double *theta,
                                     double *rate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SETKF_H */

#ifndef QHAHN_H
#define QHAHN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QhahnStatus {
  QhahnStatus_Ok = 0,
  QhahnStatus_NullPointer = 1,
  /**
   * Parameters outside the admissible region.
   */
  QhahnStatus_Domain = 2,
  /**
   * A series, quadrature or determinant failed to converge.
   */
  QhahnStatus_Convergence = 3,
  /**
   * Pole or branch-cut hit.
   */
  QhahnStatus_Singular = 4,
  /**
   * Internal invariant broken or panic caught.
   */
  QhahnStatus_Internal = 5,
} QhahnStatus;

/**
 * Opaque model handle.
 */
typedef struct QhahnModel QhahnModel;

/**
 * Scaling coefficients of a model at its `theta`.
 */
typedef struct QhahnCoefficients {
  double theta;
  double kappa;
  double f;
  double chi;
  double phi;
  double phi_prime;
  /**
   * Nonzero when `q <= nu < mu <= 1/2`.
   */
  int32_t munu_ok;
  /**
   * Nonzero when `theta` lies below its upper bound.
   */
  int32_t theta_ok;
} QhahnCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a model for `(q, mu, nu)` at `theta`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QhahnStatus qhahn_model_new(double q,
                                 double mu,
                                 double nu,
                                 double theta,
                                 struct QhahnModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`qhahn_model_new`] and not be used afterwards.
 */
void qhahn_model_free(struct QhahnModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum QhahnStatus qhahn_model_coefficients(const struct QhahnModel *model,
                                          struct QhahnCoefficients *out);

/**
 * One replica from step initial data: writes `X_N(floor tau(N,c))` and the
 * rescaled `xi_N`.
 *
 * # Safety
 * `model` must be a live handle; `out_x` and `out_xi` must be writable.
 */
enum QhahnStatus qhahn_simulate(const struct QhahnModel *model,
                                uint64_t n,
                                double c,
                                uint64_t seed,
                                uint64_t replica,
                                int64_t *out_x,
                                double *out_xi);

/**
 * `F_GUE(x)` by a Nystrom determinant of the given order.
 *
 * # Safety
 * `out` must be writable.
 */
enum QhahnStatus qhahn_f_gue(double x, uintptr_t order, double *out);

/**
 * `F_GUE(x)` from the cached interpolation table.
 *
 * # Safety
 * `out` must be writable.
 */
enum QhahnStatus qhahn_tw_cdf(double x, double *out);

/**
 * Exact `E[1/(zeta q^{X_N(tau)+N}; q)_inf]` and its Fredholm determinant
 * (real part) for `N <= 3`, `tau <= 6` and `zeta < 0`.
 *
 * # Safety
 * `model` must be a live handle; `out_lhs` and `out_det` must be writable.
 */
enum QhahnStatus qhahn_q_laplace(const struct QhahnModel *model,
                                 uintptr_t n,
                                 uint64_t tau,
                                 double zeta,
                                 double *out_lhs,
                                 double *out_det);

/**
 * Message of the last failure on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *qhahn_last_error(void);

/**
 * Static description of a status code.
 */
const char *qhahn_status_str(enum QhahnStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QHAHN_H */

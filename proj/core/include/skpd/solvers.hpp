#pragma once

#include <span>
#include <vector>

#include "skpd/linalg.hpp"

namespace skpd {

/**
 * Ridge-regularized least squares:
 *   argmin_b (1/2n)||y - X b||^2 + (ridge/2)||b||^2.
 * Solved by Cholesky on the scaled Gram matrix; falls back to a
 * column-pivoted QR of X when the Cholesky factor fails or its condition
 * estimate exceeds 1e12. Throws RankDeficientError (suggesting ridge 1/n)
 * when ridge == 0 and X does not have full column rank.
 */
Vector ols(const Matrix& design, const Vector& y, double ridge = 0.0);

/// sign(z) * max(|z| - t, 0)
inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

struct LassoOptions {
  double tol = 1e-7;          ///< max coordinate change per sweep
  double kkt_tol = 1e-6;      ///< relative stationarity violation
  int max_iter = 10000;       ///< sweeps (full or active-set)
  std::size_t covariance_limit = 4096;  ///< use covariance updates when cols <= this
  bool record_objective = false;
};

struct LassoResult {
  Vector coefficients;
  int iterations = 0;
  /// max_j of the stationarity violation divided by lambda, computed from the design.
  double kkt_residual = 0.0;
  bool converged = false;
  /// Objective after every sweep, only filled when LassoOptions::record_objective.
  std::vector<double> objective_trace;
};

/**
 * Coordinate descent for (1/2n)||y - X a||^2 + lambda ||a||_1.
 *
 * Coordinates are visited in ascending order. Gram columns are computed
 * lazily for coordinates that become nonzero (covariance updates) while the
 * column count is at most covariance_limit; wider designs use residual
 * updates. A non-converged run returns its last iterate with converged=false.
 */
LassoResult lasso_cd(const Matrix& design, const Vector& y, double lambda,
                     std::span<const double> warm = {}, const LassoOptions& opts = {});

double lasso_objective(const Matrix& design, const Vector& y, const Vector& a, double lambda);

/// Stationarity violation (relative to lambda) of a candidate Lasso solution.
double lasso_kkt_residual(const Matrix& design, const Vector& y, const Vector& a, double lambda);

/**
 * Nearest matrix with orthonormal columns: A (A^T A + eta I)^(-1/2).
 * A single column is simply divided by sqrt(||a||^2 + eta).
 * Throws SingularMatrixError when eta == 0 and A^T A is singular.
 */
Matrix orthonormalize(const Matrix& a_tilde, double eta = 0.0);

}  // namespace skpd

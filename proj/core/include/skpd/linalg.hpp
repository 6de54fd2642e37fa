#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "skpd/ndarray.hpp"

namespace skpd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row-major vectorization (last index fastest), the single vec convention used everywhere.
Vector vec_row_major(const NdArray& a);

/// Inverse of vec_row_major. Throws ShapeError when lengths disagree.
NdArray unvec(std::span<const double> v, const Dims& dims);
NdArray unvec(const Vector& v, const Dims& dims);

/// Kronecker product of two arrays of equal rank; output dims are elementwise products.
NdArray kron(const NdArray& a, const NdArray& b);

/// Copy between a rank-2 NdArray and an Eigen matrix.
Matrix to_matrix(const NdArray& a);
NdArray from_matrix(const Matrix& m);

struct SvdOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  /// Return the best iterate instead of throwing when max_iter is hit.
  bool allow_unconverged = false;
};

struct SingularSubspace {
  Matrix vectors;           ///< n x k, orthonormal columns
  Vector values;            ///< k singular values, non-increasing
  int iterations = 0;       ///< power iterations summed over all k vectors
  double residual = 0.0;    ///< worst relative eigen-residual reached
  bool converged = true;
};

/**
 * Top-k left singular vectors by power iteration with deflation on the
 * smaller Gram matrix (m^T m or m m^T). Each column's largest-magnitude
 * entry is made positive (ties go to the lowest index).
 *
 * Throws InvalidArgument for k outside [1, min(rows, cols)],
 * DegenerateDataError when the k-th singular value is zero, and
 * ConvergenceError when the budget runs out (unless allow_unconverged).
 */
SingularSubspace top_left_singular(const Matrix& m, int k, const SvdOptions& opts = {});

/// (s + ridge*I)^(-1/2) through a symmetric eigendecomposition.
/// Throws SingularMatrixError if s is not PSD or the shifted matrix is singular.
Matrix sym_inv_sqrt(const Matrix& s, double ridge);

}  // namespace skpd

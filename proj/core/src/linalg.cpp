#include "skpd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "skpd/error.hpp"

namespace skpd {

Vector vec_row_major(const NdArray& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i];
  return v;
}

NdArray unvec(std::span<const double> v, const Dims& dims) {
  if (v.size() != dims_product(dims)) {
    throw ShapeError("unvec: length " + std::to_string(v.size()) + " does not match dims " +
                     dims_to_string(dims));
  }
  return NdArray(dims, std::vector<double>(v.begin(), v.end()));
}

NdArray unvec(const Vector& v, const Dims& dims) {
  return unvec(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), dims);
}

NdArray kron(const NdArray& a, const NdArray& b) {
  if (a.rank() != b.rank()) {
    throw ShapeError("kron: rank " + std::to_string(a.rank()) + " vs " +
                     std::to_string(b.rank()));
  }
  const std::size_t rank = a.rank();
  Dims out_dims(rank);
  for (std::size_t ax = 0; ax < rank; ++ax) out_dims[ax] = a.dims()[ax] * b.dims()[ax];
  NdArray out(out_dims);

  // Walk every (a-index, b-index) pair; output coordinate on each axis is ia*db + ib.
  std::vector<std::size_t> ia(rank, 0);
  std::vector<std::size_t> ib(rank, 0);
  for (std::size_t fa = 0; fa < a.size(); ++fa) {
    const double av = a[fa];
    std::fill(ib.begin(), ib.end(), 0);
    for (std::size_t fb = 0; fb < b.size(); ++fb) {
      std::size_t flat = 0;
      for (std::size_t ax = 0; ax < rank; ++ax) {
        flat = flat * out_dims[ax] + ia[ax] * b.dims()[ax] + ib[ax];
      }
      out[flat] = av * b[fb];
      for (std::size_t ax = rank; ax-- > 0;) {
        if (++ib[ax] < b.dims()[ax]) break;
        ib[ax] = 0;
      }
    }
    for (std::size_t ax = rank; ax-- > 0;) {
      if (++ia[ax] < a.dims()[ax]) break;
      ia[ax] = 0;
    }
  }
  return out;
}

Matrix to_matrix(const NdArray& a) {
  if (a.rank() != 2) throw ShapeError("to_matrix: expected rank 2, got " + dims_to_string(a.dims()));
  Matrix m(a.dims()[0], a.dims()[1]);
  for (std::size_t i = 0; i < a.dims()[0]; ++i)
    for (std::size_t j = 0; j < a.dims()[1]; ++j) m(i, j) = a(i, j);
  return m;
}

NdArray from_matrix(const Matrix& m) {
  NdArray a({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a(i, j) = m(i, j);
  return a;
}

namespace {

void fix_sign(Eigen::Ref<Vector> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0) v = -v;
}

// Deterministic, non-degenerate start vector.
Vector start_vector(Eigen::Index n) {
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i) + 0.3);
  return x.normalized();
}

}  // namespace

SingularSubspace top_left_singular(const Matrix& m, int k, const SvdOptions& opts) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  if (k < 1 || k > std::min(rows, cols)) {
    throw InvalidArgument("top_left_singular: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(std::min(rows, cols)) + "]");
  }
  if (!m.allFinite()) throw InvalidArgument("top_left_singular: non-finite input");

  const bool use_right = cols <= rows;
  const Matrix gram = use_right ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
  const Eigen::Index s = gram.rows();

  SingularSubspace out;
  Matrix basis(s, k);
  Vector eig(k);
  double top = 0.0;

  for (int j = 0; j < k; ++j) {
    auto found = basis.leftCols(j);
    Vector x = start_vector(s);
    x -= found * (found.transpose() * x);
    double best_res = std::numeric_limits<double>::infinity();
    bool done = false;
    int it = 0;
    double mu = 0.0;
    for (; it < opts.max_iter; ++it) {
      Vector gx = gram * x;
      gx -= found * (found.transpose() * gx);
      mu = x.dot(gx);
      const double scale = j == 0 ? std::max(mu, 0.0) : top;
      const double gnorm = gx.norm();
      if (gnorm <= 1e-300 || (j > 0 && gnorm <= 1e-14 * top)) {
        throw DegenerateDataError("top_left_singular: matrix has rank below " +
                                  std::to_string(j + 1));
      }
      const double res = (gx - mu * x).norm() / (scale > 0 ? scale : gnorm);
      best_res = std::min(best_res, res);
      if (res <= opts.tol) {
        done = true;
        break;
      }
      x = gx / gnorm;
    }
    if (!done) {
      out.converged = false;
      if (!opts.allow_unconverged) {
        throw ConvergenceError("top_left_singular: vector " + std::to_string(j + 1) +
                                   " did not converge, residual " + std::to_string(best_res),
                               best_res);
      }
    }
    if (j == 0) top = mu;
    out.iterations += it;
    out.residual = std::max(out.residual, best_res);
    basis.col(j) = x.normalized();
    eig[j] = std::max(mu, 0.0);
  }

  Matrix left(rows, k);
  if (use_right) {
    for (int j = 0; j < k; ++j) {
      const double sigma = std::sqrt(eig[j]);
      if (!(sigma > 0)) throw DegenerateDataError("top_left_singular: zero singular value");
      left.col(j) = m * basis.col(j) / sigma;
    }
  } else {
    left = basis;
  }
  // One modified Gram-Schmidt pass to remove drift from the u = m v / sigma map.
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < j; ++i) left.col(j) -= left.col(i).dot(left.col(j)) * left.col(i);
    left.col(j).normalize();
    fix_sign(left.col(j));
  }
  out.vectors = std::move(left);
  out.values = eig.cwiseSqrt();
  return out;
}

Matrix sym_inv_sqrt(const Matrix& s, double ridge) {
  if (s.rows() != s.cols()) throw ShapeError("sym_inv_sqrt: matrix not square");
  if (ridge < 0) throw InvalidArgument("sym_inv_sqrt: negative ridge");
  const double mag = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * mag) {
    throw InvalidArgument("sym_inv_sqrt: matrix not symmetric");
  }
  Matrix shifted = s;
  shifted.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(shifted);
  if (eig.info() != Eigen::Success) throw SingularMatrixError("sym_inv_sqrt: eigensolver failed");
  const Vector& values = eig.eigenvalues();
  const double scale = values.cwiseAbs().maxCoeff();
  if (values.minCoeff() < -1e-8 * std::max(1.0, scale)) {
    throw SingularMatrixError("sym_inv_sqrt: matrix is not positive semidefinite");
  }
  if (scale == 0.0 || values.minCoeff() <= 1e-12 * scale) {
    throw SingularMatrixError("sym_inv_sqrt: matrix is singular");
  }
  const Vector inv_root = values.cwiseSqrt().cwiseInverse();
  Matrix out = eig.eigenvectors() * inv_root.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace skpd

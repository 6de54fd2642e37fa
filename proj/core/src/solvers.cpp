#include "skpd/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "skpd/error.hpp"

namespace skpd {

Vector ols(const Matrix& design, const Vector& y, double ridge) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  if (n < 1) throw InvalidArgument("ols: empty design");
  if (y.size() != n) throw ShapeError("ols: response length does not match design rows");
  if (ridge < 0) throw InvalidArgument("ols: negative ridge");
  const double inv_n = 1.0 / static_cast<double>(n);

  Matrix gram = Matrix::Zero(q, q);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose(), inv_n);
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += ridge;
  const Vector rhs = design.transpose() * y * inv_n;

  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success && (ridge > 0 || llt.rcond() > 1e-12)) {
    return llt.solve(rhs);
  }

  if (ridge > 0) {
    // Augmented system [X; sqrt(n ridge) I] keeps the QR path equivalent to the ridge objective.
    Matrix aug(n + q, q);
    aug.topRows(n) = design;
    aug.bottomRows(q) = Matrix::Identity(q, q) * std::sqrt(static_cast<double>(n) * ridge);
    Vector yaug = Vector::Zero(n + q);
    yaug.head(n) = y;
    return aug.colPivHouseholderQr().solve(yaug);
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  // cond(X) > 1e6 is cond(Gram) > 1e12.
  qr.setThreshold(1e-6);
  if (qr.rank() < q) {
    throw RankDeficientError("ols: design has rank " + std::to_string(qr.rank()) + " < " +
                                 std::to_string(q) + " columns; use a ridge such as 1/n",
                             inv_n);
  }
  return qr.solve(y);
}

namespace {

// Shared coordinate-descent state. `neg_grad` holds c - G a = X^T (y - X a) / n.
class CoordinateDescent {
 public:
  CoordinateDescent(const Matrix& x, const Vector& y, double lambda, const LassoOptions& opts)
      : x_(x), y_(y), lambda_(lambda),
        n_(static_cast<double>(x.rows())),
        covariance_(static_cast<std::size_t>(x.cols()) <= opts.covariance_limit),
        diag_(x.colwise().squaredNorm().transpose() / n_),
        a_(Vector::Zero(x.cols())),
        cached_(static_cast<std::size_t>(x.cols())),
        is_active_(static_cast<std::size_t>(x.cols()), 0) {}

  void start(std::span<const double> warm) {
    if (!warm.empty()) {
      if (warm.size() != static_cast<std::size_t>(x_.cols())) {
        throw ShapeError("lasso_cd: warm start length does not match design columns");
      }
      for (Eigen::Index j = 0; j < a_.size(); ++j) a_[j] = warm[static_cast<std::size_t>(j)];
      for (Eigen::Index j = 0; j < a_.size(); ++j) {
        if (diag_[j] == 0.0) a_[j] = 0.0;
        if (a_[j] != 0.0) mark_active(j);
      }
    }
    refresh();
  }

  // Recomputes the gradient (and residual) exactly from the design.
  void refresh() {
    resid_ = y_ - x_ * a_;
    neg_grad_ = x_.transpose() * resid_ / n_;
  }

  double sweep(bool active_only) {
    double max_change = 0.0;
    if (active_only) {
      for (Eigen::Index j : active_) max_change = std::max(max_change, update(j));
    } else {
      for (Eigen::Index j = 0; j < a_.size(); ++j) max_change = std::max(max_change, update(j));
    }
    return max_change;
  }

  double kkt() const {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < a_.size(); ++j) {
      const double g = neg_grad_[j];
      double v;
      if (a_[j] == 0.0) {
        v = std::max(0.0, std::abs(g) - lambda_) / lambda_;
      } else {
        v = std::abs(g - lambda_ * (a_[j] > 0 ? 1.0 : -1.0)) / lambda_;
      }
      worst = std::max(worst, v);
    }
    return worst;
  }

  const Vector& coefficients() const { return a_; }

 private:
  double update(Eigen::Index j) {
    const double d = diag_[j];
    if (d == 0.0) return 0.0;
    if (!covariance_) neg_grad_[j] = x_.col(j).dot(resid_) / n_;
    const double old = a_[j];
    const double fresh = soft_threshold(neg_grad_[j] + d * old, lambda_) / d;
    const double delta = fresh - old;
    if (delta == 0.0) return 0.0;
    a_[j] = fresh;
    if (covariance_) {
      neg_grad_ -= gram_column(j) * delta;
    } else {
      resid_ -= x_.col(j) * delta;
      neg_grad_[j] -= d * delta;
    }
    mark_active(j);
    return std::abs(delta);
  }

  const Vector& gram_column(Eigen::Index j) {
    auto& col = cached_[static_cast<std::size_t>(j)];
    if (col.size() == 0) col = x_.transpose() * x_.col(j) / n_;
    return col;
  }

  void mark_active(Eigen::Index j) {
    if (!is_active_[static_cast<std::size_t>(j)]) {
      is_active_[static_cast<std::size_t>(j)] = 1;
      active_.insert(std::upper_bound(active_.begin(), active_.end(), j), j);
    }
  }

  const Matrix& x_;
  const Vector& y_;
  double lambda_;
  double n_;
  bool covariance_;
  Vector diag_;
  Vector a_;
  Vector resid_;
  Vector neg_grad_;
  std::vector<Vector> cached_;
  std::vector<char> is_active_;
  std::vector<Eigen::Index> active_;
};

}  // namespace

double lasso_objective(const Matrix& design, const Vector& y, const Vector& a, double lambda) {
  const double n = static_cast<double>(design.rows());
  return (y - design * a).squaredNorm() / (2.0 * n) + lambda * a.lpNorm<1>();
}

double lasso_kkt_residual(const Matrix& design, const Vector& y, const Vector& a, double lambda) {
  const double n = static_cast<double>(design.rows());
  const Vector g = design.transpose() * (y - design * a) / n;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const double v = a[j] == 0.0 ? std::max(0.0, std::abs(g[j]) - lambda) / lambda
                                 : std::abs(g[j] - lambda * (a[j] > 0 ? 1.0 : -1.0)) / lambda;
    worst = std::max(worst, v);
  }
  return worst;
}

LassoResult lasso_cd(const Matrix& design, const Vector& y, double lambda,
                     std::span<const double> warm, const LassoOptions& opts) {
  if (!(lambda > 0)) throw InvalidArgument("lasso_cd: lambda must be positive");
  if (y.size() != design.rows()) throw ShapeError("lasso_cd: response length mismatch");
  if (design.rows() < 1) throw InvalidArgument("lasso_cd: empty design");

  CoordinateDescent cd(design, y, lambda, opts);
  cd.start(warm);

  LassoResult result;
  auto record = [&] {
    if (opts.record_objective) {
      result.objective_trace.push_back(lasso_objective(design, y, cd.coefficients(), lambda));
    }
  };
  record();

  int iter = 0;
  bool converged = false;
  while (iter < opts.max_iter && !converged) {
    const double change = cd.sweep(false);
    ++iter;
    record();
    if (change <= opts.tol) {
      cd.refresh();
      if (cd.kkt() <= opts.kkt_tol) {
        converged = true;
        break;
      }
      continue;
    }
    while (iter < opts.max_iter) {
      const double inner = cd.sweep(true);
      ++iter;
      record();
      if (inner <= opts.tol) break;
    }
  }

  result.coefficients = cd.coefficients();
  result.iterations = iter;
  result.kkt_residual = lasso_kkt_residual(design, y, result.coefficients, lambda);
  result.converged = converged;
  return result;
}

Matrix orthonormalize(const Matrix& a_tilde, double eta) {
  if (a_tilde.cols() < 1) throw InvalidArgument("orthonormalize: need at least one column");
  if (eta < 0) throw InvalidArgument("orthonormalize: negative eta");
  if (a_tilde.cols() == 1) {
    const double norm2 = a_tilde.squaredNorm() + eta;
    if (!(norm2 > 0)) throw SingularMatrixError("orthonormalize: zero column");
    return a_tilde / std::sqrt(norm2);
  }
  const Matrix gram = a_tilde.transpose() * a_tilde;
  return a_tilde * sym_inv_sqrt(0.5 * (gram + gram.transpose()), eta);
}

}  // namespace skpd

#include "skpd/skpd_linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "skpd/error.hpp"
#include "skpd/rearrange.hpp"
#include "skpd/solvers.hpp"

namespace skpd {

void FitConfig::validate() const {
  if (!(kappa > 0.0 && kappa < 1.0)) throw InvalidArgument("FitConfig: kappa must lie in (0, 1)");
  if (!(lambda_tgt > 0.0)) throw InvalidArgument("FitConfig: lambda_tgt must be positive");
  if (lambda0 > 0.0 && lambda_tgt > lambda0) {
    throw InvalidArgument("FitConfig: lambda_tgt exceeds lambda0");
  }
  if (t0_extra < 0) throw InvalidArgument("FitConfig: negative T0");
  if (ols_ridge < 0.0 || orth_ridge < 0.0) throw InvalidArgument("FitConfig: negative ridge");
  if (!(cd_tol > 0.0) || cd_max_iter < 1) throw InvalidArgument("FitConfig: bad Lasso budget");
}

MultiTermModel MultiTermModel::zero(const KpdShape& shape) {
  MultiTermModel m;
  m.shape = shape;
  m.abar = Matrix::Zero(static_cast<Eigen::Index>(shape.grid_size()), 1);
  m.bbar = Matrix::Zero(static_cast<Eigen::Index>(shape.block_size()), 1);
  return m;
}

OneTermModel MultiTermModel::term(int r) const {
  if (r < 0 || r >= rank()) throw InvalidArgument("MultiTermModel::term: index out of range");
  return OneTermModel{shape, abar.col(r), bbar.col(r)};
}

MultiTermModel to_multi(const OneTermModel& m) {
  MultiTermModel out;
  out.shape = m.shape;
  out.abar = m.a;
  out.bbar = m.b;
  return out;
}

const char* to_string(FitStatus s) {
  switch (s) {
    case FitStatus::completed: return "completed";
    case FitStatus::early_stopped: return "early_stopped";
    case FitStatus::zero_iterate: return "zero_iterate";
    case FitStatus::degenerate_init: return "degenerate_init";
  }
  return "unknown";
}

int scheduled_steps(double lambda0, double lambda_tgt, double kappa, int t0_extra) {
  if (!(lambda0 > 0.0) || !(lambda_tgt > 0.0)) throw InvalidArgument("scheduled_steps: lambdas");
  const double steps = std::log(lambda_tgt / lambda0) / std::log(kappa);
  const int reach = steps <= 0.0 ? 0 : static_cast<int>(std::ceil(steps - 1e-12));
  return std::max(1, reach + t0_extra);
}

Matrix init(const Dataset& data, int rank) {
  SvdOptions opts;
  opts.allow_unconverged = true;
  return top_left_singular(weighted_design_sum(data), rank, opts).vectors;
}

namespace {

// Row i: vec(X~_i^T A), term-major (entry r*Q + k).
Matrix build_m(const Dataset& data, const Matrix& a) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto q = static_cast<Eigen::Index>(data.block_size());
  const Eigen::Index r = a.cols();
  Matrix m(n, q * r);
  Matrix xta(q, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    xta.noalias() = data.design(static_cast<std::size_t>(i)).transpose() * a;
    m.row(i) = Eigen::Map<const Vector>(xta.data(), q * r).transpose();
  }
  return m;
}

// Row i: vec(X~_i B), term-major (entry r*P + j).
Matrix build_n(const Dataset& data, const Matrix& b) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = static_cast<Eigen::Index>(data.grid_size());
  const Eigen::Index r = b.cols();
  const Matrix xb = data.xr * b;
  Matrix out(n, p * r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < r; ++k) {
      out.block(i, k * p, 1, p) = xb.block(i * p, k, p, 1).transpose();
    }
  }
  return out;
}

std::size_t count_nonzero(const Matrix& m) {
  return static_cast<std::size_t>((m.array() != 0.0).count());
}

FitResult zero_result(const KpdShape& shape, FitStatus status, std::string why,
                      const Vector& y) {
  FitResult res;
  res.model = MultiTermModel::zero(shape);
  res.status = status;
  res.diagnostics = std::move(why);
  res.rss_mean = y.squaredNorm() / static_cast<double>(y.size());
  return res;
}

void sort_by_b_norm(MultiTermModel& m) {
  const Eigen::Index r = m.abar.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  const Vector norms = m.bbar.colwise().norm().transpose();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return norms[x] > norms[y]; });
  Matrix a(m.abar.rows(), r);
  Matrix b(m.bbar.rows(), r);
  for (Eigen::Index k = 0; k < r; ++k) {
    a.col(k) = m.abar.col(order[static_cast<std::size_t>(k)]);
    b.col(k) = m.bbar.col(order[static_cast<std::size_t>(k)]);
  }
  m.abar = std::move(a);
  m.bbar = std::move(b);
}

// Extends orthonormal columns to `rank` columns with the leading singular directions of
// sum_i X~_i y_i that lie outside their span.
Matrix complete_basis(const Dataset& data, const Matrix& a, int rank) {
  SvdOptions opts;
  opts.allow_unconverged = true;
  const Eigen::Index p = a.rows();
  const int k = static_cast<int>(std::min<Eigen::Index>(p, std::min<Eigen::Index>(
                                                               rank + a.cols(), static_cast<Eigen::Index>(data.block_size()))));
  Matrix cand;
  try {
    cand = top_left_singular(weighted_design_sum(data), k, opts).vectors;
  } catch (const DegenerateDataError&) {
    cand = Matrix::Identity(p, p);
  }
  Matrix out(p, rank);
  out.leftCols(a.cols()) = a;
  Eigen::Index filled = a.cols();
  auto take = [&](const Matrix& pool) {
    for (Eigen::Index j = 0; j < pool.cols() && filled < rank; ++j) {
      Vector v = pool.col(j);
      for (int pass = 0; pass < 2; ++pass) v -= out.leftCols(filled) * (out.leftCols(filled).transpose() * v);
      if (v.norm() > 1e-6) out.col(filled++) = v.normalized();
    }
  };
  take(cand);
  if (filled < rank) take(Matrix::Identity(p, p));
  return out;
}

}  // namespace

FitResult fit_multi_term(const Dataset& data, int rank, const FitConfig& config,
                         const Matrix* warm) {
  config.validate();
  const std::size_t n = data.n();
  const auto p = static_cast<Eigen::Index>(data.grid_size());
  const auto q = static_cast<Eigen::Index>(data.block_size());
  if (n < 1) throw InvalidArgument("fit_multi_term: empty dataset");
  if (rank < 1) throw InvalidArgument("fit_multi_term: rank must be positive");
  const double nd = static_cast<double>(n);

  Matrix a;
  PathTrace trace;
  if (warm != nullptr) {
    if (warm->rows() != p || warm->cols() < 1 || warm->cols() > rank) {
      throw ShapeError("fit_multi_term: warm start must be grid_size x (1..rank)");
    }
    a = *warm;
    if (a.cols() < rank) a = complete_basis(data, a, rank);
  } else {
    try {
      SvdOptions opts;
      opts.allow_unconverged = true;
      const auto svd = top_left_singular(weighted_design_sum(data), rank, opts);
      if (!svd.converged) {
        trace.notes.push_back("initial SVD stopped at residual " + std::to_string(svd.residual));
      }
      a = svd.vectors;
    } catch (const DegenerateDataError& e) {
      auto res = zero_result(data.shape, FitStatus::degenerate_init, e.what(), data.y);
      return res;
    }
  }
  trace.init = a;

  FitResult res;
  double lambda0 = config.lambda0;
  int total = lambda0 > 0.0
                  ? scheduled_steps(lambda0, config.lambda_tgt, config.kappa, config.t0_extra)
                  : -1;
  Matrix b;
  Matrix prev_c;
  LassoOptions lasso_opts;
  lasso_opts.tol = config.cd_tol;
  lasso_opts.max_iter = config.cd_max_iter;

  // Terms whose column of A~ is zeroed stay dormant: A column zero, b_r kept from its last
  // B step so the Lasso can bring the term back as lambda decreases.
  const Eigen::Index r = a.cols();
  std::vector<Eigen::Index> live(static_cast<std::size_t>(r));
  std::iota(live.begin(), live.end(), 0);
  b = Matrix::Zero(q, r);

  for (int t = 1; total < 0 || t <= total; ++t) {
    const auto live_r = static_cast<Eigen::Index>(live.size());
    Matrix a_live(p, live_r);
    for (Eigen::Index k = 0; k < live_r; ++k) a_live.col(k) = a.col(live[static_cast<std::size_t>(k)]);
    const Matrix m = build_m(data, a_live);
    Vector bvec;
    try {
      bvec = ols(m, data.y, config.ols_ridge);
    } catch (const RankDeficientError& e) {
      throw RankDeficientError(std::string(e.what()) + " (B step, t=" + std::to_string(t) + ")",
                               e.suggested_ridge());
    }
    for (Eigen::Index k = 0; k < live_r; ++k) {
      b.col(live[static_cast<std::size_t>(k)]) = bvec.segment(k * q, q);
    }
    const double b_norm = b.norm();
    const Matrix nmat = build_n(data, b);

    if (t == 1 && lambda0 <= 0.0) {
      const double lmax = (nmat.transpose() * data.y).cwiseAbs().maxCoeff() / nd;
      if (!(b_norm > 0.0) || !(lmax > 0.0)) {
        return zero_result(data.shape, FitStatus::zero_iterate,
                           "first B step is zero; no signal to follow", data.y);
      }
      lambda0 = lmax / b_norm;
      if (config.lambda_tgt >= lambda0) {
        trace.notes.push_back("lambda_tgt above the just-active value; lambda0 set to lambda_tgt/kappa");
        lambda0 = config.lambda_tgt / config.kappa;
      }
      total = scheduled_steps(lambda0, config.lambda_tgt, config.kappa, config.t0_extra);
    }
    if (!(b_norm > 0.0)) {
      auto z = zero_result(data.shape, FitStatus::zero_iterate,
                           "B step returned zero at t=" + std::to_string(t), data.y);
      z.trace = std::move(trace);
      z.lambda0 = lambda0;
      return z;
    }

    TraceRecord rec;
    rec.t = t;
    rec.lambda_norm = lambda0 * std::pow(config.kappa, t);
    rec.lambda = rec.lambda_norm * b_norm;
    rec.b_norm = b_norm;

    const LassoResult lr = lasso_cd(nmat, data.y, rec.lambda,
                                    std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                                    lasso_opts);
    rec.lasso_iterations = lr.iterations;
    rec.lasso_converged = lr.converged;
    const Matrix a_tilde = Eigen::Map<const Matrix>(lr.coefficients.data(), p, r);
    rec.nnz_a = count_nonzero(a_tilde);

    std::vector<Eigen::Index> now_live;
    for (Eigen::Index k = 0; k < r; ++k) {
      if (a_tilde.col(k).squaredNorm() > 0.0) now_live.push_back(k);
    }
    if (now_live.empty()) {
      std::ostringstream why;
      why << "Lasso removed every coordinate at t=" << t << ", lambda=" << rec.lambda
          << " (normalized " << rec.lambda_norm << ")";
      auto z = zero_result(data.shape, FitStatus::zero_iterate, why.str(), data.y);
      trace.records.push_back(rec);
      z.trace = std::move(trace);
      z.lambda0 = lambda0;
      z.lambda_final = rec.lambda;
      z.lambda_norm_final = rec.lambda_norm;
      z.iterations = t;
      z.scheduled_iterations = total;
      return z;
    }
    if (now_live != live) {
      trace.notes.push_back("t=" + std::to_string(t) + ": " + std::to_string(now_live.size()) + " of " +
                            std::to_string(r) + " terms active");
    }
    live = std::move(now_live);

    const auto new_r = static_cast<Eigen::Index>(live.size());
    Matrix at(p, new_r);
    for (Eigen::Index k = 0; k < new_r; ++k) at.col(k) = a_tilde.col(live[static_cast<std::size_t>(k)]);
    Matrix orth;
    try {
      orth = orthonormalize(at, config.orth_ridge);
    } catch (const SingularMatrixError&) {
      orth = orthonormalize(at, 1.0 / nd);
      rec.ridge_fallback = true;
    }
    a.setZero();
    for (Eigen::Index k = 0; k < new_r; ++k) a.col(live[static_cast<std::size_t>(k)]) = orth.col(k);
    rec.rank = static_cast<int>(new_r);

    Vector yhat = Vector::Zero(static_cast<Eigen::Index>(n));
    for (Eigen::Index k : live) yhat.noalias() += nmat.middleCols(k * p, p) * a.col(k);
    rec.rss_mean = (data.y - yhat).squaredNorm() / nd;

    Matrix c = a * b.transpose();
    rec.rel_change = prev_c.size() == 0 ? 1.0 : (c - prev_c).norm() / std::max(prev_c.norm(), 1e-300);
    prev_c = std::move(c);

    trace.records.push_back(rec);
    if (config.record_iterates) trace.iterates.push_back(a);
    res.s0 = rec.nnz_a;
    res.rss_mean = rec.rss_mean;
    res.lambda_final = rec.lambda;
    res.lambda_norm_final = rec.lambda_norm;
    res.iterations = t;

    if (rec.lambda_norm <= config.lambda_tgt * (1.0 + 1e-12) && rec.rel_change < config.conv_tol) {
      res.status = FitStatus::early_stopped;
      break;
    }
  }

  {
    // Dormant terms are not part of the reported model.
    const auto live_r = static_cast<Eigen::Index>(live.size());
    Matrix al(p, live_r);
    Matrix bl(q, live_r);
    for (Eigen::Index k = 0; k < live_r; ++k) {
      al.col(k) = a.col(live[static_cast<std::size_t>(k)]);
      bl.col(k) = b.col(live[static_cast<std::size_t>(k)]);
    }
    a = std::move(al);
    b = std::move(bl);
  }
  res.model.shape = data.shape;
  res.model.abar = std::move(a);
  res.model.bbar = std::move(b);
  sort_by_b_norm(res.model);
  res.s0_post = count_nonzero(res.model.abar);
  res.lambda0 = lambda0;
  res.scheduled_iterations = total;
  res.trace = std::move(trace);
  return res;
}

OneTermResult fit_one_term(const Dataset& data, const FitConfig& config) {
  OneTermResult out;
  out.fit = fit_multi_term(data, 1, config);
  out.model = out.fit.model.term(0);
  return out;
}

NdArray coefficients(const MultiTermModel& model) {
  return inverse_rearrange(model.abar * model.bbar.transpose(), model.shape);
}

NdArray coefficients(const OneTermModel& model) { return coefficients(to_multi(model)); }

Vector predict_linear(const MultiTermModel& model, const Dataset& data) {
  if (!(model.shape == data.shape)) throw ShapeError("predict_linear: model and data shapes differ");
  const Matrix c = model.abar * model.bbar.transpose();
  Vector out(static_cast<Eigen::Index>(data.n()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    out[static_cast<Eigen::Index>(i)] = data.design(i).cwiseProduct(c).sum();
  }
  return out;
}

double hard_threshold_value(double c, std::size_t n, std::size_t block_size,
                            std::size_t grid_size) {
  if (!(c > 0.0)) throw InvalidArgument("hard_threshold: c must be positive");
  if (n < 1) throw InvalidArgument("hard_threshold: n must be positive");
  const double nd = static_cast<double>(n);
  return c * std::sqrt((std::log(nd) + static_cast<double>(block_size) *
                                           std::log(static_cast<double>(grid_size))) / nd);
}

ThresholdResult hard_threshold(const MultiTermModel& model, double c, std::size_t n) {
  ThresholdResult out;
  out.threshold = hard_threshold_value(c, n, model.shape.block_size(), model.shape.grid_size());
  out.model = model;
  for (Eigen::Index i = 0; i < out.model.abar.size(); ++i) {
    double& v = out.model.abar.data()[i];
    if (v != 0.0 && std::abs(v) <= out.threshold) {
      v = 0.0;
      ++out.zeroed;
    }
  }
  return out;
}

NdArray region_mask(const NdArray& c_hat, double zero_eps) {
  NdArray out(c_hat.dims());
  for (std::size_t i = 0; i < c_hat.size(); ++i) out[i] = std::abs(c_hat[i]) > zero_eps ? 1.0 : 0.0;
  return out;
}

LocalSmoothingResult fit_local_smoothing(const Dataset& data, double lambda,
                                         const FitConfig& config) {
  if (!(lambda > 0.0)) throw InvalidArgument("fit_local_smoothing: lambda must be positive");
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = static_cast<Eigen::Index>(data.grid_size());
  const double qd = static_cast<double>(data.block_size());
  Matrix features(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    features.row(i) = (data.design(static_cast<std::size_t>(i)).rowwise().sum() / qd).transpose();
  }
  LassoOptions opts;
  opts.tol = config.cd_tol;
  opts.max_iter = config.cd_max_iter;
  const LassoResult lr = lasso_cd(features, data.y, lambda / std::sqrt(qd), {}, opts);

  MultiTermModel m;
  m.shape = data.shape;
  m.abar = lr.coefficients;
  m.bbar = Matrix::Constant(static_cast<Eigen::Index>(data.block_size()), 1, 1.0 / qd);
  return LocalSmoothingResult{coefficients(m), lr.coefficients, lr.converged};
}

}  // namespace skpd

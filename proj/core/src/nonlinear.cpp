#include "skpd/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "skpd/error.hpp"
#include "skpd/rearrange.hpp"
#include "skpd/rng.hpp"
#include "skpd/solvers.hpp"

namespace skpd {

Activation parse_activation(const std::string& name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw InvalidArgument("unknown activation '" + name + "'");
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "unknown";
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

double activate_deriv(Activation a, double z) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

namespace {

bool positively_homogeneous(Activation a) { return a != Activation::sigmoid; }

void check_model(const NonlinearModel& m, const KpdShape& shape) {
  if (!(m.shape == shape)) throw ShapeError("nonlinear model shape does not match data");
  if (m.maps.rows() != static_cast<Eigen::Index>(shape.grid_size()) ||
      m.filters.rows() != static_cast<Eigen::Index>(shape.block_size()) ||
      m.maps.cols() != m.filters.cols()) {
    throw ShapeError("nonlinear model: inconsistent maps/filters");
  }
}

double predict_rows(const NonlinearModel& m, const Eigen::Ref<const RowMatrix>& xt) {
  const Matrix z = xt * m.filters;
  double y = m.intercept;
  for (Eigen::Index r = 0; r < z.cols(); ++r) {
    for (Eigen::Index j = 0; j < z.rows(); ++j) y += m.maps(j, r) * activate(m.activation, z(j, r));
  }
  return y;
}

}  // namespace

double predict(const NonlinearModel& model, const NdArray& image) {
  check_model(model, model.shape);
  const RowMatrix xt = rearrange(image, model.shape);
  return predict_rows(model, xt);
}

Vector predict(const NonlinearModel& model, const Dataset& data) {
  check_model(model, data.shape);
  Vector out(static_cast<Eigen::Index>(data.n()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    out[static_cast<Eigen::Index>(i)] = predict_rows(model, data.design(i));
  }
  return out;
}

NdArray coefficients(const NonlinearModel& model) {
  return inverse_rearrange(model.maps * model.filters.transpose(), model.shape);
}

namespace {

// Full-data pass with one large product Z = X~ B (all samples stacked).
LossGrad full_loss_grad(const NonlinearModel& model, const Dataset& data, bool with_grad) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = model.maps.rows();
  const Eigen::Index r = model.maps.cols();
  const Matrix z = data.xr * model.filters;  // (n*P) x R
  LossGrad out;
  Vector resid(n);
  double sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double yhat = model.intercept;
    for (Eigen::Index k = 0; k < r; ++k) {
      for (Eigen::Index j = 0; j < p; ++j) yhat += model.maps(j, k) * activate(model.activation, z(i * p + j, k));
    }
    resid[i] = data.y[i] - yhat;
    sse += resid[i] * resid[i];
  }
  const double nd = static_cast<double>(n);
  out.loss = sse / (2.0 * nd);
  if (!with_grad) return out;

  out.grad_maps = Matrix::Zero(p, r);
  Matrix weighted(n * p, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = -resid[i] / nd;
    for (Eigen::Index k = 0; k < r; ++k) {
      for (Eigen::Index j = 0; j < p; ++j) {
        const double zz = z(i * p + j, k);
        out.grad_maps(j, k) += w * activate(model.activation, zz);
        weighted(i * p + j, k) = w * model.maps(j, k) * activate_deriv(model.activation, zz);
      }
    }
  }
  out.grad_filters = data.xr.transpose() * weighted;
  return out;
}

}  // namespace

LossGrad loss_grad(const NonlinearModel& model, const Dataset& data,
                   std::span<const std::size_t> rows) {
  check_model(model, data.shape);
  if (rows.empty()) return full_loss_grad(model, data, true);
  const double m = static_cast<double>(rows.size());
  LossGrad out;
  out.grad_maps = Matrix::Zero(model.maps.rows(), model.maps.cols());
  out.grad_filters = Matrix::Zero(model.filters.rows(), model.filters.cols());
  Matrix z(model.maps.rows(), model.maps.cols());
  Matrix gz(z.rows(), z.cols());
  Matrix weighted(z.rows(), z.cols());
  double sse = 0.0;
  for (std::size_t i : rows) {
    if (i >= data.n()) throw InvalidArgument("loss_grad: row index out of range");
    const auto xt = data.design(i);
    z.noalias() = xt * model.filters;
    double yhat = model.intercept;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      gz.data()[k] = activate(model.activation, z.data()[k]);
      yhat += model.maps.data()[k] * gz.data()[k];
    }
    const double resid = data.y[static_cast<Eigen::Index>(i)] - yhat;
    sse += resid * resid;
    const double w = -resid / m;
    out.grad_maps.noalias() += w * gz;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      weighted.data()[k] = model.maps.data()[k] * activate_deriv(model.activation, z.data()[k]);
    }
    out.grad_filters.noalias() += w * (xt.transpose() * weighted);
  }
  out.loss = sse / (2.0 * m);
  return out;
}

double loss_value(const NonlinearModel& model, const Dataset& data) {
  check_model(model, data.shape);
  return full_loss_grad(model, data, false).loss;
}

void TrainConfig::validate() const {
  if (!(step_size > 0.0)) throw InvalidArgument("TrainConfig: step_size must be positive");
  if (epochs < 0) throw InvalidArgument("TrainConfig: negative epochs");
  if (lambda < 0.0) throw InvalidArgument("TrainConfig: negative lambda");
  if (!(decay > 0.0) || decay_every < 1) throw InvalidArgument("TrainConfig: bad decay");
}

NonlinearModel initial_nonlinear_model(const Dataset& data, int rank, Activation activation,
                                       std::uint64_t seed) {
  if (rank < 1) throw InvalidArgument("initial_nonlinear_model: rank must be positive");
  NonlinearModel m;
  m.shape = data.shape;
  m.activation = activation;
  const auto p = static_cast<Eigen::Index>(data.grid_size());
  const auto q = static_cast<Eigen::Index>(data.block_size());
  try {
    SvdOptions opts;
    opts.allow_unconverged = true;
    m.maps = top_left_singular(weighted_design_sum(data), rank, opts).vectors;
  } catch (const DegenerateDataError&) {
    m.maps = Matrix::Identity(p, rank);
  }
  m.filters.resize(q, rank);
  RandomStream rs(seed, Stream::init, 0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(q));
  for (Eigen::Index r = 0; r < rank; ++r) {
    for (Eigen::Index k = 0; k < q; ++k) m.filters(k, r) = rs.normal() * scale;
  }
  return m;
}

namespace {

void prox_maps(Matrix& a, double t) {
  a = a.unaryExpr([t](double v) { return soft_threshold(v, t); });
}

// Drops all-zero maps and rescales the rest to unit norm. Returns false if nothing is left.
bool renormalize(NonlinearModel& m) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < m.maps.cols(); ++r) {
    if (m.maps.col(r).squaredNorm() > 0.0) keep.push_back(r);
  }
  if (keep.empty()) return false;
  Matrix a(m.maps.rows(), static_cast<Eigen::Index>(keep.size()));
  Matrix b(m.filters.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    const double nrm = m.maps.col(keep[k]).norm();
    a.col(c) = m.maps.col(keep[k]) / nrm;
    b.col(c) = m.filters.col(keep[k]);
    if (positively_homogeneous(m.activation)) b.col(c) *= nrm;
  }
  m.maps = std::move(a);
  m.filters = std::move(b);
  return true;
}

bool quadratic_bound_holds(double new_loss, double old_loss, const Matrix& grad,
                           const Matrix& delta, double step) {
  const double bound = old_loss + grad.cwiseProduct(delta).sum() + delta.squaredNorm() / (2.0 * step);
  return new_loss <= bound + 1e-12 * std::abs(old_loss);
}

}  // namespace

NonlinearFit fit_nonlinear(const Dataset& data, int rank, Activation activation,
                           const TrainConfig& config, const NonlinearModel* warm) {
  config.validate();
  if (data.n() < 1) throw InvalidArgument("fit_nonlinear: empty dataset");
  NonlinearFit fit;
  fit.model = warm != nullptr ? *warm : initial_nonlinear_model(data, rank, activation, config.seed);
  fit.model.activation = activation;
  check_model(fit.model, data.shape);
  if (!renormalize(fit.model)) throw InvalidArgument("fit_nonlinear: initial maps are zero");
  if (!config.intercept) fit.model.intercept = 0.0;
  auto refresh_intercept = [&]() {
    if (config.intercept) fit.model.intercept += (data.y - predict(fit.model, data)).mean();
  };
  refresh_intercept();

  const double initial_loss = loss_value(fit.model, data);
  double prev_loss = initial_loss;
  double step_b = config.step_size;
  double step_a = config.step_size;
  const std::size_t n = data.n();

  auto diverged = [&](double loss) {
    return !std::isfinite(loss) ||
           loss > config.divergence_factor * std::max(initial_loss, 1e-300);
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    if (config.batch == 0 || config.batch >= n) {
      // B step.
      LossGrad lg = loss_grad(fit.model, data);
      for (int tries = 0; tries < 60; ++tries) {
        NonlinearModel cand = fit.model;
        cand.filters -= step_b * lg.grad_filters;
        const double cand_loss = loss_value(cand, data);
        if (!config.backtracking ||
            quadratic_bound_holds(cand_loss, lg.loss, lg.grad_filters, cand.filters - fit.model.filters, step_b)) {
          fit.model = std::move(cand);
          if (config.backtracking) step_b *= 1.5;
          break;
        }
        step_b *= 0.5;
      }
      // A step.
      lg = loss_grad(fit.model, data);
      for (int tries = 0; tries < 60; ++tries) {
        NonlinearModel cand = fit.model;
        cand.maps -= step_a * lg.grad_maps;
        prox_maps(cand.maps, step_a * config.lambda);
        const double cand_loss = loss_value(cand, data);
        const bool ok = !config.backtracking ||
                        quadratic_bound_holds(cand_loss, lg.loss, lg.grad_maps, cand.maps - fit.model.maps, step_a);
        if (ok) {
          fit.model = std::move(cand);
          if (config.backtracking) step_a *= 1.5;
          break;
        }
        step_a *= 0.5;
      }
    } else {
      const double lr = config.step_size *
                        std::pow(config.decay, static_cast<double>(epoch / config.decay_every));
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      RandomStream rs(config.seed, Stream::minibatch, static_cast<std::uint32_t>(epoch));
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rs.below(i)]);
      for (std::size_t start = 0; start < n; start += config.batch) {
        const std::size_t stop = std::min(n, start + config.batch);
        const LossGrad lg = loss_grad(
            fit.model, data, std::span<const std::size_t>(order.data() + start, stop - start));
        fit.model.filters -= lr * lg.grad_filters;
        fit.model.maps -= lr * lg.grad_maps;
        prox_maps(fit.model.maps, lr * config.lambda);
        if (!renormalize(fit.model)) break;
      }
    }

    if (!renormalize(fit.model)) {
      fit.notes.push_back("every map was thresholded to zero at epoch " + std::to_string(epoch + 1));
      fit.model.maps = Matrix::Zero(fit.model.maps.rows(), 1);
      fit.model.filters = Matrix::Zero(fit.model.filters.rows(), 1);
      fit.model.intercept = config.intercept ? data.y.mean() : 0.0;
      fit.loss_trace.push_back((data.y.array() - fit.model.intercept).matrix().squaredNorm() /
                               (2.0 * static_cast<double>(n)));
      fit.epochs_run = epoch + 1;
      fit.converged = true;
      return fit;
    }
    refresh_intercept();
    loss = loss_value(fit.model, data);
    fit.loss_trace.push_back(loss);
    fit.epochs_run = epoch + 1;
    if (diverged(loss)) {
      throw ConvergenceError("fit_nonlinear: loss diverged to " + std::to_string(loss) +
                                 " at epoch " + std::to_string(epoch + 1),
                             loss);
    }
    if (std::abs(prev_loss - loss) <= config.tol * std::max(loss, 1e-300)) {
      fit.converged = true;
      break;
    }
    prev_loss = loss;
  }
  return fit;
}

}  // namespace skpd

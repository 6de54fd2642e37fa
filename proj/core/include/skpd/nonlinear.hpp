#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skpd/dataset.hpp"
#include "skpd/linalg.hpp"

namespace skpd {

enum class Activation { identity, relu, sigmoid };

Activation parse_activation(const std::string& name);
const char* to_string(Activation a);
double activate(Activation a, double z);
/// Derivative; relu'(0) = 0.
double activate_deriv(Activation a, double z);

/// y = intercept + sum_r <A_r, g(X * B_r)> with maps A_r (grid) and filters B_r (block), stored as columns.
struct NonlinearModel {
  KpdShape shape;
  Activation activation = Activation::relu;
  Matrix maps;     ///< grid_size x R
  Matrix filters;  ///< block_size x R
  double intercept = 0.0;

  int rank() const noexcept { return static_cast<int>(maps.cols()); }
};

double predict(const NonlinearModel& model, const NdArray& image);
Vector predict(const NonlinearModel& model, const Dataset& data);

/// sum_r kron(A_r, B_r); the region estimate of a nonlinear model.
NdArray coefficients(const NonlinearModel& model);

struct LossGrad {
  double loss = 0.0;  ///< (1/2m) sum_i (y_i - yhat_i)^2 over the selected rows
  Matrix grad_maps;
  Matrix grad_filters;
};

/// Squared-error loss and its gradient. The l1 penalty is left to the proximal step.
/// `rows` selects samples (all when empty).
LossGrad loss_grad(const NonlinearModel& model, const Dataset& data,
                   std::span<const std::size_t> rows = {});

double loss_value(const NonlinearModel& model, const Dataset& data);

struct TrainConfig {
  double step_size = 1.0;  ///< initial step (full batch) or learning rate (minibatch)
  int epochs = 200;
  /// Penalty lambda * sum_r |vec(A_r)|_1; maps are soft-thresholded at step * lambda.
  double lambda = 0.5;
  /// Fit an unpenalized intercept, refreshed in closed form once per epoch.
  bool intercept = false;
  std::size_t batch = 0;   ///< 0 = full batch
  std::uint64_t seed = 1;
  bool backtracking = true;
  double decay = 0.98;     ///< minibatch learning-rate decay ...
  int decay_every = 10;    ///< ... applied every this many epochs
  double divergence_factor = 1e3;
  double tol = 1e-8;       ///< stop when the relative loss change stays below this

  void validate() const;
};

struct NonlinearFit {
  NonlinearModel model;
  std::vector<double> loss_trace;  ///< full-data loss after every epoch
  int epochs_run = 0;
  bool converged = false;
  std::vector<std::string> notes;
};

/// Initial model: A from the top-R left singular vectors of sum_i X~_i y_i,
/// B i.i.d. normal / sqrt(Q) from the seeded stream.
NonlinearModel initial_nonlinear_model(const Dataset& data, int rank, Activation activation,
                                       std::uint64_t seed);

/**
 * Proximal gradient training. Full batch alternates a B step and an A step,
 * each with its own backtracking step size; the A step soft-thresholds and
 * then rescales each A_r to unit norm (moving the scale into B_r when g is
 * positively homogeneous). Throws ConvergenceError on divergence.
 */
NonlinearFit fit_nonlinear(const Dataset& data, int rank, Activation activation,
                           const TrainConfig& config, const NonlinearModel* warm = nullptr);

}  // namespace skpd

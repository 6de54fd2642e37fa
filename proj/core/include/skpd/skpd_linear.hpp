#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skpd/dataset.hpp"
#include "skpd/linalg.hpp"
#include "skpd/ndarray.hpp"

namespace skpd {

/**
 * Penalties are on the normalized scale: the Lasso at step t uses
 * lambda0 * kappa^t * ||B||_F, and lambda_tgt is compared with lambda0 * kappa^t.
 */
struct FitConfig {
  double lambda0 = 0.0;  ///< <= 0 picks the just-active value from the first OLS step
  double kappa = 0.9;
  double lambda_tgt = 0.5;
  int t0_extra = 5;
  double ols_ridge = 0.0;
  double orth_ridge = 0.0;
  double cd_tol = 1e-7;
  int cd_max_iter = 10000;
  double conv_tol = 1e-4;
  /// Keep A after every iteration in the trace (tests and diagnostics).
  bool record_iterates = false;

  void validate() const;
};

struct OneTermModel {
  KpdShape shape;
  Vector a;  ///< grid_size, unit norm
  Vector b;  ///< block_size
};

struct MultiTermModel {
  KpdShape shape;
  Matrix abar;  ///< grid_size x R, orthonormal columns
  Matrix bbar;  ///< block_size x R, columns by decreasing norm

  int rank() const noexcept { return static_cast<int>(abar.cols()); }
  static MultiTermModel zero(const KpdShape& shape);
  OneTermModel term(int r) const;
};

MultiTermModel to_multi(const OneTermModel& m);

struct TraceRecord {
  int t = 0;
  double lambda = 0.0;       ///< penalty used by the Lasso step
  double lambda_norm = 0.0;  ///< lambda0 * kappa^t
  double b_norm = 0.0;       ///< ||b|| or ||B||_F
  std::size_t nnz_a = 0;     ///< nonzeros of A~ before orthonormalization
  int rank = 0;
  double rss_mean = 0.0;
  double rel_change = 0.0;   ///< relative change of C-hat
  int lasso_iterations = 0;
  bool lasso_converged = true;
  bool ridge_fallback = false;
};

struct PathTrace {
  std::vector<TraceRecord> records;
  std::vector<Matrix> iterates;  ///< A-hat after each step when record_iterates
  std::vector<std::string> notes;
  Matrix init;                   ///< A-hat at t = 0
};

enum class FitStatus {
  completed,       ///< ran all T steps
  early_stopped,   ///< converged after reaching lambda_tgt
  zero_iterate,    ///< the Lasso removed every coordinate; zero model returned
  degenerate_init  ///< sum_i X~_i y_i has no usable singular vector; zero model returned
};

const char* to_string(FitStatus s);

struct FitResult {
  MultiTermModel model;
  PathTrace trace;
  FitStatus status = FitStatus::completed;
  double lambda0 = 0.0;
  double lambda_final = 0.0;       ///< last penalty used
  double lambda_norm_final = 0.0;  ///< last lambda0 * kappa^t
  int iterations = 0;
  int scheduled_iterations = 0;
  std::size_t s0 = 0;              ///< nnz of A~ (before orthonormalization)
  std::size_t s0_post = 0;         ///< nnz of A-hat
  double rss_mean = 0.0;
  std::string diagnostics;
};

/// Number of steps T = ceil(log(lambda_tgt / lambda0) / log kappa) + T0.
int scheduled_steps(double lambda0, double lambda_tgt, double kappa, int t0_extra);

/// Top-R left singular vectors of sum_i X~_i y_i.
Matrix init(const Dataset& data, int rank);

/**
 * Alternating minimization for the R-term model. `warm` replaces the SVD
 * initialization (its columns are used as A-hat at t = 0).
 */
FitResult fit_multi_term(const Dataset& data, int rank, const FitConfig& config,
                         const Matrix* warm = nullptr);

struct OneTermResult {
  OneTermModel model;
  FitResult fit;
};

/// Same engine with R = 1.
OneTermResult fit_one_term(const Dataset& data, const FitConfig& config);

/// C-hat = sum_r kron(unvec(a_r), unvec(b_r)).
NdArray coefficients(const MultiTermModel& model);
NdArray coefficients(const OneTermModel& model);

/// Predictions <X_i, C-hat> = sum_r a_r^T X~_i b_r.
Vector predict_linear(const MultiTermModel& model, const Dataset& data);

/// c * sqrt((ln n + Q ln P) / n)
double hard_threshold_value(double c, std::size_t n, std::size_t block_size, std::size_t grid_size);

struct ThresholdResult {
  MultiTermModel model;
  double threshold = 0.0;
  std::size_t zeroed = 0;
};

/// Zeroes |a| <= threshold entries; columns are not renormalized.
ThresholdResult hard_threshold(const MultiTermModel& model, double c, std::size_t n);

/// 1 where |c| > zero_eps, else 0.
NdArray region_mask(const NdArray& c_hat, double zero_eps = 1e-10);

struct LocalSmoothingResult {
  NdArray coefficients;
  Vector a;
  bool converged = true;
};

/// Lasso on block means (b frozen to ones/Q) with penalty lambda / sqrt(Q).
LocalSmoothingResult fit_local_smoothing(const Dataset& data, double lambda,
                                         const FitConfig& config = {});

}  // namespace skpd

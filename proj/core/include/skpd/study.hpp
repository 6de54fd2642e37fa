#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "skpd/ndarray.hpp"
#include "skpd/nonlinear.hpp"
#include "skpd/skpd_linear.hpp"

namespace skpd {

enum class StudyKind { circle, three_circles, butterfly, nonlinear, one_ball, two_balls };
enum class Method { one_term, r_term, nonlinear, local };

StudyKind parse_study(const std::string& name);
const char* to_string(StudyKind kind);
const char* to_string(Method method);

struct StudyConfig {
  StudyKind kind = StudyKind::circle;
  int reps = 5;
  std::uint64_t seed = 1;
  std::size_t n = 1000;
  double sigma = 1.0;
  Dims image_dims{128, 128};
  Dims block_dims{8, 8};
  std::vector<Method> methods;
  std::vector<double> lambda_grid;
  std::vector<int> rank_grid{1, 2, 3, 4, 5};
  FitConfig fit;
  std::string mask_path;  ///< butterfly override

  // Nonlinear study.
  int nl_rank = 3;
  std::size_t n_test = 200;
  std::size_t n_validation = 200;
  TrainConfig train;
  std::vector<double> nl_lambda_grid;
  int nl_epochs_first = 150;  ///< epochs at the largest lambda
  int nl_epochs_next = 60;    ///< epochs at each following lambda (warm started)

  unsigned threads = 1;
};

/// Default settings for each study, with the 3D studies at 40x48x40, n = 600, sigma = 3.
StudyConfig default_study(StudyKind kind);

struct RepMetrics {
  Method method = Method::one_term;
  int rep = 0;
  double fpr = 0.0;
  double tpr = 0.0;
  double rmse = 0.0;       ///< coefficient RMSE (NaN for the nonlinear study)
  double rmse_pred = 0.0;  ///< test prediction RMSE (NaN when no test set)
  int rank = 0;
  double lambda = 0.0;
};

struct MethodSummary {
  Method method = Method::one_term;
  double fpr = 0.0;
  double tpr = 0.0;
  double rmse = 0.0;
  double rmse_pred = 0.0;
  double rank = 0.0;
};

struct StudyReport {
  StudyConfig config;
  std::vector<RepMetrics> reps;        ///< in replication order, methods in config order
  std::vector<MethodSummary> medians;  ///< one row per method
};

/// Seed of replication `rep` of a study seeded with `seed`.
std::uint64_t rep_seed(std::uint64_t seed, int rep);

using ProgressFn = std::function<void(const std::string&)>;

/// Runs every replication and method. Output does not depend on `threads`.
StudyReport run_study(const StudyConfig& config, const ProgressFn& progress = {});

/// Median table: study,method,n,sigma,reps,fpr_pct,tpr_pct,rmse_x100,pred_rmse,rank.
void write_report(std::ostream& out, const StudyReport& report);
/// Per-replication rows.
void write_report_reps(std::ostream& out, const StudyReport& report);

double median(std::vector<double> values);

}  // namespace skpd

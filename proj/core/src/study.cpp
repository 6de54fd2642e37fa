#include "skpd/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "skpd/error.hpp"
#include "skpd/metrics.hpp"
#include "skpd/simgen.hpp"
#include "skpd/tuning.hpp"

namespace skpd {

StudyKind parse_study(const std::string& name) {
  if (name == "circle" || name == "one-circle") return StudyKind::circle;
  if (name == "three-circles") return StudyKind::three_circles;
  if (name == "butterfly") return StudyKind::butterfly;
  if (name == "nonlinear") return StudyKind::nonlinear;
  if (name == "one-ball") return StudyKind::one_ball;
  if (name == "two-balls") return StudyKind::two_balls;
  throw InvalidArgument("unknown study '" + name + "'");
}

const char* to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::circle: return "circle";
    case StudyKind::three_circles: return "three-circles";
    case StudyKind::butterfly: return "butterfly";
    case StudyKind::nonlinear: return "nonlinear";
    case StudyKind::one_ball: return "one-ball";
    case StudyKind::two_balls: return "two-balls";
  }
  return "unknown";
}

const char* to_string(Method method) {
  switch (method) {
    case Method::one_term: return "1-term";
    case Method::r_term: return "R-term";
    case Method::nonlinear: return "NL-SKPD";
    case Method::local: return "local-smooth";
  }
  return "unknown";
}

StudyConfig default_study(StudyKind kind) {
  StudyConfig c;
  c.kind = kind;
  c.lambda_grid = parse_real_grid("0.4:2:9");
  c.nl_lambda_grid = c.lambda_grid;
  c.methods = {Method::one_term, Method::r_term};
  switch (kind) {
    case StudyKind::circle:
    case StudyKind::three_circles:
    case StudyKind::butterfly:
      break;
    case StudyKind::nonlinear:
      c.methods = {Method::nonlinear, Method::r_term};
      break;
    case StudyKind::one_ball:
    case StudyKind::two_balls:
      c.image_dims = {40, 48, 40};
      c.block_dims = {8, 8, 8};
      c.n = 600;
      c.sigma = 3.0;
      break;
  }
  return c;
}

std::uint64_t rep_seed(std::uint64_t seed, int rep) {
  // splitmix64 finalizer over (seed, rep).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(rep) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 == 1 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SignalSpec signal_for(const StudyConfig& config) {
  SignalSpec spec;
  spec.image_dims = config.image_dims;
  switch (config.kind) {
    case StudyKind::circle: spec.kind = SignalKind::one_circle; break;
    case StudyKind::three_circles:
    case StudyKind::nonlinear: spec.kind = SignalKind::three_circles; break;
    case StudyKind::butterfly:
      spec.kind = SignalKind::butterfly;
      spec.mask_path = config.mask_path;
      break;
    case StudyKind::one_ball: spec.kind = SignalKind::one_ball; break;
    case StudyKind::two_balls: spec.kind = SignalKind::two_balls; break;
  }
  return spec;
}

RepMetrics score(Method m, int rep, const NdArray& c_hat, const NdArray& c_true, bool coeff_rmse) {
  RepMetrics out;
  out.method = m;
  out.rep = rep;
  const Rates rates = fpr_tpr(c_hat, c_true);
  out.fpr = rates.fpr.value_or(kNaN);
  out.tpr = rates.tpr.value_or(kNaN);
  out.rmse = coeff_rmse ? rmse_coeff(c_hat, c_true) : kNaN;
  out.rmse_pred = kNaN;
  return out;
}

struct LinearChoice {
  MultiTermModel model;
  int rank = 0;
  double lambda = 0.0;
};

LinearChoice choose(const Selection& s) {
  return LinearChoice{s.fit.model, s.fit.status == FitStatus::zero_iterate ? 0 : s.fit.model.rank(),
                      s.lambda};
}

// Best BIC over the rank grid, reusing the rank-1 search for the 1-term method.
void linear_fits(const StudyConfig& config, const Dataset& data, LinearChoice* one, LinearChoice* multi) {
  const bool want_one = one != nullptr;
  const bool want_multi = multi != nullptr;
  std::vector<int> higher;
  // The B step is an OLS over R * block_size coefficients and needs more samples than that.
  for (int r : config.rank_grid) {
    if (r > 1 && static_cast<std::size_t>(r) * data.block_size() < data.n()) higher.push_back(r);
  }
  const bool grid_has_one =
      std::find(config.rank_grid.begin(), config.rank_grid.end(), 1) != config.rank_grid.end();
  std::optional<Selection> sel_one;
  if (want_one || (want_multi && grid_has_one)) {
    sel_one = select_by_bic(data, config.lambda_grid, {1}, config.fit);
    if (want_one) *one = choose(*sel_one);
  }
  if (!want_multi) return;
  if (higher.empty()) {
    *multi = choose(*sel_one);
    return;
  }
  Selection sel_hi = select_by_bic(data, config.lambda_grid, higher, config.fit);
  double best_one = std::numeric_limits<double>::infinity();
  if (sel_one) {
    for (const auto& row : sel_one->table) {
      if (row.ok) best_one = std::min(best_one, row.bic);
    }
  }
  double best_hi = std::numeric_limits<double>::infinity();
  for (const auto& row : sel_hi.table) {
    if (row.ok) best_hi = std::min(best_hi, row.bic);
  }
  *multi = (sel_one && best_one <= best_hi) ? choose(*sel_one) : choose(sel_hi);
}

LocalSmoothingResult local_by_bic(const StudyConfig& config, const Dataset& data, double* lambda_out) {
  std::optional<LocalSmoothingResult> best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (double lambda : config.lambda_grid) {
    LocalSmoothingResult res = fit_local_smoothing(data, lambda, config.fit);
    const Vector yhat = linear_response(data, res.coefficients);
    const double rss = std::max((data.y - yhat).squaredNorm() / static_cast<double>(data.n()),
                                std::numeric_limits<double>::min());
    const std::size_t s0 = static_cast<std::size_t>((res.a.array() != 0.0).count());
    const double bic = modified_bic(rss, data.n(), s0, 1, data.grid_size());
    if (!best || bic < best_bic) {
      best_bic = bic;
      best = std::move(res);
      *lambda_out = lambda;
    }
  }
  return std::move(*best);
}

std::vector<RepMetrics> run_linear_rep(const StudyConfig& config, int rep, const NdArray& c_true) {
  const GeneratedStudy study =
      gen_dataset(c_true, config.block_dims, config.n, config.sigma, rep_seed(config.seed, rep));
  const bool want_one = std::find(config.methods.begin(), config.methods.end(), Method::one_term) !=
                        config.methods.end();
  const bool want_multi = std::find(config.methods.begin(), config.methods.end(), Method::r_term) !=
                          config.methods.end();
  LinearChoice one, multi;
  if (want_one || want_multi) {
    linear_fits(config, study.data, want_one ? &one : nullptr, want_multi ? &multi : nullptr);
  }
  std::vector<RepMetrics> out;
  for (Method m : config.methods) {
    switch (m) {
      case Method::one_term:
      case Method::r_term: {
        const LinearChoice& ch = m == Method::one_term ? one : multi;
        RepMetrics r = score(m, rep, coefficients(ch.model), c_true, true);
        r.rank = ch.rank;
        r.lambda = ch.lambda;
        out.push_back(r);
        break;
      }
      case Method::local: {
        double lambda = 0.0;
        const LocalSmoothingResult res = local_by_bic(config, study.data, &lambda);
        RepMetrics r = score(m, rep, res.coefficients, c_true, true);
        r.rank = 1;
        r.lambda = lambda;
        out.push_back(r);
        break;
      }
      case Method::nonlinear:
        throw InvalidArgument("the nonlinear method needs the nonlinear study");
    }
  }
  return out;
}

std::vector<RepMetrics> run_nonlinear_rep(const StudyConfig& config, int rep) {
  SignalSpec spec = signal_for(config);
  const PlantedSignal terms = planted_terms(spec);
  const std::uint64_t s = rep_seed(config.seed, rep);
  const GeneratedStudy train =
      gen_nonlinear_response(terms, Activation::relu, config.block_dims, config.n, config.sigma, s);
  const GeneratedStudy valid = gen_nonlinear_response(terms, Activation::relu, config.block_dims,
                                                      config.n_validation, config.sigma, rep_seed(s, 1));
  const GeneratedStudy test = gen_nonlinear_response(terms, Activation::relu, config.block_dims,
                                                     config.n_test, config.sigma, rep_seed(s, 2));
  const NdArray& truth = train.c_true;

  // The ReLU response has a nonzero mean that a model without intercept cannot absorb, so the
  // linear baselines see centered responses and predict train mean + <X, C>; NL-SKPD fits an intercept.
  const double y_mean = train.data.y.mean();
  std::optional<Dataset> centered;
  auto linear_train = [&]() -> const Dataset& {
    if (!centered) {
      centered = train.data;
      centered->y.array() -= y_mean;
    }
    return *centered;
  };
  auto linear_pred = [&](const Vector& yhat) {
    return rmse_pred((yhat.array() + y_mean).matrix(), test.data.y);
  };

  std::vector<RepMetrics> out;
  for (Method m : config.methods) {
    if (m == Method::nonlinear) {
      std::vector<double> grid = config.nl_lambda_grid;
      std::sort(grid.begin(), grid.end(), std::greater<>());
      NonlinearModel model = initial_nonlinear_model(train.data, config.nl_rank, Activation::relu, s);
      NonlinearModel best_model = model;
      double best_val = std::numeric_limits<double>::infinity();
      double best_lambda = grid.front();
      for (std::size_t k = 0; k < grid.size(); ++k) {
        TrainConfig tc = config.train;
        tc.lambda = grid[k];
        tc.seed = s;
        tc.intercept = true;
        tc.epochs = k == 0 ? config.nl_epochs_first : config.nl_epochs_next;
        NonlinearFit fit = fit_nonlinear(train.data, config.nl_rank, Activation::relu, tc, &model);
        model = fit.model;
        const double v = rmse_pred(predict(model, valid.data), valid.data.y);
        if (v < best_val) {
          best_val = v;
          best_model = model;
          best_lambda = grid[k];
        }
      }
      RepMetrics r = score(m, rep, coefficients(best_model), truth, false);
      r.rmse_pred = rmse_pred(predict(best_model, test.data), test.data.y);
      r.rank = best_model.rank();
      r.lambda = best_lambda;
      out.push_back(r);
    } else if (m == Method::r_term || m == Method::one_term) {
      LinearChoice ch;
      if (m == Method::one_term) {
        linear_fits(config, linear_train(), &ch, nullptr);
      } else {
        linear_fits(config, linear_train(), nullptr, &ch);
      }
      RepMetrics r = score(m, rep, coefficients(ch.model), truth, false);
      r.rmse_pred = linear_pred(predict_linear(ch.model, test.data));
      r.rank = ch.rank;
      r.lambda = ch.lambda;
      out.push_back(r);
    } else {
      double lambda = 0.0;
      const LocalSmoothingResult res = local_by_bic(config, linear_train(), &lambda);
      RepMetrics r = score(m, rep, res.coefficients, truth, false);
      r.rmse_pred = linear_pred(linear_response(test.data, res.coefficients));
      r.rank = 1;
      r.lambda = lambda;
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

StudyReport run_study(const StudyConfig& config, const ProgressFn& progress) {
  if (config.reps < 1) throw InvalidArgument("run_study: reps must be positive");
  if (config.methods.empty()) throw InvalidArgument("run_study: no methods");
  StudyReport report;
  report.config = config;

  NdArray c_true;
  if (config.kind != StudyKind::nonlinear) c_true = make_signal(signal_for(config));

  std::vector<std::vector<RepMetrics>> per_rep(static_cast<std::size_t>(config.reps));
  std::vector<std::string> errors(per_rep.size());
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int rep = next++; rep < config.reps; rep = next++) {
      try {
        per_rep[static_cast<std::size_t>(rep)] = config.kind == StudyKind::nonlinear
                                                     ? run_nonlinear_rep(config, rep)
                                                     : run_linear_rep(config, rep, c_true);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(rep)] = e.what();
      }
      if (progress) progress(std::string(to_string(config.kind)) + ": replication " + std::to_string(rep + 1) + "/" + std::to_string(config.reps) + " done");
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(config.reps)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw Error("replication " + std::to_string(i) + " failed: " + errors[i]);
  }
  for (auto& rows : per_rep) report.reps.insert(report.reps.end(), rows.begin(), rows.end());

  for (Method m : config.methods) {
    std::vector<double> fpr, tpr, rmse, pred, rank;
    for (const auto& r : report.reps) {
      if (r.method != m) continue;
      fpr.push_back(r.fpr);
      tpr.push_back(r.tpr);
      rmse.push_back(r.rmse);
      pred.push_back(r.rmse_pred);
      rank.push_back(r.rank);
    }
    report.medians.push_back(MethodSummary{m, median(fpr), median(tpr), median(rmse), median(pred), median(rank)});
  }
  return report;
}

namespace {

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

void write_report(std::ostream& out, const StudyReport& report) {
  const auto& c = report.config;
  out << "study,method,n,sigma,reps,fpr_pct,tpr_pct,rmse_x100,pred_rmse,rank\n";
  for (const auto& m : report.medians) {
    out << to_string(c.kind) << ',' << to_string(m.method) << ',' << c.n << ',' << fixed(c.sigma, 2) << ','
        << c.reps << ',' << fixed(100.0 * m.fpr, 2) << ',' << fixed(100.0 * m.tpr, 2) << ','
        << fixed(100.0 * m.rmse, 2) << ',' << fixed(m.rmse_pred, 3) << ',' << fixed(m.rank, 1) << '\n';
  }
}

void write_report_reps(std::ostream& out, const StudyReport& report) {
  out << "rep,method,fpr,tpr,rmse,rmse_pred,rank,lambda\n";
  for (const auto& r : report.reps) {
    out << r.rep << ',' << to_string(r.method) << ',' << fixed(r.fpr, 6) << ',' << fixed(r.tpr, 6) << ','
        << fixed(r.rmse, 6) << ',' << fixed(r.rmse_pred, 6) << ',' << r.rank << ',' << fixed(r.lambda, 4)
        << '\n';
  }
}

}  // namespace skpd

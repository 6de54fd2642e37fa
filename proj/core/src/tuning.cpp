#include "skpd/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "skpd/error.hpp"

namespace skpd {

double modified_bic(double rss_mean, std::size_t n, std::size_t s0, std::size_t rank,
                    std::size_t p_total) {
  if (!(rss_mean > 0.0)) throw InvalidArgument("modified_bic: rss_mean must be positive");
  if (n < 1) throw InvalidArgument("modified_bic: n must be positive");
  const double inner = std::log(static_cast<double>(rank) * static_cast<double>(p_total));
  if (!(inner > 1.0)) {
    throw InvalidArgument("modified_bic: R * p_total must exceed e so that log log is positive");
  }
  const double cn = std::log(inner);
  const double nd = static_cast<double>(n);
  return std::log(rss_mean) + cn * std::log(nd) / nd * static_cast<double>(s0);
}

Selection select_by_bic(const Dataset& data, const std::vector<double>& lambda_grid,
                        const std::vector<int>& rank_grid, const FitConfig& config) {
  if (lambda_grid.empty() || rank_grid.empty()) throw InvalidArgument("select_by_bic: empty grid");
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw InvalidArgument("select_by_bic: lambdas must be positive");
  }
  std::vector<std::size_t> order(lambda_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lambda_grid[a] > lambda_grid[b]; });

  std::vector<int> ranks = rank_grid;
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());

  Selection sel;
  bool have_best = false;
  double best_bic = std::numeric_limits<double>::infinity();
  std::ostringstream failures;
  // Smallest positive rss used when a noiseless fit is exact.
  const double rss_floor = std::numeric_limits<double>::min();

  for (int r : ranks) {
    std::vector<ScoreRow> rows(lambda_grid.size());
    std::vector<FitResult> fits(lambda_grid.size());
    const FitResult* prev = nullptr;
    double prev_lambda = 0.0;
    for (std::size_t idx : order) {
      ScoreRow& row = rows[idx];
      row.lambda = lambda_grid[idx];
      row.rank = r;
      FitConfig cfg = config;
      cfg.lambda_tgt = lambda_grid[idx];
      const Matrix* warm = nullptr;
      if (prev != nullptr && prev->status != FitStatus::zero_iterate &&
          prev->status != FitStatus::degenerate_init) {
        cfg.lambda0 = prev_lambda;
        warm = &prev->model.abar;
      } else {
        cfg.lambda0 = config.lambda0 > 0.0 ? std::max(config.lambda0, cfg.lambda_tgt) : 0.0;
      }
      try {
        fits[idx] = fit_multi_term(data, r, cfg, warm);
        const FitResult& f = fits[idx];
        row.fitted_rank = f.status == FitStatus::zero_iterate || f.status == FitStatus::degenerate_init
                              ? 0
                              : f.model.rank();
        row.s0 = f.s0;
        row.s0_post = f.s0_post;
        row.rss_mean = f.rss_mean;
        row.bic = modified_bic(std::max(f.rss_mean, rss_floor), data.n(), f.s0,
                               static_cast<std::size_t>(r), data.grid_size());
        prev = &fits[idx];
        prev_lambda = row.lambda;
      } catch (const Error& e) {
        row.ok = false;
        row.error = e.what();
        failures << "[lambda=" << row.lambda << ", R=" << r << "] " << e.what() << "; ";
        continue;
      }
    }
    // Grid order within R is the caller's lambda order; ties prefer larger lambda.
    for (std::size_t idx : order) {
      const ScoreRow& row = rows[idx];
      if (!row.ok) continue;
      if (!have_best || row.bic < best_bic) {
        have_best = true;
        best_bic = row.bic;
        sel.lambda = row.lambda;
        sel.rank = r;
        sel.fit = std::move(fits[idx]);
      }
    }
    sel.table.insert(sel.table.end(), rows.begin(), rows.end());
  }
  if (!have_best) throw Error("select_by_bic: every cell failed: " + failures.str());
  return sel;
}

std::vector<double> parse_real_grid(const std::string& text) {
  std::vector<double> out;
  try {
    const auto c1 = text.find(':');
    if (c1 != std::string::npos) {
      const auto c2 = text.find(':', c1 + 1);
      if (c2 == std::string::npos) throw InvalidArgument("expected lo:hi:count");
      const double lo = std::stod(text.substr(0, c1));
      const double hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
      const int count = std::stoi(text.substr(c2 + 1));
      if (count < 1) throw InvalidArgument("count must be positive");
      for (int i = 0; i < count; ++i) {
        out.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
      }
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad real grid '" + text + "'");
  }
  if (out.empty()) throw InvalidArgument("empty grid '" + text + "'");
  return out;
}

std::vector<int> parse_int_grid(const std::string& text) {
  std::vector<int> out;
  try {
    const auto c = text.find(':');
    if (c != std::string::npos) {
      const int lo = std::stoi(text.substr(0, c));
      const int hi = std::stoi(text.substr(c + 1));
      if (hi < lo) throw InvalidArgument("hi < lo");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad integer grid '" + text + "'");
  }
  if (out.empty()) throw InvalidArgument("empty grid '" + text + "'");
  return out;
}

void write_score_table(std::ostream& out, const std::vector<ScoreRow>& rows) {
  out << "lambda,R,s0,rss_mean,bic,s0_post,fitted_rank,status\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.lambda << ',' << r.rank << ',' << r.s0 << ',' << r.rss_mean << ',';
    if (r.ok) {
      out << r.bic;
    } else {
      out << "nan";
    }
    out << ',' << r.s0_post << ',' << r.fitted_rank << ',' << (r.ok ? "ok" : "failed") << '\n';
  }
}

}  // namespace skpd

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "skpd/dataset.hpp"
#include "skpd/skpd_linear.hpp"

namespace skpd {

/// log(rss_mean) + C_n log(n) / n * s0 with C_n = log(log(R * p_total)).
/// Throws InvalidArgument unless rss_mean > 0 and R * p_total > e.
double modified_bic(double rss_mean, std::size_t n, std::size_t s0, std::size_t rank,
                    std::size_t p_total);

struct ScoreRow {
  double lambda = 0.0;
  int rank = 0;             ///< requested rank of the cell
  int fitted_rank = 0;      ///< rank after dropping dead terms
  std::size_t s0 = 0;       ///< nnz of A~ (pre-orthonormalization), used in the score
  std::size_t s0_post = 0;  ///< nnz of A-hat
  double rss_mean = 0.0;
  double bic = 0.0;
  bool ok = true;
  std::string error;
};

struct Selection {
  double lambda = 0.0;
  int rank = 0;
  FitResult fit;
  std::vector<ScoreRow> table;
};

/**
 * Fits every (lambda, R) cell and returns the BIC minimizer. Within each R,
 * lambdas run in descending order with warm starts (lambda0 = previous
 * lambda_tgt, A-hat = previous estimate). Ties go to the smaller R, then the
 * larger lambda. The table is in grid order: R ascending, lambda as given.
 */
Selection select_by_bic(const Dataset& data, const std::vector<double>& lambda_grid,
                        const std::vector<int>& rank_grid, const FitConfig& config);

/// "lo:hi:count" (inclusive, evenly spaced) or a comma list.
std::vector<double> parse_real_grid(const std::string& text);
/// "lo:hi" (inclusive) or a comma list.
std::vector<int> parse_int_grid(const std::string& text);

/// CSV with header lambda,R,s0,rss_mean,bic (plus s0_post, fitted_rank, status).
void write_score_table(std::ostream& out, const std::vector<ScoreRow>& rows);

}  // namespace skpd

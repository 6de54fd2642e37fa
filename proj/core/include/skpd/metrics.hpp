#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skpd/dataset.hpp"
#include "skpd/ndarray.hpp"

namespace skpd {

/// Pixel rates of the nonzero pattern; a rate is empty when its denominator is zero.
struct Rates {
  std::optional<double> fpr;
  std::optional<double> tpr;
};

Rates fpr_tpr(const NdArray& c_hat, const NdArray& c_true, double zero_eps = 1e-10);

/// ||C-hat - C||_F / sqrt(number of pixels).
double rmse_coeff(const NdArray& c_hat, const NdArray& c_true);

/// sqrt(mean (yhat - y)^2).
double rmse_pred(const Vector& yhat, const Vector& y);

/// |A and B| / |A or B| of two 0/1 masks; 1 when both are empty.
double jaccard(const NdArray& a, const NdArray& b);

/// Estimated coefficient map for a (possibly permuted) dataset.
using RegionFit = std::function<NdArray(const Dataset&)>;

struct PermutationOptions {
  std::size_t n_perm = 100;
  std::uint64_t seed = 1;
  double jaccard_threshold = 0.5;
  bool force_identity = false;  ///< every replicate uses the identity permutation
};

struct PermutationResult {
  double p_value = 0.0;
  std::size_t detections = 0;
  std::size_t valid = 0;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;
};

/**
 * Permutes the masked pixels across samples (one permutation of the sample
 * indices per replicate, applied to the masked sub-vector of every image),
 * refits, and counts replicates whose detected region has Jaccard overlap
 * >= threshold with `region`. p = detections / successful replicates.
 */
PermutationResult permutation_region_test(const Dataset& data, const NdArray& region,
                                          const RegionFit& fit, const PermutationOptions& opts);

}  // namespace skpd

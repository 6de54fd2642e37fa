#include "skpd/metrics.hpp"

#include <cmath>
#include <numeric>

#include "skpd/error.hpp"
#include "skpd/rearrange.hpp"
#include "skpd/rng.hpp"

namespace skpd {

Rates fpr_tpr(const NdArray& c_hat, const NdArray& c_true, double zero_eps) {
  if (c_hat.dims() != c_true.dims()) throw ShapeError("fpr_tpr: dims differ");
  std::size_t neg = 0, pos = 0, fp = 0, tp = 0;
  for (std::size_t i = 0; i < c_true.size(); ++i) {
    const bool est = std::abs(c_hat[i]) > zero_eps;
    if (std::abs(c_true[i]) > zero_eps) {
      ++pos;
      if (est) ++tp;
    } else {
      ++neg;
      if (est) ++fp;
    }
  }
  Rates r;
  if (neg > 0) r.fpr = static_cast<double>(fp) / static_cast<double>(neg);
  if (pos > 0) r.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  return r;
}

double rmse_coeff(const NdArray& c_hat, const NdArray& c_true) {
  if (c_hat.dims() != c_true.dims()) throw ShapeError("rmse_coeff: dims differ");
  double s = 0.0;
  for (std::size_t i = 0; i < c_true.size(); ++i) {
    const double d = c_hat[i] - c_true[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(c_true.size()));
}

double rmse_pred(const Vector& yhat, const Vector& y) {
  if (yhat.size() != y.size() || y.size() == 0) throw ShapeError("rmse_pred: empty or mismatched");
  return std::sqrt((yhat - y).squaredNorm() / static_cast<double>(y.size()));
}

double jaccard(const NdArray& a, const NdArray& b) {
  if (a.dims() != b.dims()) throw ShapeError("jaccard: dims differ");
  std::size_t both = 0, either = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0.0;
    const bool y = b[i] != 0.0;
    both += (x && y) ? 1 : 0;
    either += (x || y) ? 1 : 0;
  }
  return either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
}

PermutationResult permutation_region_test(const Dataset& data, const NdArray& region,
                                          const RegionFit& fit, const PermutationOptions& opts) {
  if (opts.n_perm < 1) throw InvalidArgument("permutation_region_test: n_perm must be positive");
  if (region.dims() != data.shape.image_dims()) throw ShapeError("permutation_region_test: region dims");
  const RowMatrix rmask = rearrange(region, data.shape);
  std::vector<Eigen::Index> cells;  // flat offsets inside X~_i
  for (Eigen::Index k = 0; k < rmask.size(); ++k) {
    if (rmask.data()[k] != 0.0) cells.push_back(k);
  }
  if (cells.empty()) throw InvalidArgument("permutation_region_test: empty region");

  const std::size_t n = data.n();
  const auto per = static_cast<Eigen::Index>(data.grid_size() * data.block_size());
  PermutationResult out;
  Dataset work = data;
  work.raw.reset();
  std::vector<std::size_t> perm(n);
  for (std::size_t rep = 0; rep < opts.n_perm; ++rep) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (!opts.force_identity) {
      RandomStream rs(opts.seed, Stream::permutation, static_cast<std::uint32_t>(rep));
      for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rs.below(i)]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = data.xr.data() + static_cast<Eigen::Index>(perm[i]) * per;
      double* dst = work.xr.data() + static_cast<Eigen::Index>(i) * per;
      for (Eigen::Index k : cells) dst[k] = src[k];
    }
    try {
      const NdArray c_hat = fit(work);
      NdArray detected(c_hat.dims());
      for (std::size_t k = 0; k < c_hat.size(); ++k) detected[k] = std::abs(c_hat[k]) > 1e-10 ? 1.0 : 0.0;
      ++out.valid;
      if (jaccard(detected, region) >= opts.jaccard_threshold) ++out.detections;
    } catch (const Error& e) {
      ++out.failures;
      out.failure_messages.push_back("replicate " + std::to_string(rep) + ": " + e.what());
    }
  }
  out.p_value = out.valid == 0 ? std::nan("") : static_cast<double>(out.detections) / static_cast<double>(out.valid);
  return out;
}

}  // namespace skpd

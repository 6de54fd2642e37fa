#pragma once

#include <optional>

#include "skpd/linalg.hpp"
#include "skpd/ndarray.hpp"

namespace skpd {

/**
 * Responses plus the rearranged designs X~_i = R(X_i), stored contiguously:
 * rows [i*P, (i+1)*P) of `xr` hold X~_i, so `xr` is (n*P) x Q with
 * P = grid size and Q = block size.
 */
struct Dataset {
  KpdShape shape;
  Vector y;
  RowMatrix xr;
  /// Raw stacked images (n, D...), kept only on request.
  std::optional<NdArray> raw;

  std::size_t n() const noexcept { return static_cast<std::size_t>(y.size()); }
  std::size_t grid_size() const noexcept { return shape.grid_size(); }
  std::size_t block_size() const noexcept { return shape.block_size(); }

  /// View of X~_i (P x Q).
  Eigen::Map<const RowMatrix> design(std::size_t i) const {
    const auto p = static_cast<Eigen::Index>(grid_size());
    const auto q = static_cast<Eigen::Index>(block_size());
    return Eigen::Map<const RowMatrix>(xr.data() + static_cast<Eigen::Index>(i) * p * q, p, q);
  }
};

/**
 * Builds a dataset from stacked images of dims (n, D1, D2[, D3]).
 * Throws ShapeError when the images do not match `block_dims` or y has the wrong length.
 */
Dataset make_dataset(const NdArray& images, const Vector& y, const Dims& block_dims,
                     bool retain_raw = false);

/// Rows subset, e.g. a train/validation split.
Dataset subset(const Dataset& data, std::size_t begin, std::size_t end);

/// Sum_i X~_i y_i, accumulated in sample order.
Matrix weighted_design_sum(const Dataset& data);

/// <X_i, C> for every sample, computed from the rearranged designs.
Vector linear_response(const Dataset& data, const NdArray& c);

}  // namespace skpd

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace skpd {

using Dims = std::vector<std::size_t>;

std::size_t dims_product(const Dims& dims);
std::string dims_to_string(const Dims& dims);

/// Dense row-major real array of rank 1 to 4 (last index fastest).
class NdArray {
 public:
  NdArray() = default;
  explicit NdArray(Dims dims, double fill = 0.0);
  NdArray(Dims dims, std::vector<double> data);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  /// Flat offset of a multi-index, bounds checked.
  std::size_t offset(std::span<const std::size_t> index) const;

  NdArray& operator+=(const NdArray& other);
  NdArray& operator*=(double alpha);

  bool operator==(const NdArray& other) const = default;

 private:
  Dims dims_;
  std::vector<double> data_;
};

NdArray operator+(NdArray lhs, const NdArray& rhs);
NdArray operator*(double alpha, NdArray a);

/// Frobenius inner product of equally shaped arrays.
double inner(const NdArray& a, const NdArray& b);
double frobenius_norm(const NdArray& a);

/// Image dimensions split into a grid of equal blocks: image = grid x block.
class KpdShape {
 public:
  KpdShape() = default;
  /// Throws ShapeError unless ranks agree (2 or 3) and every block dim divides its image dim.
  KpdShape(Dims image_dims, Dims block_dims);

  const Dims& image_dims() const noexcept { return image_; }
  const Dims& block_dims() const noexcept { return block_; }
  const Dims& grid_dims() const noexcept { return grid_; }
  std::size_t rank() const noexcept { return image_.size(); }

  /// Number of blocks, p1*p2[*p3].
  std::size_t grid_size() const noexcept { return dims_product(grid_); }
  /// Pixels per block, d1*d2[*d3].
  std::size_t block_size() const noexcept { return dims_product(block_); }
  std::size_t image_size() const noexcept { return dims_product(image_); }

  bool operator==(const KpdShape& other) const = default;

 private:
  Dims image_;
  Dims block_;
  Dims grid_;
};

/// Parses "128x128" or "40x48x40".
Dims parse_dims(const std::string& text);

}  // namespace skpd

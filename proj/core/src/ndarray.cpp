#include "skpd/ndarray.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "skpd/error.hpp"

namespace skpd {

std::size_t dims_product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string dims_to_string(const Dims& dims) {
  std::ostringstream out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out << 'x';
    out << dims[i];
  }
  return out.str();
}

namespace {

void check_dims(const Dims& dims) {
  if (dims.empty() || dims.size() > 4) {
    throw ShapeError("array rank must be 1..4, got " + std::to_string(dims.size()));
  }
  for (auto d : dims) {
    if (d == 0) throw ShapeError("array dims must be positive: " + dims_to_string(dims));
  }
}

}  // namespace

NdArray::NdArray(Dims dims, double fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(dims_product(dims_), fill);
}

NdArray::NdArray(Dims dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (data_.size() != dims_product(dims_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match dims " + dims_to_string(dims_));
  }
}

std::size_t NdArray::offset(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) throw ShapeError("index rank mismatch");
  std::size_t flat = 0;
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    if (index[a] >= dims_[a]) throw ShapeError("index out of range");
    flat = flat * dims_[a] + index[a];
  }
  return flat;
}

NdArray& NdArray::operator+=(const NdArray& other) {
  if (dims_ != other.dims_) {
    throw ShapeError("cannot add " + dims_to_string(other.dims_) + " to " +
                     dims_to_string(dims_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

NdArray& NdArray::operator*=(double alpha) {
  for (auto& v : data_) v *= alpha;
  return *this;
}

NdArray operator+(NdArray lhs, const NdArray& rhs) { return lhs += rhs; }
NdArray operator*(double alpha, NdArray a) { return a *= alpha; }

double inner(const NdArray& a, const NdArray& b) {
  if (a.dims() != b.dims()) throw ShapeError("inner product of mismatched arrays");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double frobenius_norm(const NdArray& a) { return std::sqrt(inner(a, a)); }

KpdShape::KpdShape(Dims image_dims, Dims block_dims)
    : image_(std::move(image_dims)), block_(std::move(block_dims)) {
  if (image_.size() != block_.size()) {
    throw ShapeError("image rank " + std::to_string(image_.size()) +
                     " differs from block rank " + std::to_string(block_.size()));
  }
  if (image_.size() < 2 || image_.size() > 3) {
    throw ShapeError("only 2D and 3D images are supported");
  }
  grid_.resize(image_.size());
  for (std::size_t a = 0; a < image_.size(); ++a) {
    if (block_[a] == 0 || image_[a] == 0 || image_[a] % block_[a] != 0) {
      throw ShapeError("block " + dims_to_string(block_) + " does not divide image " +
                       dims_to_string(image_));
    }
    grid_[a] = image_[a] / block_[a];
  }
}

Dims parse_dims(const std::string& text) {
  Dims dims;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find_first_of("xX,", pos);
    if (next == std::string::npos) next = text.size();
    const auto token = text.substr(pos, next - pos);
    if (token.empty()) throw InvalidArgument("malformed dims: '" + text + "'");
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(token, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("malformed dims: '" + text + "'");
    }
    if (used != token.size() || v == 0) throw InvalidArgument("malformed dims: '" + text + "'");
    dims.push_back(static_cast<std::size_t>(v));
    pos = next + 1;
  }
  return dims;
}

}  // namespace skpd

#include "skpd/dataset.hpp"

#include "skpd/error.hpp"
#include "skpd/rearrange.hpp"

namespace skpd {

Dataset make_dataset(const NdArray& images, const Vector& y, const Dims& block_dims,
                     bool retain_raw) {
  if (images.rank() < 3) {
    throw ShapeError("make_dataset: expected stacked images (n, D...), got " +
                     dims_to_string(images.dims()));
  }
  const std::size_t n = images.dims()[0];
  const Dims image_dims(images.dims().begin() + 1, images.dims().end());
  if (static_cast<std::size_t>(y.size()) != n) {
    throw ShapeError("make_dataset: " + std::to_string(y.size()) + " responses for " +
                     std::to_string(n) + " images");
  }
  Dataset out;
  out.shape = KpdShape(image_dims, block_dims);
  out.y = y;
  const std::size_t p = out.shape.grid_size();
  const std::size_t q = out.shape.block_size();
  const std::size_t d = out.shape.image_size();
  out.xr.resize(static_cast<Eigen::Index>(n * p), static_cast<Eigen::Index>(q));
  for (std::size_t i = 0; i < n; ++i) {
    rearrange_into(images.data().subspan(i * d, d), out.shape, out.xr.data() + i * p * q);
  }
  if (retain_raw) out.raw = images;
  return out;
}

Dataset subset(const Dataset& data, std::size_t begin, std::size_t end) {
  if (begin >= end || end > data.n()) throw InvalidArgument("subset: bad row range");
  const auto p = static_cast<Eigen::Index>(data.grid_size());
  const auto b = static_cast<Eigen::Index>(begin);
  const auto m = static_cast<Eigen::Index>(end - begin);
  Dataset out;
  out.shape = data.shape;
  out.y = data.y.segment(b, m);
  out.xr = data.xr.middleRows(b * p, m * p);
  if (data.raw) {
    const std::size_t d = data.shape.image_size();
    Dims dims = data.raw->dims();
    dims[0] = end - begin;
    const auto src = data.raw->data().subspan(begin * d, (end - begin) * d);
    out.raw = NdArray(dims, std::vector<double>(src.begin(), src.end()));
  }
  return out;
}

Matrix weighted_design_sum(const Dataset& data) {
  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(data.grid_size()),
                          static_cast<Eigen::Index>(data.block_size()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    s.noalias() += data.y[static_cast<Eigen::Index>(i)] * data.design(i);
  }
  return s;
}

Vector linear_response(const Dataset& data, const NdArray& c) {
  if (c.dims() != data.shape.image_dims()) throw ShapeError("linear_response: coefficient dims");
  const RowMatrix cr = rearrange(c, data.shape);
  Vector out(static_cast<Eigen::Index>(data.n()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    out[static_cast<Eigen::Index>(i)] = data.design(i).cwiseProduct(cr).sum();
  }
  return out;
}

}  // namespace skpd

#include "skpd/rearrange.hpp"

#include "skpd/error.hpp"

namespace skpd {

namespace {

// Calls fn(row, col, image_offset) for every pixel, row = block index, col = pixel within block.
template <typename Fn>
void for_each_block_pixel(const KpdShape& shape, Fn&& fn) {
  const auto& img = shape.image_dims();
  const auto& blk = shape.block_dims();
  const auto& grid = shape.grid_dims();
  if (shape.rank() == 2) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < grid[0]; ++j) {
      for (std::size_t k = 0; k < grid[1]; ++k, ++row) {
        std::size_t col = 0;
        for (std::size_t u = 0; u < blk[0]; ++u) {
          const std::size_t base = (j * blk[0] + u) * img[1] + k * blk[1];
          for (std::size_t v = 0; v < blk[1]; ++v, ++col) fn(row, col, base + v);
        }
      }
    }
    return;
  }
  std::size_t row = 0;
  for (std::size_t j = 0; j < grid[0]; ++j) {
    for (std::size_t k = 0; k < grid[1]; ++k) {
      for (std::size_t l = 0; l < grid[2]; ++l, ++row) {
        std::size_t col = 0;
        for (std::size_t u = 0; u < blk[0]; ++u) {
          for (std::size_t v = 0; v < blk[1]; ++v) {
            const std::size_t base =
                ((j * blk[0] + u) * img[1] + (k * blk[1] + v)) * img[2] + l * blk[2];
            for (std::size_t w = 0; w < blk[2]; ++w, ++col) fn(row, col, base + w);
          }
        }
      }
    }
  }
}

}  // namespace

void rearrange_into(std::span<const double> image, const KpdShape& shape, double* out) {
  if (image.size() != shape.image_size()) throw ShapeError("rearrange: image size mismatch");
  const std::size_t q = shape.block_size();
  for_each_block_pixel(shape, [&](std::size_t r, std::size_t c, std::size_t off) {
    out[r * q + c] = image[off];
  });
}

RowMatrix rearrange(const NdArray& image, const KpdShape& shape) {
  if (image.dims() != shape.image_dims()) {
    throw ShapeError("rearrange: image " + dims_to_string(image.dims()) + " vs shape " +
                     dims_to_string(shape.image_dims()));
  }
  RowMatrix out(shape.grid_size(), shape.block_size());
  rearrange_into(image.data(), shape, out.data());
  return out;
}

NdArray inverse_rearrange(const Matrix& m, const KpdShape& shape) {
  if (static_cast<std::size_t>(m.rows()) != shape.grid_size() ||
      static_cast<std::size_t>(m.cols()) != shape.block_size()) {
    throw ShapeError("inverse_rearrange: matrix is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " +
                     std::to_string(shape.grid_size()) + "x" +
                     std::to_string(shape.block_size()));
  }
  NdArray out(shape.image_dims());
  for_each_block_pixel(shape, [&](std::size_t r, std::size_t c, std::size_t off) {
    out[off] = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  });
  return out;
}

NdArray nonoverlap_conv(const NdArray& x, const NdArray& filter) {
  const KpdShape shape(x.dims(), filter.dims());
  const RowMatrix xr = rearrange(x, shape);
  const Vector b = vec_row_major(filter);
  const Vector out = xr * b;
  return unvec(out, shape.grid_dims());
}

}  // namespace skpd

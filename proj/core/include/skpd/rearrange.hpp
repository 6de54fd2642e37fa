#pragma once

#include "skpd/linalg.hpp"
#include "skpd/ndarray.hpp"

namespace skpd {

/**
 * Block rearrangement of an image into a (blocks x block-pixels) matrix.
 *
 * Row r enumerates block (j, k[, l]) in lexicographic order with the last
 * grid index fastest; the row holds the row-major vec of that block. With
 * this layout rearrange(kron(A, B)) == vec(A) vec(B)^T.
 */
RowMatrix rearrange(const NdArray& image, const KpdShape& shape);

/// Same as rearrange() but writes into a preallocated grid_size x block_size buffer.
void rearrange_into(std::span<const double> image, const KpdShape& shape, double* out);

/// Inverse of rearrange(); m must be grid_size x block_size.
NdArray inverse_rearrange(const Matrix& m, const KpdShape& shape);

/// Non-overlapping (stride == filter size) convolution: one inner product per block.
/// Output has the grid dims of the shape implied by x and the filter.
NdArray nonoverlap_conv(const NdArray& x, const NdArray& filter);

}  // namespace skpd

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skpd/dataset.hpp"
#include "skpd/ndarray.hpp"
#include "skpd/nonlinear.hpp"

namespace skpd {

enum class SignalKind { one_circle, three_circles, butterfly, one_ball, two_balls, custom_mask };

struct SignalSpec {
  SignalKind kind = SignalKind::one_circle;
  Dims image_dims{128, 128};
  double intensity = 1.0;
  std::string mask_path;  ///< butterfly / custom_mask
};

/// Parses one-circle | three-circles | butterfly | one-ball | two-balls | mask:FILE.
SignalSpec parse_signal(const std::string& name, const Dims& image_dims);
const char* to_string(SignalKind kind);

/// Planted Kronecker terms: C = sum_r kron(grids[r], blocks[r]).
struct PlantedSignal {
  std::vector<NdArray> grids;
  std::vector<NdArray> blocks;
};

/// Disc (2D) or ball (3D) of the given radius centred in a block of `dims`:
/// pixel u is in when sum_ax (u_ax - (d_ax - 1)/2)^2 <= radius^2 (0-based u).
NdArray centered_disc(const Dims& dims, double radius);

/// The Kronecker terms behind the circle and ball signals, radii scaled to the image size.
PlantedSignal planted_terms(const SignalSpec& spec);

/// 0/intensity mask. The circle/ball signals are the union of the planted supports.
NdArray make_signal(const SignalSpec& spec);

/// Binary mask from an 8-bit PGM (nonzero pixel = 1); throws IoError on dims mismatch.
NdArray load_mask(const std::string& path, const Dims& expected);

/// Butterfly silhouette (wings and body built from ellipses) used for the bundled mask.
NdArray butterfly_silhouette(const Dims& dims);

struct GeneratedStudy {
  NdArray c_true;
  Dataset data;
  std::uint64_t seed = 0;
  double sigma = 0.0;
};

/// Image i uses normal substream (images, i); noise uses (noise, 0).
NdArray draw_images(std::size_t n, const Dims& image_dims, std::uint64_t seed);
Vector draw_noise(std::size_t n, double sigma, std::uint64_t seed);

/// y_i = <X_i, C> + sigma z_i with X_i entries i.i.d. N(0, 1).
GeneratedStudy gen_dataset(const NdArray& c, const Dims& block_dims, std::size_t n, double sigma,
                           std::uint64_t seed, bool retain_raw = false);

/// y_i = sum_r <A_r, g(X_i * B_r)> + sigma z_i; c_true is sum_r kron(A_r, B_r).
GeneratedStudy gen_nonlinear_response(const PlantedSignal& terms, Activation activation,
                                      const Dims& block_dims, std::size_t n, double sigma,
                                      std::uint64_t seed, bool retain_raw = false);

/// Zero-pads every image axis up to the next multiple of the block size.
NdArray pad_to_blocks(const NdArray& image, const Dims& block_dims);

}  // namespace skpd

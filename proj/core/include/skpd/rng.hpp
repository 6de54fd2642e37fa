#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace skpd {

/**
 * Philox4x32-10 counter-based generator (Salmon et al. 2011).
 *
 * The stream is a pure function of (seed, stream tag, substream, index), so
 * samples can be drawn in any order or in parallel with identical results.
 * Counter words: {index lo, index hi, substream, stream tag}; key: seed.
 */
class Philox {
 public:
  using Block = std::array<std::uint32_t, 4>;

  static Block generate(const Block& counter, std::array<std::uint32_t, 2> key);

  /// Version of the stream layout below; bump on any change that alters output.
  static constexpr int kStreamVersion = 1;
};

/// Stream tags used by the simulators.
enum class Stream : std::uint32_t {
  images = 0,
  noise = 1,
  permutation = 2,
  init = 3,
  minibatch = 4,
  mask_null = 5,
};

/**
 * Sequential view of one (seed, stream, substream) Philox stream producing
 * 53-bit uniforms on (0, 1) and Box-Muller standard normals.
 */
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, Stream stream, std::uint32_t substream);

  double uniform();
  double normal();
  std::uint32_t next_u32();
  /// Uniform integer in [0, bound) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t bound);
  void fill_normal(std::span<double> out);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_;
  std::uint32_t substream_;
  std::uint64_t index_ = 0;
  Philox::Block buffer_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace skpd

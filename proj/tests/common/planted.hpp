#pragma once

#include "oracles.hpp"
#include "skpd/linalg.hpp"

namespace oracle {

struct PlantedOneTerm {
  skpd::NdArray a, b, c;
};

// Unit-norm 4x4 map with `k` random nonzeros times a dense normal 8x8 block.
inline PlantedOneTerm planted_one_term(std::uint64_t seed, int k = 4) {
  TestRng rng(seed);
  PlantedOneTerm p;
  p.a = skpd::NdArray({4, 4});
  for (int placed = 0; placed < k;) {
    const auto j = static_cast<std::size_t>(rng.below(16));
    if (p.a[j] != 0.0) continue;
    p.a[j] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (1.0 + rng.uniform());
    ++placed;
  }
  p.a *= 1.0 / skpd::frobenius_norm(p.a);
  p.b = rng.array({8, 8});
  p.c = skpd::kron(p.a, p.b);
  return p;
}

}  // namespace oracle

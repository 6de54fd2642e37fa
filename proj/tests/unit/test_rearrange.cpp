#include <doctest.h>

#include "oracles.hpp"
#include "skpd/error.hpp"
#include "skpd/linalg.hpp"
#include "skpd/rearrange.hpp"

using namespace skpd;

namespace {

// Brute-force block extraction, written without the library's index arithmetic.
Matrix extract_blocks_2d(const NdArray& c, std::size_t d1, std::size_t d2) {
  const std::size_t p1 = c.dims()[0] / d1, p2 = c.dims()[1] / d2;
  Matrix m(static_cast<Eigen::Index>(p1 * p2), static_cast<Eigen::Index>(d1 * d2));
  Eigen::Index row = 0;
  for (std::size_t j = 0; j < p1; ++j) {
    for (std::size_t k = 0; k < p2; ++k, ++row) {
      Eigen::Index col = 0;
      for (std::size_t u = 0; u < d1; ++u)
        for (std::size_t v = 0; v < d2; ++v, ++col) m(row, col) = c(j * d1 + u, k * d2 + v);
    }
  }
  return m;
}

Dims random_dims(oracle::TestRng& rng, std::size_t rank, int hi) {
  Dims d(rank);
  for (auto& x : d) x = static_cast<std::size_t>(1 + rng.below(hi));
  return d;
}

Dims times(const Dims& a, const Dims& b) {
  Dims out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

TEST_CASE("rearrange on the 4x4 example") {
  NdArray c({4, 4}, {1, 2, 5, 6, 3, 4, 7, 8, 9, 10, 13, 14, 11, 12, 15, 16});
  RowMatrix m = rearrange(c, KpdShape({4, 4}, {2, 2}));
  for (Eigen::Index r = 0; r < 4; ++r)
    for (Eigen::Index q = 0; q < 4; ++q) CHECK(m(r, q) == static_cast<double>(4 * r + q + 1));
}

TEST_CASE("rearrange degenerate block shapes") {
  oracle::TestRng rng(2);
  NdArray c = rng.array({3, 4});
  RowMatrix one_block = rearrange(c, KpdShape({3, 4}, {3, 4}));
  CHECK(one_block.rows() == 1);
  CHECK(Vector(one_block.row(0).transpose()) == vec_row_major(c));
  RowMatrix pixels = rearrange(c, KpdShape({3, 4}, {1, 1}));
  CHECK(pixels.cols() == 1);
  CHECK(Vector(pixels.col(0)) == vec_row_major(c));
}

TEST_CASE("rearrange matches brute-force extraction") {
  oracle::TestRng rng(4);
  for (int draw = 0; draw < 20; ++draw) {
    const Dims block = random_dims(rng, 2, 4), grid = random_dims(rng, 2, 4);
    NdArray c = rng.array(times(grid, block));
    CHECK(Matrix(rearrange(c, KpdShape(c.dims(), block))) == extract_blocks_2d(c, block[0], block[1]));
  }
}

TEST_CASE("inverse_rearrange roundtrips") {
  oracle::TestRng rng(6);
  NdArray c = rng.array({8, 8});
  KpdShape s({8, 8}, {2, 2});
  CHECK(inverse_rearrange(rearrange(c, s), s) == c);
  NdArray t = rng.array({4, 4, 4});
  KpdShape s3({4, 4, 4}, {2, 2, 2});
  CHECK(inverse_rearrange(rearrange(t, s3), s3) == t);
  CHECK_THROWS_AS(inverse_rearrange(Matrix::Zero(3, 4), s), ShapeError);
  CHECK_THROWS_AS(rearrange(c, KpdShape({4, 4}, {2, 2})), ShapeError);
}

TEST_CASE("KpdShape validates divisibility and rank") {
  CHECK_THROWS_AS(KpdShape({10, 10}, {3, 3}), ShapeError);
  CHECK_THROWS_AS(KpdShape({8, 8}, {2, 2, 2}), ShapeError);
  CHECK_THROWS_AS(KpdShape({8}, {2}), ShapeError);
  KpdShape s({12, 8}, {4, 2});
  CHECK(s.grid_dims() == Dims{3, 4});
  CHECK(s.grid_size() == 12);
  CHECK(s.block_size() == 8);
}

TEST_CASE("Kronecker rank-one identity, 2D and 3D") {
  oracle::TestRng rng(8);
  for (int draw = 0; draw < 40; ++draw) {
    const std::size_t rank = draw % 2 == 0 ? 2 : 3;
    const Dims ga = random_dims(rng, rank, 4), gb = random_dims(rng, rank, 4);
    NdArray a = rng.array(ga), b = rng.array(gb);
    NdArray c = kron(a, b);
    const Matrix expected = vec_row_major(a) * vec_row_major(b).transpose();
    CHECK(Matrix(rearrange(c, KpdShape(c.dims(), gb))) == expected);
    CHECK(inverse_rearrange(expected, KpdShape(c.dims(), gb)) == c);
  }
}

TEST_CASE("rearrange is linear and sums terms") {
  oracle::TestRng rng(9);
  KpdShape s({6, 9}, {2, 3});
  NdArray c1 = rng.array({6, 9}), c2 = rng.array({6, 9});
  const double alpha = 1.7;
  Matrix lhs = rearrange(alpha * c1 + c2, s);
  Matrix rhs = alpha * Matrix(rearrange(c1, s)) + Matrix(rearrange(c2, s));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-14);

  NdArray sum({6, 9});
  Matrix outer = Matrix::Zero(9, 6);
  for (int r = 0; r < 3; ++r) {
    NdArray a = rng.array({3, 3}), b = rng.array({2, 3});
    sum += kron(a, b);
    outer += vec_row_major(a) * vec_row_major(b).transpose();
  }
  CHECK((Matrix(rearrange(sum, s)) - outer).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("nonoverlap_conv") {
  NdArray x({4, 4});
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i + 1);
  NdArray eye({2, 2}, {1, 0, 0, 1});
  NdArray out = nonoverlap_conv(x, eye);
  CHECK(out.dims() == Dims{2, 2});
  CHECK(out.values() == std::vector<double>{7, 11, 23, 27});

  NdArray unit({1, 1}, {1.0});
  CHECK(nonoverlap_conv(x, unit) == x);
  CHECK_THROWS_AS(nonoverlap_conv(x, NdArray({3, 3})), ShapeError);

  oracle::TestRng rng(10);
  for (int draw = 0; draw < 20; ++draw) {
    const std::size_t rank = draw % 2 == 0 ? 2 : 3;
    const Dims gd = random_dims(rng, rank, 4), bd = random_dims(rng, rank, 3);
    NdArray a = rng.array(gd), b = rng.array(bd), xx = rng.array(times(gd, bd));
    NdArray conv = nonoverlap_conv(xx, b);
    CHECK(std::abs(inner(a, conv) - inner(xx, kron(a, b))) <= 1e-10);
    const RowMatrix xr = rearrange(xx, KpdShape(xx.dims(), bd));
    const Vector via = xr * vec_row_major(b);
    CHECK(conv == unvec(via, gd));
  }
}

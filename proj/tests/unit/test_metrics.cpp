#include <doctest.h>

#include <atomic>
#include <cmath>

#include "oracles.hpp"
#include "skpd/error.hpp"
#include "skpd/metrics.hpp"
#include "skpd/simgen.hpp"
#include "skpd/skpd_linear.hpp"

using namespace skpd;

TEST_CASE("fpr and tpr") {
  NdArray truth({4, 4});
  for (std::size_t k : {0u, 1u, 4u, 5u}) truth[k] = 1.0;
  Rates same = fpr_tpr(truth, truth);
  CHECK(*same.fpr == 0.0);
  CHECK(*same.tpr == 1.0);
  Rates all = fpr_tpr(NdArray({4, 4}, 0.3), truth);
  CHECK(*all.fpr == 1.0);
  CHECK(*all.tpr == 1.0);

  NdArray est({4, 4});
  for (std::size_t k : {0u, 1u, 4u, 10u, 15u}) est[k] = -2.0;
  Rates r = fpr_tpr(est, truth);
  CHECK(*r.fpr == 2.0 / 12.0);
  CHECK(*r.tpr == 3.0 / 4.0);

  Rates none = fpr_tpr(est, NdArray({4, 4}));
  CHECK_FALSE(none.tpr.has_value());
  CHECK(none.fpr.has_value());
  Rates full = fpr_tpr(est, NdArray({4, 4}, 1.0));
  CHECK_FALSE(full.fpr.has_value());

  for (double s : {1e-3, 2.0, 1e6}) {
    Rates scaled = fpr_tpr(s * est, truth);
    CHECK(*scaled.fpr == *r.fpr);
    CHECK(*scaled.tpr == *r.tpr);
  }
  CHECK_THROWS_AS(fpr_tpr(NdArray({2, 2}), truth), ShapeError);
}

TEST_CASE("coefficient RMSE") {
  oracle::TestRng rng(1);
  NdArray c = rng.array({6, 10});
  CHECK(rmse_coeff(c, c) == 0.0);
  NdArray shifted = c;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 1.0;
  CHECK(rmse_coeff(shifted, c) == doctest::Approx(1.0).epsilon(1e-14));

  NdArray d = rng.array({6, 10});
  double s = 0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 10; ++j) s += (c(i, j) - d(i, j)) * (c(i, j) - d(i, j));
  CHECK(std::abs(rmse_coeff(c, d) - std::sqrt(s / 60.0)) <= 1e-12);
  CHECK(rmse_coeff(3.0 * c, 3.0 * d) == doctest::Approx(3.0 * rmse_coeff(c, d)).epsilon(1e-14));

  NdArray t = rng.array({2, 3, 4});
  CHECK(rmse_coeff(t, NdArray({2, 3, 4})) == doctest::Approx(frobenius_norm(t) / std::sqrt(24.0)));
}

TEST_CASE("prediction RMSE") {
  oracle::TestRng rng(2);
  Vector y = rng.vector(30);
  CHECK(rmse_pred(y, y) == 0.0);
  CHECK(rmse_pred(Vector::Zero(30), y) == doctest::Approx(std::sqrt(y.squaredNorm() / 30)));
  CHECK_THROWS_AS(rmse_pred(Vector::Zero(3), y), ShapeError);
}

TEST_CASE("jaccard") {
  NdArray a({2, 2}, {1, 1, 0, 0}), b({2, 2}, {0, 1, 1, 0});
  CHECK(jaccard(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(jaccard(a, a) == 1.0);
  CHECK(jaccard(NdArray({2, 2}), NdArray({2, 2})) == 1.0);
}

namespace {

struct Setup {
  NdArray c;
  GeneratedStudy study;
};

Setup circle_setup(double intensity, std::uint64_t seed) {
  SignalSpec spec = parse_signal("one-circle", {32, 32});
  spec.intensity = intensity;
  Setup s;
  s.c = make_signal(spec);
  s.study = gen_dataset(s.c, {8, 8}, 300, 1.0, seed);
  return s;
}

NdArray fit_region(const Dataset& d) {
  FitConfig cfg;
  cfg.lambda_tgt = 1.0;
  return coefficients(fit_one_term(d, cfg).model);
}

}  // namespace

TEST_CASE("permutation p-value is detections over valid replicates") {
  Setup s = circle_setup(1.0, 3);
  std::atomic<int> calls{0};
  RegionFit stub = [&](const Dataset&) {
    const int k = calls++;
    if (k % 100 == 99) throw Error("stub failure");
    return k % 33 == 0 ? s.c : NdArray(s.c.dims());
  };
  PermutationOptions opts;
  opts.n_perm = 505;
  PermutationResult r = permutation_region_test(s.study.data, s.c, stub, opts);
  CHECK(r.failures == 5);
  CHECK(r.valid == 500);
  CHECK(r.detections == 15);
  CHECK(r.p_value == doctest::Approx(0.03));
  CHECK(r.failure_messages.size() == 5);
}

TEST_CASE("identity permutation detects a true region every time") {
  Setup s = circle_setup(1.0, 4);
  const NdArray region = region_mask(fit_region(s.study.data));
  PermutationOptions opts;
  opts.n_perm = 3;
  opts.force_identity = true;
  PermutationResult r = permutation_region_test(s.study.data, region, fit_region, opts);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("permuting the true region destroys detection") {
  Setup s = circle_setup(1.0, 5);
  PermutationOptions opts;
  opts.n_perm = 10;
  opts.seed = 2;
  PermutationResult r = permutation_region_test(s.study.data, s.c, fit_region, opts);
  CHECK(r.valid + r.failures == 10);
  CHECK(static_cast<double>(r.detections) / 10.0 <= 0.1);
  PermutationResult again = permutation_region_test(s.study.data, s.c, fit_region, opts);
  CHECK(again.detections == r.detections);
  CHECK(again.p_value == r.p_value);
}

TEST_CASE("null region on pure noise is rarely detected") {
  Setup s = circle_setup(0.0, 6);
  NdArray region({32, 32});
  for (std::size_t i = 8; i < 16; ++i)
    for (std::size_t j = 8; j < 16; ++j) region(i, j) = 1.0;
  PermutationOptions opts;
  opts.n_perm = 50;
  PermutationResult r = permutation_region_test(s.study.data, region, fit_region, opts);
  CHECK(static_cast<double>(r.detections) / 50.0 <= 0.1);
  CHECK_THROWS_AS(permutation_region_test(s.study.data, NdArray({32, 32}), fit_region, opts), InvalidArgument);
}

#include <benchmark/benchmark.h>

#include "skpd/dataset.hpp"
#include "skpd/linalg.hpp"
#include "skpd/nonlinear.hpp"
#include "skpd/rearrange.hpp"
#include "skpd/rng.hpp"
#include "skpd/simgen.hpp"
#include "skpd/skpd_linear.hpp"
#include "skpd/solvers.hpp"

using namespace skpd;

namespace {

Matrix normal_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  RandomStream rs(seed, Stream::images, 0);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rs.normal();
  return m;
}

void BM_Philox(benchmark::State& state) {
  RandomStream rs(1, Stream::images, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rs.normal());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Philox);

void BM_Rearrange(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const NdArray img = draw_images(1, {1, d, d}, 3);
  NdArray one({d, d}, std::vector<double>(img.values().begin(), img.values().end()));
  const KpdShape shape({d, d}, {8, 8});
  for (auto _ : state) benchmark::DoNotOptimize(rearrange(one, shape));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(d * d * sizeof(double)));
}
BENCHMARK(BM_Rearrange)->Arg(32)->Arg(128);

void BM_LassoCD(benchmark::State& state) {
  const auto q = static_cast<Eigen::Index>(state.range(0));
  const Matrix x = normal_matrix(1000, q, 5);
  Vector y = x.leftCols(10) * Vector::Ones(10);
  y += normal_matrix(1000, 1, 6).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(lasso_cd(x, y, 0.1));
}
BENCHMARK(BM_LassoCD)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FitOneTerm(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const NdArray c = make_signal(parse_signal("one-circle", {d, d}));
  const auto study = gen_dataset(c, {8, 8}, 1000, 1.0, 7);
  for (auto _ : state) benchmark::DoNotOptimize(fit_one_term(study.data, FitConfig{}));
}
BENCHMARK(BM_FitOneTerm)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_NonlinearLossGrad(benchmark::State& state) {
  const PlantedSignal t = planted_terms(parse_signal("three-circles", {128, 128}));
  const auto study = gen_nonlinear_response(t, Activation::relu, {8, 8}, 1000, 1.0, 9);
  const NonlinearModel m = initial_nonlinear_model(study.data, 3, Activation::relu, 1);
  for (auto _ : state) benchmark::DoNotOptimize(loss_grad(m, study.data));
}
BENCHMARK(BM_NonlinearLossGrad)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

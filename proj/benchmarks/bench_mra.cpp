#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "fgrasp/mra.hpp"

namespace {

fgrasp::grouping::MultiRangeFeatures random_tensor(std::size_t g, std::size_t m, std::size_t c,
                                                   std::uint64_t seed) {
  fgrasp::Rng rng(seed);
  fgrasp::grouping::MultiRangeFeatures x;
  x.groups = g;
  x.seeds = m;
  x.channels = c;
  x.values.resize(g * m * c);
  for (double& v : x.values) v = rng.uniform(-1.0, 1.0);
  x.counts.assign(g * m, 1);
  return x;
}

void BM_MraForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  auto x = random_tensor(4, 64, c, 3);
  auto params = fgrasp::mra::init_params(static_cast<int>(c), static_cast<int>(2 * c), 4, 1);
  for (auto _ : state) {
    auto result = fgrasp::mra::mra_forward(x, params, 1);
    benchmark::DoNotOptimize(result.output);
  }
}
BENCHMARK(BM_MraForward)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_MraBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  auto x = random_tensor(4, 64, c, 3);
  auto params = fgrasp::mra::init_params(static_cast<int>(c), static_cast<int>(2 * c), 4, 1);
  Eigen::MatrixXd d_output = Eigen::MatrixXd::Constant(64, static_cast<Eigen::Index>(c), 0.5);
  for (auto _ : state) {
    state.PauseTiming();
    auto result = fgrasp::mra::mra_forward(x, params, 1);
    state.ResumeTiming();
    auto grads = fgrasp::mra::mra_backward(d_output, result.tape, 1);
    benchmark::DoNotOptimize(grads.params);
  }
}
BENCHMARK(BM_MraBackward)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

}  // namespace

#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "fgrasp/grouping.hpp"

namespace {

void BM_CylinderGroup(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  fgrasp::Scene scene = bench::random_scene(n, 7);
  fgrasp::SeedSet seeds = bench::random_seeds(scene, 64, 11);
  fgrasp::grouping::CylinderSpec spec;
  for (auto _ : state) {
    auto lists = fgrasp::grouping::cylinder_group(scene, seeds, spec, 1);
    benchmark::DoNotOptimize(lists);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(seeds.size()));
}
BENCHMARK(BM_CylinderGroup)->Arg(10000)->Arg(40000)->Unit(benchmark::kMillisecond);

void BM_AggregateFeatures(benchmark::State& state) {
  fgrasp::Scene scene = bench::random_scene(20000, 7);
  const auto rows = static_cast<Eigen::Index>(scene.size());
  scene.features.resize(rows, 4);
  for (Eigen::Index i = 0; i < rows; ++i) {
    scene.features(i, 0) = 1.0;
    scene.features.block(i, 1, 1, 3) = scene.normals[static_cast<std::size_t>(i)].transpose();
  }
  fgrasp::SeedSet seeds = bench::random_seeds(scene, 64, 11);
  fgrasp::grouping::CylinderSpec spec;
  auto lists = fgrasp::grouping::cylinder_group(scene, seeds, spec, 1);
  for (auto _ : state) {
    auto feats = fgrasp::grouping::aggregate_features(scene, seeds, lists, spec, 1);
    benchmark::DoNotOptimize(feats);
  }
}
BENCHMARK(BM_AggregateFeatures)->Unit(benchmark::kMillisecond);

}  // namespace

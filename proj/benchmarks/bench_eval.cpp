#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "fgrasp/eval.hpp"
#include "fgrasp/geometry.hpp"

namespace {

std::vector<fgrasp::GraspPose> random_grasps(std::size_t n, std::uint64_t seed) {
  fgrasp::Rng rng(seed);
  std::vector<fgrasp::GraspPose> grasps(n);
  for (auto& g : grasps) {
    g.center = Eigen::Vector3d(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15),
                               rng.uniform(0.0, 0.15));
    g.rotation = fgrasp::euler_to_rotation(rng.uniform(0.0, 6.28), rng.uniform(-1.5, 1.5),
                                           rng.uniform(-3.0, 3.0));
    g.width = rng.uniform(0.01, 0.10);
    g.depth = rng.uniform(0.01, 0.04);
    g.score = rng.uniform(0.0, 1.0);
  }
  return grasps;
}

void BM_GraspNms(benchmark::State& state) {
  auto grasps = random_grasps(static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) {
    auto kept = fgrasp::eval::grasp_nms(grasps, 0.03, 30.0);
    benchmark::DoNotOptimize(kept);
  }
}
BENCHMARK(BM_GraspNms)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_CollisionCheck(benchmark::State& state) {
  fgrasp::Scene scene = bench::random_scene(20000, 9);
  auto grasps = random_grasps(64, 5);
  fgrasp::eval::GripperModel gripper;
  for (auto _ : state) {
    int collisions = 0;
    for (const auto& g : grasps)
      collisions += fgrasp::eval::collision_check(g, scene, gripper, 0.0);
    benchmark::DoNotOptimize(collisions);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grasps.size()));
}
BENCHMARK(BM_CollisionCheck)->Unit(benchmark::kMillisecond);

}  // namespace

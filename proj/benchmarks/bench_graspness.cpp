#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "fgrasp/graspness.hpp"

namespace {

// Two opposing vertical plates 3 cm apart: realistic antipodal structure so
// the candidate sweep exercises both the contact and the collision paths.
fgrasp::Scene plate_scene(int per_side) {
  fgrasp::Scene scene;
  const double gap = 0.015;
  for (int side = 0; side < 2; ++side) {
    const double y = side == 0 ? -gap : gap;
    const Eigen::Vector3d normal(0.0, side == 0 ? -1.0 : 1.0, 0.0);
    for (int i = 0; i < per_side; ++i) {
      for (int j = 0; j < per_side; ++j) {
        const double x = -0.03 + 0.06 * i / (per_side - 1);
        const double z = 0.02 + 0.06 * j / (per_side - 1);
        scene.points.emplace_back(x, y, z);
        scene.normals.push_back(normal);
        scene.object_ids.push_back(1);
      }
    }
  }
  return scene;
}

void BM_RawGraspness(benchmark::State& state) {
  fgrasp::Scene scene = plate_scene(10);
  auto grid = fgrasp::graspness::CandidateGraspGrid::standard();
  fgrasp::eval::GripperModel gripper;
  fgrasp::graspness::RawGraspnessOptions opts;
  opts.threads = 1;
  for (auto _ : state) {
    auto result = fgrasp::graspness::compute_raw_graspness(scene, grid, gripper, opts);
    benchmark::DoNotOptimize(result.raw);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(scene.size()));
}
BENCHMARK(BM_RawGraspness)->Unit(benchmark::kMillisecond);

}  // namespace

#include <benchmark/benchmark.h>

#include <cmath>

#include "fgrasp/geometry.hpp"
#include "fgrasp/normals.hpp"

namespace {

fgrasp::DepthImage tilted_plane_depth(int width, int height) {
  fgrasp::DepthImage d;
  d.width = width;
  d.height = height;
  d.intrinsics = {500.0, 500.0, (width - 1) / 2.0, (height - 1) / 2.0};
  d.depth.resize(static_cast<std::size_t>(width) * height);
  // Plane z = 1 + 0.2 x in camera coordinates.
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const double a = (u - d.intrinsics.cx) / d.intrinsics.fx;
      d.at(v, u) = 1.0 / (1.0 - 0.2 * a);
    }
  }
  return d;
}

void BM_EstimateNormals(benchmark::State& state) {
  fgrasp::DepthImage depth = tilted_plane_depth(640, 480);
  fgrasp::BackprojectResult bp = fgrasp::backproject(depth);
  for (auto _ : state) {
    auto field = fgrasp::normals::estimate_normals(depth, bp, 1, 1);
    benchmark::DoNotOptimize(field.normals);
  }
  state.SetItemsProcessed(state.iterations() * 640 * 480);
}
BENCHMARK(BM_EstimateNormals)->Unit(benchmark::kMillisecond);

}  // namespace

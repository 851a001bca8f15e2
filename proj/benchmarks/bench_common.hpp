#pragma once

#include <cstdint>
#include <cmath>

#include "fgrasp/rng.hpp"
#include "fgrasp/types.hpp"

namespace bench {

// Random cloud in a 30 cm cube above the table with unit normals and two
// object ids — enough structure for the geometric kernels to do real work.
inline fgrasp::Scene random_scene(std::size_t n, std::uint64_t seed) {
  fgrasp::Rng rng(seed);
  fgrasp::Scene scene;
  scene.points.resize(n);
  scene.normals.resize(n);
  scene.object_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    scene.points[i] = Eigen::Vector3d(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15),
                                      rng.uniform(0.0, 0.15));
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    scene.normals[i] = v.norm() > 1e-12 ? Eigen::Vector3d(v.normalized())
                                        : Eigen::Vector3d::UnitZ();
    scene.object_ids[i] = 1 + static_cast<std::uint32_t>(rng.uniform_index(2));
  }
  return scene;
}

inline fgrasp::SeedSet random_seeds(const fgrasp::Scene& scene, std::size_t m,
                                    std::uint64_t seed) {
  fgrasp::Rng rng(seed);
  fgrasp::SeedSet seeds;
  const std::size_t step = scene.size() / m;
  for (std::size_t i = 0; i < m; ++i) {
    seeds.indices.push_back(static_cast<std::uint32_t>(i * step));
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    seeds.views.push_back(v.norm() > 1e-12 ? Eigen::Vector3d(v.normalized())
                                           : Eigen::Vector3d::UnitZ());
  }
  return seeds;
}

}  // namespace bench

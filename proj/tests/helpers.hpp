#pragma once

#include <Eigen/Dense>

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fgrasp/geometry.hpp"
#include "fgrasp/rng.hpp"
#include "fgrasp/types.hpp"

namespace testutil {

// Unique scratch directory, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("fgrasp_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Redirects std::cout and std::cerr for the lifetime of the object.
class CaptureOutput {
 public:
  CaptureOutput()
      : old_out_(std::cout.rdbuf(out_.rdbuf())), old_err_(std::cerr.rdbuf(err_.rdbuf())) {}
  ~CaptureOutput() {
    std::cout.rdbuf(old_out_);
    std::cerr.rdbuf(old_err_);
  }
  CaptureOutput(const CaptureOutput&) = delete;
  CaptureOutput& operator=(const CaptureOutput&) = delete;

  std::string out() const { return out_.str(); }
  std::string err() const { return err_.str(); }

 private:
  std::ostringstream out_, err_;
  std::streambuf* old_out_;
  std::streambuf* old_err_;
};

inline Eigen::Matrix3d random_rotation(fgrasp::Rng& rng) {
  return fgrasp::euler_to_rotation(rng.uniform(-3.1, 3.1), rng.uniform(-1.5, 1.5),
                                   rng.uniform(-3.1, 3.1));
}

inline Eigen::Vector3d random_unit(fgrasp::Rng& rng) {
  while (true) {
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    if (v.norm() > 1e-6) return v.normalized();
  }
}

// Two opposing square plates, normals facing each other along y: the
// canonical antipodal fixture. `gap` is the full plate separation.
inline fgrasp::Scene plate_scene(double gap, double extent = 0.06, int per_axis = 9,
                                 std::uint32_t object_id = 1) {
  fgrasp::Scene scene;
  for (int side = 0; side < 2; ++side) {
    const double y = (side == 0 ? -0.5 : 0.5) * gap;
    const Eigen::Vector3d normal(0.0, side == 0 ? -1.0 : 1.0, 0.0);
    for (int i = 0; i < per_axis; ++i) {
      for (int j = 0; j < per_axis; ++j) {
        const double x = extent * (static_cast<double>(i) / (per_axis - 1) - 0.5);
        const double z = 0.05 + extent * (static_cast<double>(j) / (per_axis - 1));
        scene.points.emplace_back(x, y, z);
        scene.normals.push_back(normal);
        scene.object_ids.push_back(object_id);
      }
    }
  }
  return scene;
}

inline std::vector<fgrasp::GraspPose> random_grasps(std::size_t n, std::uint64_t seed) {
  fgrasp::Rng rng(seed);
  std::vector<fgrasp::GraspPose> grasps(n);
  for (auto& g : grasps) {
    g.center = Eigen::Vector3d(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                               rng.uniform(0.0, 0.2));
    g.rotation = random_rotation(rng);
    g.width = rng.uniform(0.005, 0.10);
    g.depth = rng.uniform(0.005, 0.04);
    g.score = rng.uniform(0.0, 1.0);
    if (rng.uniform() < 0.5) g.object_id = static_cast<std::uint32_t>(rng.uniform_index(4));
  }
  return grasps;
}

}  // namespace testutil

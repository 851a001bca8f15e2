#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace fgrasp {

// A 6-DoF parallel-gripper grasp. Rotation columns are, in order, the
// approach axis (direction of gripper advance), the closing axis (fingers
// move along it) and the finger axis. `depth` is the advance of the
// fingertip plane along the approach axis beyond `center`.
struct GraspPose {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double width = 0.0;   // meters
  double depth = 0.0;   // meters
  double score = 0.0;
  std::optional<std::uint32_t> object_id;

  Eigen::Vector3d approach_axis() const { return rotation.col(0); }
  Eigen::Vector3d closing_axis() const { return rotation.col(1); }
  Eigen::Vector3d finger_axis() const { return rotation.col(2); }
};

// Point cloud with per-point object ids (0 = background/table), optional
// normals and optional per-point features. A normal equal to the exact
// zero vector marks an invalid estimate.
struct Scene {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::uint32_t> object_ids;       // empty or size N
  std::vector<Eigen::Vector3d> normals;        // empty or size N
  Eigen::MatrixXd features;                    // 0x0 or N x C
  std::vector<double> graspness;               // empty or size N

  std::size_t size() const { return points.size(); }
  bool has_object_ids() const { return !object_ids.empty(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_features() const { return features.size() > 0; }
  bool has_graspness() const { return !graspness.empty(); }

  std::uint32_t object_id_of(std::size_t i) const {
    return has_object_ids() ? object_ids[i] : 0u;
  }
};

struct Intrinsics {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;  // pixels
};

// Organized depth map in meters; 0 marks an invalid pixel. `depth_scale`
// is the meters-per-unit quantization used by the 16-bit file format.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;  // row-major H x W
  Intrinsics intrinsics;
  double depth_scale = 0.001;

  double at(int v, int u) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  double& at(int v, int u) { return depth[static_cast<std::size_t>(v) * width + u]; }
  bool valid(int v, int u) const {
    return u >= 0 && u < width && v >= 0 && v < height && at(v, u) > 0.0;
  }
};

// Sampled seed points with one approach direction each.
struct SeedSet {
  std::vector<std::uint32_t> indices;      // into a Scene's points, unique
  std::vector<Eigen::Vector3d> views;      // unit approach direction per seed

  std::size_t size() const { return indices.size(); }
};

// 8-bit binary mask; nonzero = inside.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major H x W

  bool inside(int v, int u) const {
    return u >= 0 && u < width && v >= 0 && v < height &&
           data[static_cast<std::size_t>(v) * width + u] != 0;
  }
};

}  // namespace fgrasp

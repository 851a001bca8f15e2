#pragma once

#include <cstdint>
#include <vector>

#include "fgrasp/types.hpp"

namespace fgrasp::simscene {

// Convex primitive catalog entry. Box uses half_extents; cylinder uses
// radius + half_height (axis z in the object frame); sphere uses radius.
struct PrimitiveShape {
  enum class Kind { Box, Cylinder, Sphere };
  Kind kind = Kind::Box;
  Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.02);
  double radius = 0.02;
  double half_height = 0.03;

  void validate() const;
  double circumradius() const;
  const char* name() const;
};

struct PlacedPrimitive {
  PrimitiveShape shape;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  std::uint32_t object_id = 0;
};

// Farthest point of the primitive in world direction `dir`.
Eigen::Vector3d support_point(const PlacedPrimitive& prim, const Eigen::Vector3d& dir);

// Exact signed distance from a world point to the primitive surface
// (negative inside).
double signed_distance(const PlacedPrimitive& prim, const Eigen::Vector3d& point);

// Distance between two primitives (0 when intersecting or touching),
// computed on the convex support functions.
double pair_distance(const PlacedPrimitive& a, const PlacedPrimitive& b);

struct SceneRecipe {
  std::vector<PrimitiveShape> object_set;
  int count_min = 3;
  int count_max = 6;
  double workspace_extent = 0.4;     // square table side, meters
  double surface_density = 30000.0;  // points per square meter
  std::uint64_t seed = 0;
  int max_retries = 50;

  void validate() const;
};

// A generated tabletop: the sampled cloud (table points first with id 0,
// then each object's surface with ids 1..n) plus the exact primitives for
// rendering and oracles.
struct SimScene {
  Scene cloud;
  std::vector<PlacedPrimitive> objects;
  double table_extent = 0.4;
};

// Objects drawn from the catalog with random orientation and xy position,
// dropped vertically to first contact with the table or earlier objects;
// placements that start out intersecting are retried. Surfaces are sampled
// at the recipe density with analytic outward normals. Deterministic in
// the recipe seed.
SimScene generate_scene(const SceneRecipe& recipe);

// Camera-to-world pose, OpenCV axes: columns x = image right, y = image
// down, z = optical axis (view direction).
struct CameraPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

struct ViewpointSet {
  std::vector<CameraPose> poses;
  double radius = 1.0;
  double min_pairwise_angle_deg = 180.0;  // 180 when fewer than two poses
};

// `count` camera positions on the quarter-sphere (z >= 0, y >= 0) of the
// given radius around the origin: a fixed Fibonacci lattice is filtered to
// the quarter region, then evenly re-indexed down to `count`. Cameras look
// at the origin with world +z as the up reference (+y when looking along
// the pole). Errors when count exceeds the filtered lattice capacity.
ViewpointSet sample_viewpoints(double radius, int count = 256);

// Analytic ray casting of the primitives plus the finite table rectangle
// at z = 0. Pixel (u, v) uses the ray through ((u-cx)/fx, (v-cy)/fy, 1) in
// camera coordinates; the stored value is the hit's optical-axis depth.
// Misses are 0.
DepthImage render_depth(const SimScene& scene, const CameraPose& camera, const Intrinsics& k,
                        int width, int height, int threads = 0);

// One global Gaussian shift (std sigma_shift) plus per-pixel i.i.d.
// Gaussian noise (std sigma_pixel) on valid pixels, clamped at 0; invalid
// pixels stay 0.
DepthImage apply_depth_noise(const DepthImage& depth, double sigma_pixel, double sigma_shift,
                             std::uint64_t seed);

}  // namespace fgrasp::simscene

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

#include "fgrasp/types.hpp"

namespace fgrasp {

// Intrinsic Z-Y'-X'' Euler angles: R = Rz(theta) * Ry(gamma) * Rx(beta).
// Orientation is stored as a rotation matrix everywhere; the Euler triple
// is an I/O-side encoding only.
Eigen::Matrix3d euler_to_rotation(double theta, double gamma, double beta);

struct EulerAngles {
  double theta = 0.0;
  double gamma = 0.0;
  double beta = 0.0;
};

// Inverse of euler_to_rotation. At gimbal lock (|gamma| = pi/2) the
// decomposition is not unique; beta is set to 0 by convention. Throws
// ValidationError if R is not orthonormal with det +1 within 1e-6.
EulerAngles rotation_to_euler(const Eigen::Matrix3d& rotation);

bool is_rotation_matrix(const Eigen::Matrix3d& rotation, double tol = 1e-6);

// Deterministic right-handed orthonormal frame whose first column is the
// given unit axis. Used wherever a view direction has to be completed to
// a full frame (grasp candidates, cylinder local coordinates).
Eigen::Matrix3d frame_from_axis(const Eigen::Vector3d& axis);

// Back-projection of an organized depth map through the pinhole model.
// Pixel (u, v) with depth z > 0 maps to ((u-cx)z/fx, (v-cy)z/fy, z);
// pixel coordinates are taken at integer positions.
struct BackprojectResult {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::int32_t> pixel_to_point;        // H*W, -1 where invalid
  std::vector<std::array<int, 2>> point_to_pixel;  // (u, v) per point
};

BackprojectResult backproject(const DepthImage& depth);

// Forward pinhole projection; z must be positive.
inline Eigen::Vector2d project_pinhole(const Eigen::Vector3d& p, const Intrinsics& k) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

// Fibonacci sphere lattice: `count` near-uniform unit directions, ordered
// from z = +1 down to z = -1.
std::vector<Eigen::Vector3d> fibonacci_sphere_directions(int count);

}  // namespace fgrasp

#include "fgrasp/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

#include "fgrasp/error.hpp"

namespace fgrasp {

Eigen::Matrix3d euler_to_rotation(double theta, double gamma, double beta) {
  const double ca = std::cos(theta), sa = std::sin(theta);
  const double cb = std::cos(gamma), sb = std::sin(gamma);
  const double cc = std::cos(beta), sc = std::sin(beta);
  Eigen::Matrix3d rz, ry, rx;
  rz << ca, -sa, 0, sa, ca, 0, 0, 0, 1;
  ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  rx << 1, 0, 0, 0, cc, -sc, 0, sc, cc;
  return rz * ry * rx;
}

bool is_rotation_matrix(const Eigen::Matrix3d& rotation, double tol) {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

EulerAngles rotation_to_euler(const Eigen::Matrix3d& rotation) {
  if (!rotation.allFinite() || !is_rotation_matrix(rotation)) {
    throw ValidationError("rotation_to_euler: input is not a rotation matrix");
  }
  EulerAngles e;
  const double sg = -rotation(2, 0);
  if (std::abs(sg) >= 1.0 - 1e-12) {
    // gimbal lock: theta and beta are coupled; fix beta = 0
    e.gamma = std::copysign(std::numbers::pi / 2.0, sg);
    e.beta = 0.0;
    e.theta = std::atan2(-rotation(0, 1), rotation(1, 1));
  } else {
    e.gamma = std::asin(sg);
    e.theta = std::atan2(rotation(1, 0), rotation(0, 0));
    e.beta = std::atan2(rotation(2, 1), rotation(2, 2));
  }
  return e;
}

Eigen::Matrix3d frame_from_axis(const Eigen::Vector3d& axis) {
  // reference vector chosen away from the axis to keep the cross product
  // well conditioned
  const Eigen::Vector3d ref = std::abs(axis.z()) < 0.9
                                  ? Eigen::Vector3d::UnitZ()
                                  : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d t1 = ref.cross(axis).normalized();
  const Eigen::Vector3d t2 = axis.cross(t1);
  Eigen::Matrix3d frame;
  frame.col(0) = axis;
  frame.col(1) = t1;
  frame.col(2) = t2;
  return frame;
}

std::vector<Eigen::Vector3d> fibonacci_sphere_directions(int count) {
  if (count < 1) throw ValidationError("fibonacci_sphere_directions: count must be >= 1");
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * k;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

BackprojectResult backproject(const DepthImage& d) {
  const auto& k = d.intrinsics;
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) {
    throw ValidationError("backproject: intrinsics fx/fy must be positive");
  }
  BackprojectResult out;
  out.pixel_to_point.assign(static_cast<std::size_t>(d.width) * d.height, -1);
  for (int v = 0; v < d.height; ++v) {
    for (int u = 0; u < d.width; ++u) {
      const double z = d.at(v, u);
      if (!(z > 0.0)) continue;
      const auto idx = static_cast<std::int32_t>(out.points.size());
      out.pixel_to_point[static_cast<std::size_t>(v) * d.width + u] = idx;
      out.point_to_pixel.push_back({u, v});
      out.points.emplace_back((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z);
    }
  }
  return out;
}

}  // namespace fgrasp

#include "fgrasp/simscene.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fgrasp/error.hpp"
#include "fgrasp/geometry.hpp"
#include "fgrasp/parallel.hpp"
#include "fgrasp/rng.hpp"

namespace fgrasp::simscene {

namespace {

constexpr double kRestGap = 1e-7;    // settled surface separation
constexpr double kRayEps = 1e-9;     // minimum ray-hit parameter
constexpr int kViewLattice = 4096;   // Fibonacci lattice behind sample_viewpoints

double sq(double v) { return v * v; }

}  // namespace

void PrimitiveShape::validate() const {
  switch (kind) {
    case Kind::Box:
      if (!(half_extents.minCoeff() > 0.0))
        throw ValidationError("box half-extents must be positive");
      break;
    case Kind::Cylinder:
      if (!(radius > 0.0) || !(half_height > 0.0))
        throw ValidationError("cylinder radius and half-height must be positive");
      break;
    case Kind::Sphere:
      if (!(radius > 0.0)) throw ValidationError("sphere radius must be positive");
      break;
  }
}

double PrimitiveShape::circumradius() const {
  switch (kind) {
    case Kind::Box:
      return half_extents.norm();
    case Kind::Cylinder:
      return std::hypot(radius, half_height);
    case Kind::Sphere:
      return radius;
  }
  return 0.0;
}

const char* PrimitiveShape::name() const {
  switch (kind) {
    case Kind::Box:
      return "box";
    case Kind::Cylinder:
      return "cylinder";
    case Kind::Sphere:
      return "sphere";
  }
  return "?";
}

Eigen::Vector3d support_point(const PlacedPrimitive& prim, const Eigen::Vector3d& dir) {
  const Eigen::Vector3d d = prim.rotation.transpose() * dir;  // object frame
  Eigen::Vector3d local = Eigen::Vector3d::Zero();
  switch (prim.shape.kind) {
    case PrimitiveShape::Kind::Box:
      local = {d.x() >= 0 ? prim.shape.half_extents.x() : -prim.shape.half_extents.x(),
               d.y() >= 0 ? prim.shape.half_extents.y() : -prim.shape.half_extents.y(),
               d.z() >= 0 ? prim.shape.half_extents.z() : -prim.shape.half_extents.z()};
      break;
    case PrimitiveShape::Kind::Cylinder: {
      const double planar = std::hypot(d.x(), d.y());
      if (planar > 1e-15)
        local.head<2>() = Eigen::Vector2d(d.x(), d.y()) * (prim.shape.radius / planar);
      local.z() = d.z() >= 0 ? prim.shape.half_height : -prim.shape.half_height;
      break;
    }
    case PrimitiveShape::Kind::Sphere: {
      const double len = d.norm();
      if (len > 1e-15) local = d * (prim.shape.radius / len);
      break;
    }
  }
  return prim.position + prim.rotation * local;
}

double signed_distance(const PlacedPrimitive& prim, const Eigen::Vector3d& point) {
  const Eigen::Vector3d p = prim.rotation.transpose() * (point - prim.position);
  switch (prim.shape.kind) {
    case PrimitiveShape::Kind::Box: {
      const Eigen::Vector3d q = p.cwiseAbs() - prim.shape.half_extents;
      const Eigen::Vector3d outside = q.cwiseMax(0.0);
      return outside.norm() + std::min(q.maxCoeff(), 0.0);
    }
    case PrimitiveShape::Kind::Cylinder: {
      const double dr = std::hypot(p.x(), p.y()) - prim.shape.radius;
      const double dz = std::abs(p.z()) - prim.shape.half_height;
      const double out = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
      return out + std::min(std::max(dr, dz), 0.0);
    }
    case PrimitiveShape::Kind::Sphere:
      return p.norm() - prim.shape.radius;
  }
  return 0.0;
}

namespace {

// Closest point of the simplex hull to the origin plus the minimal vertex
// subset supporting it (vertices with positive barycentric weight).
struct SimplexClosest {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> support;
};

SimplexClosest closest_to_origin(const std::vector<Eigen::Vector3d>& pts) {
  const int k = static_cast<int>(pts.size());
  double best2 = std::numeric_limits<double>::infinity();
  SimplexClosest best;
  for (int mask = 1; mask < (1 << k); ++mask) {
    Eigen::Vector3d sub[4];
    int m = 0;
    for (int i = 0; i < k; ++i)
      if (mask & (1 << i)) sub[m++] = pts[static_cast<std::size_t>(i)];

    Eigen::Vector3d q;
    double lambda[4] = {1.0, 0.0, 0.0, 0.0};
    if (m == 1) {
      q = sub[0];
    } else {
      Eigen::MatrixXd diff(3, m - 1);
      for (int i = 1; i < m; ++i) diff.col(i - 1) = sub[i] - sub[0];
      const Eigen::MatrixXd gram = diff.transpose() * diff;
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
      if (!lu.isInvertible()) continue;
      const Eigen::VectorXd mu = lu.solve(-diff.transpose() * sub[0]);
      bool valid = true;
      double rest = 0.0;
      for (Eigen::Index i = 0; i < mu.size(); ++i) {
        lambda[i + 1] = mu[i];
        rest += mu[i];
        if (mu[i] < -1e-12) valid = false;
      }
      lambda[0] = 1.0 - rest;
      if (lambda[0] < -1e-12) valid = false;
      if (!valid) continue;
      q = sub[0] + diff * mu;
    }
    const double d2 = q.squaredNorm();
    if (d2 < best2) {
      best2 = d2;
      best.point = q;
      best.support.clear();
      for (int i = 0; i < m; ++i)
        if (lambda[i] > 1e-12) best.support.push_back(sub[i]);
      if (best.support.empty()) best.support.push_back(sub[0]);
    }
  }
  return best;
}

}  // namespace

double pair_distance(const PlacedPrimitive& a, const PlacedPrimitive& b) {
  const auto minkowski_support = [&](const Eigen::Vector3d& d) {
    return support_point(a, d) - support_point(b, -d);
  };
  Eigen::Vector3d v = a.position - b.position;
  if (v.squaredNorm() < 1e-24) v = Eigen::Vector3d(1e-6, 0, 0);

  std::vector<Eigen::Vector3d> simplex;
  for (int iter = 0; iter < 256; ++iter) {
    const Eigen::Vector3d w = minkowski_support(-v);
    const double v2 = v.squaredNorm();
    // w no closer to the origin than v (relative test): v is the answer.
    if (v2 - v.dot(w) <= 1e-10 * v2 || v2 - v.dot(w) <= 1e-30) break;
    bool duplicate = false;
    for (const auto& s : simplex)
      if ((s - w).squaredNorm() < 1e-30) duplicate = true;
    if (duplicate) break;
    simplex.push_back(w);
    SimplexClosest closest = closest_to_origin(simplex);
    simplex = std::move(closest.support);
    v = closest.point;
    if (v.squaredNorm() < 1e-18) return 0.0;  // origin enclosed or touched
  }
  return v.norm();
}

void SceneRecipe::validate() const {
  if (object_set.empty()) throw ValidationError("scene recipe needs a non-empty object set");
  for (const auto& shape : object_set) shape.validate();
  if (count_min < 1 || count_max < count_min)
    throw ValidationError("scene recipe count range is invalid");
  if (!(workspace_extent > 0.0)) throw ValidationError("workspace extent must be positive");
  if (!(surface_density > 0.0)) throw ValidationError("surface density must be positive");
  if (max_retries < 1) throw ValidationError("retry limit must be at least 1");
  for (const auto& shape : object_set) {
    if (shape.circumradius() >= workspace_extent / 2.0)
      throw ValidationError("workspace extent is too small for the object set");
  }
}

namespace {

double min_clearance(const PlacedPrimitive& candidate,
                     const std::vector<PlacedPrimitive>& placed) {
  // Table plane: clearance is the candidate's lowest world point.
  double dist = support_point(candidate, Eigen::Vector3d(0, 0, -1)).z();
  for (const auto& other : placed) dist = std::min(dist, pair_distance(candidate, other));
  return dist;
}

void sample_shape_surface(const PlacedPrimitive& prim, double density, Rng& rng, Scene& cloud) {
  const auto emit = [&](const Eigen::Vector3d& local_p, const Eigen::Vector3d& local_n) {
    cloud.points.push_back(prim.position + prim.rotation * local_p);
    cloud.normals.push_back(prim.rotation * local_n);
    cloud.object_ids.push_back(prim.object_id);
  };
  const auto count_for = [density](double area) {
    return std::max<long long>(1, std::llround(area * density));
  };

  switch (prim.shape.kind) {
    case PrimitiveShape::Kind::Box: {
      const Eigen::Vector3d h = prim.shape.half_extents;
      const struct {
        int axis;
        double sign;
        int u_axis, v_axis;
      } faces[6] = {{0, 1, 1, 2}, {0, -1, 1, 2}, {1, 1, 0, 2},
                    {1, -1, 0, 2}, {2, 1, 0, 1},  {2, -1, 0, 1}};
      for (const auto& face : faces) {
        const double area = 4.0 * h[face.u_axis] * h[face.v_axis];
        const long long n = count_for(area);
        for (long long i = 0; i < n; ++i) {
          Eigen::Vector3d p;
          p[face.axis] = face.sign * h[face.axis];
          p[face.u_axis] = rng.uniform(-h[face.u_axis], h[face.u_axis]);
          p[face.v_axis] = rng.uniform(-h[face.v_axis], h[face.v_axis]);
          Eigen::Vector3d nrm = Eigen::Vector3d::Zero();
          nrm[face.axis] = face.sign;
          emit(p, nrm);
        }
      }
      break;
    }
    case PrimitiveShape::Kind::Cylinder: {
      const double r = prim.shape.radius, hh = prim.shape.half_height;
      const long long n_side = count_for(2.0 * std::numbers::pi * r * 2.0 * hh);
      for (long long i = 0; i < n_side; ++i) {
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double z = rng.uniform(-hh, hh);
        emit({r * std::cos(phi), r * std::sin(phi), z}, {std::cos(phi), std::sin(phi), 0.0});
      }
      const long long n_cap = count_for(std::numbers::pi * r * r);
      for (const double sign : {1.0, -1.0}) {
        for (long long i = 0; i < n_cap; ++i) {
          const double rho = r * std::sqrt(rng.uniform());
          const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
          emit({rho * std::cos(phi), rho * std::sin(phi), sign * hh}, {0.0, 0.0, sign});
        }
      }
      break;
    }
    case PrimitiveShape::Kind::Sphere: {
      const double r = prim.shape.radius;
      const long long n = count_for(4.0 * std::numbers::pi * r * r);
      for (long long i = 0; i < n; ++i) {
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Eigen::Vector3d dir(rho * std::cos(phi), rho * std::sin(phi), z);
        emit(dir * r, dir);
      }
      break;
    }
  }
}

}  // namespace

SimScene generate_scene(const SceneRecipe& recipe) {
  recipe.validate();
  Rng rng(recipe.seed);

  SimScene out;
  out.table_extent = recipe.workspace_extent;

  const int count =
      recipe.count_min +
      static_cast<int>(rng.uniform_index(
          static_cast<std::uint64_t>(recipe.count_max - recipe.count_min + 1)));

  for (int obj = 0; obj < count; ++obj) {
    bool placed = false;
    std::string last_name = "?";
    for (int attempt = 0; attempt < recipe.max_retries && !placed; ++attempt) {
      const PrimitiveShape& shape =
          recipe.object_set[rng.uniform_index(recipe.object_set.size())];
      last_name = shape.name();
      const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double pitch = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double roll = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double limit = recipe.workspace_extent / 2.0 - shape.circumradius();
      const double x = rng.uniform(-limit, limit);
      const double y = rng.uniform(-limit, limit);
      const double drop_height =
          rng.uniform(shape.circumradius() + 0.01, shape.circumradius() + 0.35);

      PlacedPrimitive candidate;
      candidate.shape = shape;
      candidate.rotation = euler_to_rotation(yaw, pitch, roll);
      candidate.position = {x, y, drop_height};
      candidate.object_id = static_cast<std::uint32_t>(obj + 1);

      if (min_clearance(candidate, out.objects) <= kRestGap) continue;  // spawn overlap

      // March down to the first contact, then bisect onto the rest gap.
      const double start_z = candidate.position.z();
      const double step = 0.005;
      double lo = 0.0, hi = 0.0;
      for (double dz = step;; dz += step) {
        candidate.position.z() = start_z - dz;
        if (min_clearance(candidate, out.objects) <= kRestGap) {
          hi = dz;
          lo = dz - step;
          break;
        }
      }
      while (hi - lo > 1e-12) {
        const double mid = (lo + hi) / 2.0;
        candidate.position.z() = start_z - mid;
        if (min_clearance(candidate, out.objects) <= kRestGap)
          hi = mid;
        else
          lo = mid;
      }
      candidate.position.z() = start_z - lo;
      out.objects.push_back(candidate);
      placed = true;
    }
    if (!placed)
      throw ValidationError("could not place object " + std::to_string(obj + 1) + " (" +
                            last_name + ") within the retry limit");
  }

  // Table patch first (background id 0), then objects in placement order.
  const double half = recipe.workspace_extent / 2.0;
  const long long n_table = std::max<long long>(
      1, std::llround(recipe.workspace_extent * recipe.workspace_extent *
                      recipe.surface_density));
  for (long long i = 0; i < n_table; ++i) {
    const double x = rng.uniform(-half, half);
    const double y = rng.uniform(-half, half);
    out.cloud.points.emplace_back(x, y, 0.0);
    out.cloud.normals.emplace_back(0.0, 0.0, 1.0);
    out.cloud.object_ids.push_back(0);
  }
  for (const auto& prim : out.objects)
    sample_shape_surface(prim, recipe.surface_density, rng, out.cloud);
  return out;
}

ViewpointSet sample_viewpoints(double radius, int count) {
  if (!(radius > 0.0)) throw ValidationError("viewpoint radius must be positive");
  if (count < 1) throw ValidationError("viewpoint count must be at least 1");

  std::vector<Eigen::Vector3d> quarter;
  for (const auto& dir : fibonacci_sphere_directions(kViewLattice)) {
    if (dir.z() >= 0.0 && dir.y() >= 0.0) quarter.push_back(dir);
  }
  if (static_cast<std::size_t>(count) > quarter.size())
    throw ValidationError("viewpoint count exceeds the lattice capacity of " +
                          std::to_string(quarter.size()));

  ViewpointSet set;
  set.radius = radius;
  set.poses.reserve(static_cast<std::size_t>(count));
  std::vector<Eigen::Vector3d> dirs;
  for (int i = 0; i < count; ++i) {
    const std::size_t pick = (static_cast<std::size_t>(i) * quarter.size()) /
                             static_cast<std::size_t>(count);
    const Eigen::Vector3d dir = quarter[pick];
    dirs.push_back(dir);

    CameraPose pose;
    pose.position = radius * dir;
    const Eigen::Vector3d forward = -dir;  // look at the origin
    Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
    if (forward.cross(up).norm() < 1e-9) up = Eigen::Vector3d::UnitY();
    const Eigen::Vector3d x_cam = forward.cross(up).normalized();
    const Eigen::Vector3d y_cam = forward.cross(x_cam);
    pose.rotation.col(0) = x_cam;
    pose.rotation.col(1) = y_cam;
    pose.rotation.col(2) = forward;
    set.poses.push_back(pose);
  }

  set.min_pairwise_angle_deg = 180.0;
  for (std::size_t i = 0; i < dirs.size(); ++i)
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      const double c = std::clamp(dirs[i].dot(dirs[j]), -1.0, 1.0);
      set.min_pairwise_angle_deg =
          std::min(set.min_pairwise_angle_deg, std::acos(c) * 180.0 / std::numbers::pi);
    }
  return set;
}

namespace {

// Smallest ray parameter t > kRayEps hitting the primitive, or +inf. The
// ray is given in world coordinates; t is in units of `dir`.
double ray_primitive(const PlacedPrimitive& prim, const Eigen::Vector3d& origin_w,
                     const Eigen::Vector3d& dir_w) {
  const Eigen::Vector3d o = prim.rotation.transpose() * (origin_w - prim.position);
  const Eigen::Vector3d d = prim.rotation.transpose() * dir_w;
  const double inf = std::numeric_limits<double>::infinity();
  double best = inf;

  switch (prim.shape.kind) {
    case PrimitiveShape::Kind::Sphere: {
      const double a = d.squaredNorm();
      const double b = 2.0 * o.dot(d);
      const double c = o.squaredNorm() - sq(prim.shape.radius);
      const double disc = b * b - 4.0 * a * c;
      if (disc < 0.0) return inf;
      const double root = std::sqrt(disc);
      for (const double t : {(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)}) {
        if (t > kRayEps) best = std::min(best, t);
      }
      return best;
    }
    case PrimitiveShape::Kind::Box: {
      double t_lo = -inf, t_hi = inf;
      for (int axis = 0; axis < 3; ++axis) {
        const double h = prim.shape.half_extents[axis];
        if (std::abs(d[axis]) < 1e-15) {
          if (std::abs(o[axis]) > h) return inf;
          continue;
        }
        double t1 = (-h - o[axis]) / d[axis];
        double t2 = (h - o[axis]) / d[axis];
        if (t1 > t2) std::swap(t1, t2);
        t_lo = std::max(t_lo, t1);
        t_hi = std::min(t_hi, t2);
      }
      if (t_hi < t_lo) return inf;
      if (t_lo > kRayEps) return t_lo;
      if (t_hi > kRayEps) return t_hi;
      return inf;
    }
    case PrimitiveShape::Kind::Cylinder: {
      const double r = prim.shape.radius, hh = prim.shape.half_height;
      const double a = sq(d.x()) + sq(d.y());
      if (a > 1e-30) {
        const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
        const double c = sq(o.x()) + sq(o.y()) - sq(r);
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
          const double root = std::sqrt(disc);
          for (const double t : {(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)}) {
            if (t > kRayEps && std::abs(o.z() + t * d.z()) <= hh) best = std::min(best, t);
          }
        }
      }
      if (std::abs(d.z()) > 1e-15) {
        for (const double cap_z : {hh, -hh}) {
          const double t = (cap_z - o.z()) / d.z();
          if (t > kRayEps && sq(o.x() + t * d.x()) + sq(o.y() + t * d.y()) <= sq(r))
            best = std::min(best, t);
        }
      }
      return best;
    }
  }
  return inf;
}

}  // namespace

DepthImage render_depth(const SimScene& scene, const CameraPose& camera, const Intrinsics& k,
                        int width, int height, int threads) {
  if (width < 1 || height < 1) throw ValidationError("image dimensions must be positive");
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw ValidationError("focal lengths must be positive");

  DepthImage out;
  out.width = width;
  out.height = height;
  out.intrinsics = k;
  out.depth.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0);

  const double half = scene.table_extent / 2.0;
  const std::size_t pixels = out.depth.size();
  parallel_for(pixels, threads, [&](std::size_t idx) {
    const int u = static_cast<int>(idx % static_cast<std::size_t>(width));
    const int v = static_cast<int>(idx / static_cast<std::size_t>(width));
    // dir has unit z in camera coordinates, so t equals optical-axis depth.
    const Eigen::Vector3d dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    const Eigen::Vector3d dir_w = camera.rotation * dir_cam;
    const Eigen::Vector3d& origin = camera.position;

    double best = std::numeric_limits<double>::infinity();
    if (std::abs(dir_w.z()) > 1e-15) {
      const double t = -origin.z() / dir_w.z();
      if (t > kRayEps) {
        const double x = origin.x() + t * dir_w.x();
        const double y = origin.y() + t * dir_w.y();
        if (std::abs(x) <= half && std::abs(y) <= half) best = t;
      }
    }
    for (const auto& prim : scene.objects)
      best = std::min(best, ray_primitive(prim, origin, dir_w));
    if (std::isfinite(best)) out.depth[idx] = best;
  });
  return out;
}

DepthImage apply_depth_noise(const DepthImage& depth, double sigma_pixel, double sigma_shift,
                             std::uint64_t seed) {
  if (sigma_pixel < 0.0 || sigma_shift < 0.0)
    throw ValidationError("noise standard deviations must be non-negative");
  DepthImage out = depth;
  Rng rng(seed);
  const double shift = rng.normal() * sigma_shift;
  for (double& d : out.depth) {
    if (d <= 0.0) continue;  // invalid pixels stay invalid
    d = std::max(0.0, d + shift + rng.normal() * sigma_pixel);
  }
  return out;
}

}  // namespace fgrasp::simscene

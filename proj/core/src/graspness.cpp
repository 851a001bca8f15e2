#include "fgrasp/graspness.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_map>
#include <utility>

#include "detail/spatial_grid.hpp"
#include "fgrasp/error.hpp"
#include "fgrasp/geometry.hpp"
#include "fgrasp/parallel.hpp"

namespace fgrasp::graspness {

namespace {

// Conservative spatial bounds of every candidate pose at a point: any scene
// point that can touch the closing region or the gripper body of some
// (view, angle, depth) candidate lies within these limits of the point.
// Rotating about the approach axis changes neither the axial coordinate nor
// the radial distance, so one bound covers all angles.
struct CandidateBounds {
  double x_lo = 0.0;        // axial extent along the view direction
  double x_hi = 0.0;
  double radial = 0.0;      // max distance from the view axis
  double ball = 0.0;        // Euclidean reach from the candidate center
};

CandidateBounds candidate_bounds(const CandidateGraspGrid& grid, const eval::GripperModel& g,
                                 double clearance, double width) {
  const auto [d_min, d_max] = std::minmax_element(grid.depths.begin(), grid.depths.end());
  CandidateBounds b;
  b.x_lo = *d_min - g.finger_length - g.base_depth - clearance;
  b.x_hi = *d_max + clearance;
  const double y_max = width / 2.0 + g.finger_thickness + clearance;
  const double z_max = g.finger_thickness / 2.0 + clearance;
  b.radial = std::hypot(y_max, z_max);
  const double x_abs = std::max(std::abs(b.x_lo), std::abs(b.x_hi));
  b.ball = std::sqrt(x_abs * x_abs + y_max * y_max + z_max * z_max);
  return b;
}

// Members of `ball` within the axial/radial slab of `view` around `center`,
// with a safety margin so the filter never excludes a point the exact
// per-candidate test would accept. Preserves ascending order.
void filter_view_slab(const std::vector<Eigen::Vector3d>& points,
                      const std::vector<std::uint32_t>& ball, const Eigen::Vector3d& center,
                      const Eigen::Vector3d& view, const CandidateBounds& b,
                      std::vector<std::uint32_t>& out) {
  constexpr double kMargin = 1e-9;
  out.clear();
  const double r2 = (b.radial + kMargin) * (b.radial + kMargin);
  for (const std::uint32_t i : ball) {
    const Eigen::Vector3d d = points[i] - center;
    const double t = view.dot(d);
    if (t < b.x_lo - kMargin || t > b.x_hi + kMargin) continue;
    const double rad2 = d.squaredNorm() - t * t;
    if (rad2 > r2) continue;
    out.push_back(i);
  }
}

void require_labeling_inputs(const Scene& scene, const CandidateGraspGrid& grid,
                             const eval::GripperModel& gripper) {
  grid.validate();
  gripper.validate();
  if (!scene.has_normals()) throw ValidationError("raw graspness requires scene normals");
  if (!scene.has_object_ids()) throw ValidationError("raw graspness requires object ids");
  if (scene.normals.size() != scene.size() || scene.object_ids.size() != scene.size())
    throw ValidationError("scene annotation lengths do not match the point count");
}

}  // namespace

void CandidateGraspGrid::validate() const {
  if (views.empty() || angles.empty() || depths.empty())
    throw ValidationError("candidate grid needs at least one view, angle and depth");
  for (const auto& v : views) {
    if (std::abs(v.norm() - 1.0) > 1e-6)
      throw ValidationError("candidate grid views must be unit vectors");
  }
  for (const double a : angles) {
    if (!std::isfinite(a)) throw ValidationError("candidate grid angles must be finite");
  }
  for (const double d : depths) {
    if (!(d > 0.0) || !std::isfinite(d))
      throw ValidationError("candidate grid depths must be positive");
  }
}

CandidateGraspGrid CandidateGraspGrid::standard(int num_views, int num_angles,
                                                std::vector<double> depths) {
  if (num_angles < 1) throw ValidationError("candidate grid needs at least one angle");
  CandidateGraspGrid grid;
  grid.views = fibonacci_sphere_directions(num_views);
  grid.angles.reserve(static_cast<std::size_t>(num_angles));
  for (int k = 0; k < num_angles; ++k)
    grid.angles.push_back(std::numbers::pi * k / num_angles);
  grid.depths = std::move(depths);
  grid.validate();
  return grid;
}

GraspPose make_candidate(const Eigen::Vector3d& point, const Eigen::Vector3d& view,
                         double angle, double depth, double width) {
  GraspPose g;
  g.center = point;
  g.rotation = frame_from_axis(view) *
               Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitX()).toRotationMatrix();
  g.width = width;
  g.depth = depth;
  return g;
}

RawGraspnessResult compute_raw_graspness(const Scene& scene, const CandidateGraspGrid& grid,
                                         const eval::GripperModel& gripper,
                                         const RawGraspnessOptions& options) {
  require_labeling_inputs(scene, grid, gripper);

  const std::size_t n = scene.size();
  RawGraspnessResult result;
  result.raw.assign(n, 0.0);
  result.best_view.assign(n, -1);
  if (n == 0) return result;

  const CandidateBounds bounds =
      candidate_bounds(grid, gripper, options.clearance, gripper.max_width);
  const double query_radius = bounds.ball + 1e-6;
  const detail::SpatialGrid index(scene.points, std::max(query_radius, 1e-3));
  const double total = static_cast<double>(grid.candidate_count());

  parallel_for(n, options.threads, [&](std::size_t i) {
    if (scene.object_ids[i] == 0) return;  // table/background is never a target
    const Eigen::Vector3d& p = scene.points[i];
    const std::vector<std::uint32_t> ball = index.query_ball(p, query_radius);

    std::vector<std::uint32_t> slab;
    slab.reserve(ball.size());
    std::size_t successes = 0;
    std::int32_t best = -1;
    std::size_t best_count = 0;
    for (std::size_t v = 0; v < grid.views.size(); ++v) {
      filter_view_slab(scene.points, ball, p, grid.views[v], bounds, slab);
      std::size_t view_count = 0;
      for (const double angle : grid.angles) {
        for (const double depth : grid.depths) {
          const GraspPose cand = make_candidate(p, grid.views[v], angle, depth,
                                                gripper.max_width);
          const eval::GraspGeometry geo =
              eval::evaluate_grasp_geometry(cand, scene, gripper, options.clearance, slab);
          if (!geo.collision && eval::closure_from_geometry(geo, cand.width, options.mu))
            ++view_count;
        }
      }
      successes += view_count;
      if (view_count > best_count) {
        best_count = view_count;
        best = static_cast<std::int32_t>(v);
      }
    }
    result.raw[i] = static_cast<double>(successes) / total;
    result.best_view[i] = best;
  });
  return result;
}

std::vector<double> normalize_instance(std::span<const double> raw,
                                       std::span<const std::uint32_t> object_ids) {
  if (raw.size() != object_ids.size())
    throw ValidationError("graspness and object-id lengths differ");
  struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
  };
  std::unordered_map<std::uint32_t, Range> ranges;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (object_ids[i] == 0) continue;
    auto& r = ranges[object_ids[i]];
    r.lo = std::min(r.lo, raw[i]);
    r.hi = std::max(r.hi, raw[i]);
  }
  std::vector<double> out(raw.size(), 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (object_ids[i] == 0) continue;
    const Range& r = ranges.at(object_ids[i]);
    if (r.hi > r.lo)
      out[i] = (raw[i] - r.lo) / (r.hi - r.lo);
    else
      out[i] = r.hi == 0.0 ? 0.0 : 1.0;  // degenerate object: keep "graspable at all"
  }
  return out;
}

std::vector<double> normalize_scene(std::span<const double> instance_norm) {
  std::vector<double> out(instance_norm.begin(), instance_norm.end());
  if (out.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(out.begin(), out.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi > lo) {
    for (double& v : out) v = (v - lo) / (hi - lo);
  } else {
    std::fill(out.begin(), out.end(), 0.0);
  }
  return out;
}

GraspnessField make_field(std::vector<double> raw, std::vector<std::uint32_t> object_ids) {
  GraspnessField field;
  field.instance_norm = normalize_instance(raw, object_ids);
  field.final = normalize_scene(field.instance_norm);
  field.raw = std::move(raw);
  field.object_ids = std::move(object_ids);
  return field;
}

SeedSet sample_seeds(std::span<const double> final_graspness, const Scene& scene, std::size_t m,
                     const CandidateGraspGrid* grid, std::span<const std::int32_t> best_view) {
  const std::size_t n = scene.size();
  if (final_graspness.size() != n)
    throw ValidationError("graspness length does not match the point count");
  if (m > n) throw ValidationError("cannot sample more seeds than scene points");
  if (!best_view.empty() && best_view.size() != n)
    throw ValidationError("view bookkeeping length does not match the point count");

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return final_graspness[a] > final_graspness[b];
  });
  order.resize(m);

  const bool has_stats = grid != nullptr && !best_view.empty();
  if (!has_stats && !scene.has_normals())
    throw ValidationError("seed views need either view bookkeeping or scene normals");

  SeedSet seeds;
  seeds.indices = order;
  seeds.views.reserve(m);
  for (const std::uint32_t i : order) {
    Eigen::Vector3d view = Eigen::Vector3d::UnitZ();
    if (has_stats && best_view[i] >= 0) {
      view = grid->views[static_cast<std::size_t>(best_view[i])];
    } else if (scene.has_normals() && scene.normals[i].norm() > 1e-12) {
      view = -scene.normals[i].normalized();  // approach into the surface
    }
    seeds.views.push_back(view);
  }
  return seeds;
}

namespace {

// Best proposal per view at one point: minimal-friction (angle, depth)
// candidate, re-centered on the contact midpoint, width tightened to the
// contact span plus margin, then re-verified as a whole.
std::vector<std::pair<std::size_t, GraspPose>> label_point(
    const Scene& scene, const CandidateGraspGrid& grid, const eval::GripperModel& gripper,
    const ProposalOptions& options, const detail::SpatialGrid& index,
    const CandidateBounds& bounds, double query_radius, std::uint32_t point_index) {
  const Eigen::Vector3d& p = scene.points[point_index];
  const std::vector<std::uint32_t> ball = index.query_ball(p, query_radius);

  std::vector<std::pair<std::size_t, GraspPose>> proposals;
  std::vector<std::uint32_t> slab;
  slab.reserve(ball.size());
  for (std::size_t v = 0; v < grid.views.size(); ++v) {
    filter_view_slab(scene.points, ball, p, grid.views[v], bounds, slab);

    bool found = false;
    double best_mu = 0.0;
    GraspPose best_pose;
    eval::GraspGeometry best_geo;
    for (const double angle : grid.angles) {
      for (const double depth : grid.depths) {
        const GraspPose cand =
            make_candidate(p, grid.views[v], angle, depth, gripper.max_width);
        const eval::GraspGeometry geo =
            eval::evaluate_grasp_geometry(cand, scene, gripper, options.raw.clearance, slab);
        if (geo.collision) continue;
        const double mu = eval::min_closure_friction(geo, cand.width, options.mu_sweep);
        if (mu < 0.0) continue;
        if (!found || mu < best_mu) {
          found = true;
          best_mu = mu;
          best_pose = cand;
          best_geo = geo;
        }
      }
    }
    if (!found) continue;

    // Final pose: centered between the contacts, just wide enough to admit
    // them, verified afresh so the tightened geometry stands on its own.
    GraspPose final_pose = best_pose;
    const double mid = (best_geo.y_plus + best_geo.y_minus) / 2.0;
    final_pose.center += final_pose.closing_axis() * mid;
    final_pose.width = std::min(gripper.max_width,
                                (best_geo.y_plus - best_geo.y_minus) + options.width_margin);
    const eval::GraspGeometry verify =
        eval::evaluate_grasp_geometry(final_pose, scene, gripper, options.raw.clearance, ball);
    if (verify.collision) continue;
    const double mu = eval::min_closure_friction(verify, final_pose.width, options.mu_sweep);
    if (mu < 0.0) continue;
    final_pose.score = 1.1 - mu;
    if (scene.has_object_ids()) final_pose.object_id = scene.object_ids[point_index];
    proposals.emplace_back(v, final_pose);
  }
  return proposals;
}

void validate_proposal_options(const ProposalOptions& options) {
  if (options.mu_sweep.empty()) throw ValidationError("friction sweep must not be empty");
  for (std::size_t i = 0; i < options.mu_sweep.size(); ++i) {
    if (!(options.mu_sweep[i] > 0.0))
      throw ValidationError("friction sweep values must be positive");
    if (i > 0 && options.mu_sweep[i] <= options.mu_sweep[i - 1])
      throw ValidationError("friction sweep must be strictly increasing");
  }
  if (!(options.width_margin >= 0.0) || !std::isfinite(options.width_margin))
    throw ValidationError("width margin must be non-negative");
}

}  // namespace

std::vector<GraspPose> label_scene_grasps(const Scene& scene, const CandidateGraspGrid& grid,
                                          const eval::GripperModel& gripper,
                                          const ProposalOptions& options,
                                          std::span<const std::uint32_t> point_filter) {
  require_labeling_inputs(scene, grid, gripper);
  validate_proposal_options(options);

  std::vector<std::uint32_t> points;
  if (point_filter.empty()) {
    points.resize(scene.size());
    std::iota(points.begin(), points.end(), 0u);
  } else {
    points.assign(point_filter.begin(), point_filter.end());
    for (const std::uint32_t i : points) {
      if (i >= scene.size()) throw ValidationError("point filter index out of range");
    }
  }

  const CandidateBounds bounds =
      candidate_bounds(grid, gripper, options.raw.clearance, gripper.max_width);
  // Re-centering moves the pose along the closing axis by at most half the
  // opening; widen the neighborhood so verification sees every point that
  // can matter for the displaced pose.
  const double query_radius = bounds.ball + gripper.max_width / 2.0 + 1e-6;
  const detail::SpatialGrid index(scene.points, std::max(query_radius, 1e-3));

  std::vector<std::vector<std::pair<std::size_t, GraspPose>>> per_point(points.size());
  parallel_for(points.size(), options.raw.threads, [&](std::size_t k) {
    per_point[k] =
        label_point(scene, grid, gripper, options, index, bounds, query_radius, points[k]);
  });

  std::vector<GraspPose> out;
  for (const auto& proposals : per_point)
    for (const auto& [view, pose] : proposals) out.push_back(pose);
  return out;
}

std::vector<GraspPose> propose_grasps(const Scene& scene, const CandidateGraspGrid& grid,
                                      const eval::GripperModel& gripper,
                                      const GraspnessField& field,
                                      const RawGraspnessResult& bookkeeping, std::size_t m,
                                      const ProposalOptions& options) {
  require_labeling_inputs(scene, grid, gripper);
  validate_proposal_options(options);
  const SeedSet seeds = sample_seeds(field.final, scene, m, &grid, bookkeeping.best_view);

  const CandidateBounds bounds =
      candidate_bounds(grid, gripper, options.raw.clearance, gripper.max_width);
  const double query_radius = bounds.ball + gripper.max_width / 2.0 + 1e-6;
  const detail::SpatialGrid index(scene.points, std::max(query_radius, 1e-3));

  std::vector<std::vector<std::pair<std::size_t, GraspPose>>> per_seed(seeds.size());
  parallel_for(seeds.size(), options.raw.threads, [&](std::size_t k) {
    per_seed[k] = label_point(scene, grid, gripper, options, index, bounds, query_radius,
                              seeds.indices[k]);
  });

  std::vector<GraspPose> out;
  out.reserve(seeds.size());
  for (const auto& proposals : per_seed) {
    if (proposals.empty()) continue;
    const GraspPose* best = &proposals.front().second;
    for (const auto& [view, pose] : proposals) {
      if (pose.score > best->score) best = &pose;
    }
    out.push_back(*best);
  }
  return out;
}

}  // namespace fgrasp::graspness

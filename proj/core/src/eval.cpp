#include "fgrasp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fgrasp/error.hpp"

namespace fgrasp::eval {

void GripperModel::validate() const {
  if (!(max_width > 0) || !(finger_length > 0) || !(finger_thickness > 0) || !(base_depth > 0))
    throw ValidationError("gripper model dimensions must be positive");
}

bool in_closing_region(const Eigen::Vector3d& q, double width, double depth,
                       const GripperModel& gripper) {
  return q.x() >= depth - gripper.finger_length && q.x() <= depth &&
         std::abs(q.y()) <= width / 2.0 && std::abs(q.z()) <= gripper.finger_thickness / 2.0;
}

bool in_gripper_body(const Eigen::Vector3d& q, double width, double depth,
                     const GripperModel& gripper, double clearance) {
  const double th = gripper.finger_thickness;
  const double x_tip = depth;
  const double x_root = depth - gripper.finger_length;
  const double half_w = width / 2.0;

  // fingers
  if (q.x() >= x_root - clearance && q.x() <= x_tip + clearance &&
      std::abs(q.z()) <= th / 2.0 + clearance) {
    const double ay = std::abs(q.y());
    if (ay >= half_w - clearance && ay <= half_w + th + clearance) return true;
  }
  // base plate behind the finger roots
  if (q.x() >= x_root - gripper.base_depth - clearance && q.x() <= x_root + clearance &&
      std::abs(q.y()) <= half_w + th + clearance &&
      std::abs(q.z()) <= th / 2.0 + clearance)
    return true;
  return false;
}

GraspGeometry evaluate_grasp_geometry(const GraspPose& grasp, const Scene& scene,
                                      const GripperModel& gripper, double clearance,
                                      std::span<const std::uint32_t> subset) {
  GraspGeometry geo;
  const std::size_t n = subset.empty() ? scene.size() : subset.size();
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint32_t i = subset.empty() ? static_cast<std::uint32_t>(s) : subset[s];
    const Eigen::Vector3d q = to_gripper_frame(grasp, scene.points[i]);
    if (in_closing_region(q, grasp.width, grasp.depth, gripper)) {
      if (!geo.has_contacts) {
        geo.has_contacts = true;
        geo.idx_plus = geo.idx_minus = i;
        geo.y_plus = geo.y_minus = q.y();
      } else {
        if (q.y() > geo.y_plus) {
          geo.y_plus = q.y();
          geo.idx_plus = i;
        }
        if (q.y() < geo.y_minus) {
          geo.y_minus = q.y();
          geo.idx_minus = i;
        }
      }
    } else if (!geo.collision &&
               in_gripper_body(q, grasp.width, grasp.depth, gripper, clearance)) {
      geo.collision = true;
    }
  }
  if (geo.has_contacts) {
    geo.separation = (scene.points[geo.idx_plus] - scene.points[geo.idx_minus]).norm();
    if (scene.has_normals()) {
      const Eigen::Vector3d closing = grasp.closing_axis();
      const auto cone_cos = [&](std::uint32_t idx, double sign) {
        const Eigen::Vector3d& nrm = scene.normals[idx];
        const double len = nrm.norm();
        if (len < 1e-12) return -2.0;  // invalid-normal marker
        return sign * nrm.dot(closing) / len;
      };
      geo.cos_plus = cone_cos(geo.idx_plus, 1.0);
      geo.cos_minus = cone_cos(geo.idx_minus, -1.0);
    }
  }
  return geo;
}

bool closure_from_geometry(const GraspGeometry& geo, double grasp_width, double mu) {
  if (!geo.has_contacts || geo.separation > grasp_width) return false;
  const double cos_threshold = 1.0 / std::sqrt(1.0 + mu * mu);
  return geo.cos_plus >= cos_threshold && geo.cos_minus >= cos_threshold;
}

double min_closure_friction(const GraspGeometry& geo, double grasp_width,
                            std::span<const double> sweep) {
  for (const double mu : sweep) {
    if (closure_from_geometry(geo, grasp_width, mu)) return mu;
  }
  return -1.0;
}

bool force_closure(const GraspPose& grasp, const Scene& scene, const GripperModel& gripper,
                   double mu) {
  const GraspGeometry geo = evaluate_grasp_geometry(grasp, scene, gripper, 0.0);
  return closure_from_geometry(geo, grasp.width, mu);
}

bool collision_check(const GraspPose& grasp, const Scene& scene, const GripperModel& gripper,
                     double clearance) {
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Eigen::Vector3d q = to_gripper_frame(grasp, scene.points[i]);
    if (in_closing_region(q, grasp.width, grasp.depth, gripper)) continue;
    if (in_gripper_body(q, grasp.width, grasp.depth, gripper, clearance)) return true;
  }
  return false;
}

double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double tr = (a.transpose() * b).trace();
  const double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

std::vector<GraspPose> grasp_nms(const std::vector<GraspPose>& grasps, double t_thresh_m,
                                 double r_thresh_deg) {
  std::vector<std::size_t> order(grasps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grasps[a].score > grasps[b].score;
  });
  std::vector<GraspPose> retained;
  for (const std::size_t i : order) {
    bool suppressed = false;
    for (const GraspPose& kept : retained) {
      const double t = (grasps[i].center - kept.center).norm();
      if (t >= t_thresh_m) continue;
      if (rotation_angle_deg(grasps[i].rotation, kept.rotation) < r_thresh_deg) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) retained.push_back(grasps[i]);
  }
  return retained;
}

ScaleBin scale_bin(double width_m) {
  if (!(width_m >= 0.0) || width_m > 0.10)
    throw ValidationError("grasp width outside [0, 0.10] m");
  if (width_m < 0.04) return ScaleBin::Small;
  if (width_m < 0.07) return ScaleBin::Medium;
  return ScaleBin::Large;
}

const char* scale_bin_name(ScaleBin bin) {
  switch (bin) {
    case ScaleBin::Small: return "small";
    case ScaleBin::Medium: return "medium";
    case ScaleBin::Large: return "large";
  }
  return "?";
}

namespace {

// AP over an ordered subsequence: mean over mu of mean over k of
// Precision@k, truncated to top_k with absent slots counted as failures.
double ap_of_sequence(const std::vector<PerGraspResult>& per_grasp,
                      const std::vector<std::size_t>& seq, int top_k, std::size_t n_mu) {
  if (top_k <= 0) throw ValidationError("top_k must be positive");
  if (n_mu == 0) throw ValidationError("friction sweep must be non-empty");
  double ap = 0.0;
  for (std::size_t m = 0; m < n_mu; ++m) {
    double sum_prec = 0.0;
    int successes = 0;
    for (int k = 1; k <= top_k; ++k) {
      if (static_cast<std::size_t>(k) <= seq.size() &&
          per_grasp[seq[static_cast<std::size_t>(k) - 1]].success_per_mu[m])
        ++successes;
      sum_prec += static_cast<double>(successes) / k;
    }
    ap += sum_prec / top_k;
  }
  return ap / static_cast<double>(n_mu);
}

}  // namespace

EvalReport evaluate_ap(const std::vector<GraspPose>& grasps, const Scene& scene,
                       const GripperModel& gripper, const EvalParams& params) {
  gripper.validate();
  if (params.mus.empty()) throw ValidationError("friction sweep must be non-empty");
  if (params.top_k <= 0) throw ValidationError("top_k must be positive");

  EvalReport report;
  if (grasps.empty()) return report;

  std::vector<std::size_t> order(grasps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grasps[a].score > grasps[b].score;
  });

  report.per_grasp.reserve(grasps.size());
  for (const std::size_t i : order) {
    const GraspPose& g = grasps[i];
    if (g.width > gripper.max_width)
      throw ValidationError("grasp width exceeds gripper max_width");
    const GraspGeometry geo = evaluate_grasp_geometry(g, scene, gripper, params.clearance);
    PerGraspResult r;
    r.grasp = g;
    r.collision = geo.collision;
    r.success_per_mu.resize(params.mus.size());
    for (std::size_t m = 0; m < params.mus.size(); ++m) {
      const bool closed = closure_from_geometry(geo, g.width, params.mus[m]);
      r.success_per_mu[m] = closed && (!params.use_collision || !geo.collision);
    }
    report.per_grasp.push_back(std::move(r));
  }

  std::vector<std::size_t> all(report.per_grasp.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> small, medium, large;
  for (std::size_t i = 0; i < report.per_grasp.size(); ++i) {
    switch (scale_bin(report.per_grasp[i].grasp.width)) {
      case ScaleBin::Small: small.push_back(i); break;
      case ScaleBin::Medium: medium.push_back(i); break;
      case ScaleBin::Large: large.push_back(i); break;
    }
  }
  const std::size_t n_mu = params.mus.size();
  report.ap_overall = ap_of_sequence(report.per_grasp, all, params.top_k, n_mu);
  report.ap_small = ap_of_sequence(report.per_grasp, small, params.top_k, n_mu);
  report.ap_medium = ap_of_sequence(report.per_grasp, medium, params.top_k, n_mu);
  report.ap_large = ap_of_sequence(report.per_grasp, large, params.top_k, n_mu);
  report.count_small = small.size();
  report.count_medium = medium.size();
  report.count_large = large.size();
  return report;
}

}  // namespace fgrasp::eval

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fgrasp/types.hpp"

namespace fgrasp::eval {

// Parallel-jaw gripper. In the gripper frame of a grasp (x = approach,
// y = closing, z = finger axis, origin at the grasp center) the geometry is:
//   closing region  x in [depth - finger_length, depth], |y| <= width/2,
//                   |z| <= finger_thickness/2          (grasped material)
//   finger boxes    same x/z extents, y in +-[width/2, width/2 + thickness]
//   base box        x in [depth - finger_length - base_depth,
//                         depth - finger_length], |y| <= width/2 + thickness,
//                   |z| <= finger_thickness/2
struct GripperModel {
  double max_width = 0.10;
  double finger_length = 0.06;
  double finger_thickness = 0.01;
  double base_depth = 0.02;

  void validate() const;
};

inline constexpr std::array<double, 6> kFrictionSweep = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2};

// Transform into the grasp's gripper frame. Shared by every geometric test
// below so that different call paths agree to the last bit.
inline Eigen::Vector3d to_gripper_frame(const GraspPose& g, const Eigen::Vector3d& p) {
  return g.rotation.transpose() * (p - g.center);
}

bool in_closing_region(const Eigen::Vector3d& q, double width, double depth,
                       const GripperModel& gripper);
bool in_gripper_body(const Eigen::Vector3d& q, double width, double depth,
                     const GripperModel& gripper, double clearance);

// Geometry of one grasp against a point cloud: the two finger contacts
// (nearest point each finger meets while closing; ties broken by the lower
// point index) and whether any point collides with the gripper body.
// `subset`, when non-empty, restricts the scan to those point indices; it
// must be sorted ascending for the documented tie-breaking.
struct GraspGeometry {
  bool has_contacts = false;
  std::uint32_t idx_plus = 0, idx_minus = 0;
  double y_plus = 0.0, y_minus = 0.0;
  double separation = 0.0;       // Euclidean distance between contacts
  double cos_plus = -2.0;        // cos(angle(contact normal, +closing axis))
  double cos_minus = -2.0;       // cos(angle(contact normal, -closing axis))
  bool collision = false;
};

GraspGeometry evaluate_grasp_geometry(const GraspPose& grasp, const Scene& scene,
                                      const GripperModel& gripper, double clearance,
                                      std::span<const std::uint32_t> subset = {});

// Antipodal force closure from precomputed geometry: both contacts exist,
// their separation fits the grasp width, and each contact normal lies in
// the friction cone of its finger's closing direction (half-angle atan(mu)).
bool closure_from_geometry(const GraspGeometry& geo, double grasp_width, double mu);

// Smallest friction coefficient in `sweep` under which the grasp closes;
// returns a negative value when no sweep entry succeeds.
double min_closure_friction(const GraspGeometry& geo, double grasp_width,
                            std::span<const double> sweep);

bool force_closure(const GraspPose& grasp, const Scene& scene, const GripperModel& gripper,
                   double mu);

// True iff any scene point outside the closing region lies in one of the
// three clearance-inflated gripper boxes.
bool collision_check(const GraspPose& grasp, const Scene& scene, const GripperModel& gripper,
                     double clearance);

// Greedy non-maximum suppression by descending score (ties by index): a
// grasp is suppressed iff it is within BOTH thresholds of an already
// retained grasp. Returns retained grasps in greedy (descending) order.
std::vector<GraspPose> grasp_nms(const std::vector<GraspPose>& grasps, double t_thresh_m,
                                 double r_thresh_deg);

double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

enum class ScaleBin { Small, Medium, Large };

// Width partition: Small [0, 4 cm), Medium [4, 7 cm), Large [7, 10 cm].
ScaleBin scale_bin(double width_m);
const char* scale_bin_name(ScaleBin bin);

struct EvalParams {
  int top_k = 50;
  double clearance = 0.0;
  bool use_collision = true;
  std::vector<double> mus{kFrictionSweep.begin(), kFrictionSweep.end()};
};

struct PerGraspResult {
  GraspPose grasp;
  std::vector<bool> success_per_mu;
  bool collision = false;
};

struct EvalReport {
  double ap_overall = 0.0;
  double ap_small = 0.0, ap_medium = 0.0, ap_large = 0.0;
  std::size_t count_small = 0, count_medium = 0, count_large = 0;
  std::vector<PerGraspResult> per_grasp;  // in evaluated (descending) order
};

// Average precision over the friction sweep of the top-k grasps by score.
// AP = mean over mu of mean over k=1..top_k of Precision@k, where slots
// past the end of the list count as failures. Scale APs apply the same
// formula to the width-binned subsets. Expects NMS-filtered input; no
// suppression is applied here.
EvalReport evaluate_ap(const std::vector<GraspPose>& grasps, const Scene& scene,
                       const GripperModel& gripper, const EvalParams& params = {});

}  // namespace fgrasp::eval

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fgrasp/eval.hpp"
#include "fgrasp/types.hpp"

namespace fgrasp::graspness {

// Predefined grasp candidates per point: V approach directions, A in-plane
// rotations, D advance depths. The default is 60 Fibonacci-sphere views,
// 12 angles over [0, pi) (parallel-jaw symmetry) and depths 1-4 cm.
struct CandidateGraspGrid {
  std::vector<Eigen::Vector3d> views;
  std::vector<double> angles;  // radians
  std::vector<double> depths;  // meters

  std::size_t candidate_count() const { return views.size() * angles.size() * depths.size(); }
  void validate() const;

  static CandidateGraspGrid standard(int num_views = 60, int num_angles = 12,
                                     std::vector<double> depths = {0.01, 0.02, 0.03, 0.04});
};

// The grasp pose of grid candidate (view, angle, depth) at a point. The
// closing axis is the view's deterministic tangent frame rotated by
// `angle`; width is the full gripper opening.
GraspPose make_candidate(const Eigen::Vector3d& point, const Eigen::Vector3d& view,
                         double angle, double depth, double width);

struct RawGraspnessOptions {
  double mu = 0.8;          // labeling friction coefficient
  double clearance = 0.0;   // collision clearance for candidate checks
  int threads = 0;          // 0 = hardware concurrency
};

struct RawGraspnessResult {
  std::vector<double> raw;              // success fraction per point
  std::vector<std::int32_t> best_view;  // view index with most successes, -1 if none
};

// Raw graspness: the fraction of grid candidates at each point that close
// under friction `mu` and do not collide, zero on background points.
// Requires normals and object ids. Deterministic and independent of the
// thread count.
RawGraspnessResult compute_raw_graspness(const Scene& scene, const CandidateGraspGrid& grid,
                                         const eval::GripperModel& gripper,
                                         const RawGraspnessOptions& options = {});

// Min-max normalization within each object id; background (id 0) is pinned
// to 0. A degenerate object (max == min) maps to 0 when its scores are all
// zero and to 1 otherwise.
std::vector<double> normalize_instance(std::span<const double> raw,
                                       std::span<const std::uint32_t> object_ids);

// Global min-max normalization over all points; an all-equal input maps
// to all zeros.
std::vector<double> normalize_scene(std::span<const double> instance_norm);

// Per-point graspness through both normalization stages.
struct GraspnessField {
  std::vector<double> raw;
  std::vector<double> instance_norm;
  std::vector<double> final;
  std::vector<std::uint32_t> object_ids;
};

GraspnessField make_field(std::vector<double> raw, std::vector<std::uint32_t> object_ids);

// The M highest-graspness points (ties by ascending index). Per-seed view
// is the point's best candidate view when bookkeeping is given, otherwise
// the inward surface normal.
SeedSet sample_seeds(std::span<const double> final_graspness, const Scene& scene, std::size_t m,
                     const CandidateGraspGrid* grid = nullptr,
                     std::span<const std::int32_t> best_view = {});

struct ProposalOptions {
  RawGraspnessOptions raw;
  std::vector<double> mu_sweep{eval::kFrictionSweep.begin(), eval::kFrictionSweep.end()};
  double width_margin = 0.01;  // opening margin added to the contact span
};

// One scored grasp per (point, view) with at least one feasible candidate:
// the best (angle, depth) by minimal closure friction, re-centered on the
// contact midpoint with width tightened to contact span + margin, then
// re-verified. Score = 1.1 - mu_min of the final pose. `point_filter`,
// when non-empty, restricts to those point indices.
std::vector<GraspPose> label_scene_grasps(const Scene& scene, const CandidateGraspGrid& grid,
                                          const eval::GripperModel& gripper,
                                          const ProposalOptions& options = {},
                                          std::span<const std::uint32_t> point_filter = {});

// Pipeline proposal step: label the top-M seed points and keep the best
// grasp per seed (over views).
std::vector<GraspPose> propose_grasps(const Scene& scene, const CandidateGraspGrid& grid,
                                      const eval::GripperModel& gripper,
                                      const GraspnessField& field,
                                      const RawGraspnessResult& bookkeeping, std::size_t m,
                                      const ProposalOptions& options = {});

}  // namespace fgrasp::graspness

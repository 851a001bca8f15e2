#pragma once

#include <cstdint>
#include <vector>

#include "fgrasp/geometry.hpp"
#include "fgrasp/types.hpp"

namespace fgrasp::normals {

// Per-point surface normals aligned to a backprojected organized depth map.
// Invalid estimates carry the exact zero vector and valid = 0.
struct NormalField {
  std::vector<Eigen::Vector3d> normals;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return normals.size(); }
};

// Cross-product normals on the organized grid: at each valid pixel whose
// four neighbors at +-stride in u and v are valid, the normal is
// (p_right - p_left) x (p_down - p_up), normalized and flipped to face the
// camera (n . p <= 0). Pixels with a missing neighbor or a near-degenerate
// cross product (norm < 1e-12) are marked invalid. `bp` must be the
// backprojection of `depth`.
NormalField estimate_normals(const DepthImage& depth, const BackprojectResult& bp,
                             int stride = 1, int threads = 0);
NormalField estimate_normals(const DepthImage& depth, int stride = 1, int threads = 0);

// Histogram of grasp score against the angle between the grasp approach
// axis and the inward surface normal (-n) at the grasp point.
struct ViewNormalHistogram {
  double bin_width_deg = 0.0;
  std::vector<double> mean_score;            // per bin; 0 where count is 0
  std::vector<std::size_t> counts;           // grasps per bin
  std::vector<std::size_t> top_percent_bins; // bins holding the top 1% of
                                             // grasps by score, ascending
};

// Bins angle(approach, -normal) in [0, 180] degrees with the given bin
// width (last bin closed). Each grasp center is snapped to the nearest
// scene point within 5 mm — farther centers are an error — and grasps
// landing on a point with an invalid normal are left out of both the
// histogram and the top-percent set.
ViewNormalHistogram view_to_normal_statistics(const Scene& scene,
                                              const std::vector<GraspPose>& grasps,
                                              double bin_width_deg);

}  // namespace fgrasp::normals

#include "fgrasp/semantic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fgrasp/error.hpp"
#include "fgrasp/geometry.hpp"

namespace fgrasp::semantic {

void CropRegion::validate(int image_width, int image_height) const {
  if (u_min > u_max || v_min > v_max) throw ValidationError("crop region is empty");
  if (u_min < 0 || v_min < 0 || u_max >= image_width || v_max >= image_height)
    throw ValidationError("crop region lies outside the image");
}

std::vector<GraspPose> filter_by_mask(const std::vector<GraspPose>& grasps, const Mask& mask,
                                      const DepthImage& depth, double depth_tolerance) {
  if (mask.width != depth.width || mask.height != depth.height)
    throw ValidationError("mask and depth image dimensions differ");
  if (!(depth_tolerance >= 0.0))
    throw ValidationError("depth tolerance must be non-negative");

  std::vector<GraspPose> kept;
  for (const GraspPose& g : grasps) {
    if (!(g.center.z() > 0.0)) continue;  // behind the camera plane
    const Eigen::Vector2d uv = project_pinhole(g.center, depth.intrinsics);
    const int u = static_cast<int>(std::lround(uv.x()));
    const int v = static_cast<int>(std::lround(uv.y()));
    if (!mask.inside(v, u)) continue;
    if (!depth.valid(v, u)) continue;
    if (std::abs(g.center.z() - depth.at(v, u)) > depth_tolerance) continue;
    kept.push_back(g);
  }
  return kept;
}

Mask lift_mask(const CropRegion& region, const Mask& mask_in_crop, int full_width,
               int full_height) {
  region.validate(full_width, full_height);
  if (mask_in_crop.width != region.width() || mask_in_crop.height != region.height())
    throw ValidationError("crop mask dimensions do not match the region");

  Mask full;
  full.width = full_width;
  full.height = full_height;
  full.data.assign(static_cast<std::size_t>(full_width) * static_cast<std::size_t>(full_height),
                   0);
  for (int v = 0; v < mask_in_crop.height; ++v)
    for (int u = 0; u < mask_in_crop.width; ++u) {
      const std::size_t src =
          static_cast<std::size_t>(v) * mask_in_crop.width + static_cast<std::size_t>(u);
      const std::size_t dst = static_cast<std::size_t>(v + region.v_min) * full_width +
                              static_cast<std::size_t>(u + region.u_min);
      full.data[dst] = mask_in_crop.data[src] ? 255 : 0;
    }
  return full;
}

Mask crop_mask(const Mask& full, const CropRegion& region) {
  region.validate(full.width, full.height);
  Mask out;
  out.width = region.width();
  out.height = region.height();
  out.data.assign(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height), 0);
  for (int v = 0; v < out.height; ++v)
    for (int u = 0; u < out.width; ++u) {
      out.data[static_cast<std::size_t>(v) * out.width + static_cast<std::size_t>(u)] =
          full.inside(v + region.v_min, u + region.u_min) ? 255 : 0;
    }
  return out;
}

std::vector<GraspPose> select_best(const std::vector<GraspPose>& grasps, std::size_t top_n) {
  std::vector<std::size_t> order(grasps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grasps[a].score > grasps[b].score;
  });
  std::vector<GraspPose> out;
  const std::size_t n = std::min(top_n, grasps.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(grasps[order[i]]);
  return out;
}

}  // namespace fgrasp::semantic

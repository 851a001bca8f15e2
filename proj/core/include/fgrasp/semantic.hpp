#pragma once

#include <vector>

#include "fgrasp/types.hpp"

namespace fgrasp::semantic {

// Inclusive pixel rectangle in full-image coordinates.
struct CropRegion {
  int u_min = 0, v_min = 0, u_max = 0, v_max = 0;

  int width() const { return u_max - u_min + 1; }
  int height() const { return v_max - v_min + 1; }
  void validate(int image_width, int image_height) const;
};

// Keeps the grasps whose center projects onto an inside-mask pixel (nearest
// integer pixel) with the projected depth agreeing with the depth map within
// `depth_tolerance` — a center hidden behind the masked surface is dropped.
// Input order is preserved.
std::vector<GraspPose> filter_by_mask(const std::vector<GraspPose>& grasps, const Mask& mask,
                                      const DepthImage& depth, double depth_tolerance = 0.02);

// Embeds a crop-coordinate mask back into full-image coordinates; pixels
// outside the region are outside the mask.
Mask lift_mask(const CropRegion& region, const Mask& mask_in_crop, int full_width,
               int full_height);

// Extracts the region of a full-image mask in crop coordinates.
Mask crop_mask(const Mask& full, const CropRegion& region);

// Descending score, ties by original index, truncated to top_n.
std::vector<GraspPose> select_best(const std::vector<GraspPose>& grasps, std::size_t top_n);

}  // namespace fgrasp::semantic

#pragma once

#include <cstdint>
#include <vector>

#include "fgrasp/types.hpp"

namespace fgrasp::grouping {

// Multi-range cylinder neighborhoods: G nested radii around each seed,
// oriented along the seed's view direction.
struct CylinderSpec {
  std::vector<double> radii{0.01, 0.025, 0.05, 0.10};  // meters, strictly ascending
  double h_min = -0.02;  // axial extent along the view, meters
  double h_max = 0.04;
  std::size_t max_points = 64;  // per-group cap (K)

  void validate() const;
};

// Member indices per (range, seed): lists[g][m] holds the points whose
// axial coordinate lies in [h_min, h_max] and whose radial distance is at
// most radii[g], ordered by ascending radial distance (ties by ascending
// index) and truncated at max_points. Radial comparisons are made on
// squared distances.
using GroupLists = std::vector<std::vector<std::vector<std::uint32_t>>>;

GroupLists cylinder_group(const Scene& scene, const SeedSet& seeds, const CylinderSpec& spec,
                          int threads = 0);

// G x M x C feature tensor with per-group member counts.
struct MultiRangeFeatures {
  std::size_t groups = 0;    // G
  std::size_t seeds = 0;     // M
  std::size_t channels = 0;  // C
  std::vector<double> values;         // layout: ((g * seeds) + m) * channels + c
  std::vector<std::uint32_t> counts;  // layout: g * seeds + m

  double at(std::size_t g, std::size_t m, std::size_t c) const {
    return values[(g * seeds + m) * channels + c];
  }
  double& at(std::size_t g, std::size_t m, std::size_t c) {
    return values[(g * seeds + m) * channels + c];
  }
  std::uint32_t count(std::size_t g, std::size_t m) const { return counts[g * seeds + m]; }
};

// Max-pools each group's member features into one vector per (range, seed).
// Every member contributes its scene feature row concatenated with its
// seed-frame local coordinates (axial, then the two tangent components),
// so C = C_in + 3. Empty groups pool to zeros with count 0.
MultiRangeFeatures aggregate_features(const Scene& scene, const SeedSet& seeds,
                                      const GroupLists& groups, const CylinderSpec& spec,
                                      int threads = 0);

}  // namespace fgrasp::grouping

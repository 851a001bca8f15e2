#include "fgrasp/grouping.hpp"

#include <algorithm>
#include <cmath>

#include "fgrasp/error.hpp"
#include "fgrasp/geometry.hpp"
#include "fgrasp/parallel.hpp"

namespace fgrasp::grouping {

void CylinderSpec::validate() const {
  if (radii.empty()) throw ValidationError("cylinder spec needs at least one radius");
  for (std::size_t g = 0; g < radii.size(); ++g) {
    if (!(radii[g] > 0.0) || !std::isfinite(radii[g]))
      throw ValidationError("cylinder radii must be positive");
    if (g > 0 && radii[g] <= radii[g - 1])
      throw ValidationError("cylinder radii must be strictly ascending");
  }
  if (!(h_min < h_max)) throw ValidationError("cylinder axial extent must be non-degenerate");
  if (max_points < 1) throw ValidationError("cylinder group capacity must be at least 1");
}

namespace {

void validate_seeds(const Scene& scene, const SeedSet& seeds) {
  if (scene.size() == 0) throw ValidationError("cannot group an empty scene");
  if (seeds.views.size() != seeds.indices.size())
    throw ValidationError("seed views and indices differ in length");
  for (const std::uint32_t i : seeds.indices) {
    if (i >= scene.size()) throw ValidationError("seed index out of range");
  }
  for (const auto& v : seeds.views) {
    if (std::abs(v.norm() - 1.0) > 1e-6)
      throw ValidationError("seed views must be unit vectors");
  }
}

}  // namespace

GroupLists cylinder_group(const Scene& scene, const SeedSet& seeds, const CylinderSpec& spec,
                          int threads) {
  spec.validate();
  validate_seeds(scene, seeds);

  const std::size_t g_count = spec.radii.size();
  const std::size_t m_count = seeds.size();
  GroupLists lists(g_count, std::vector<std::vector<std::uint32_t>>(m_count));

  const double r_outer2 = spec.radii.back() * spec.radii.back();
  parallel_for(m_count, threads, [&](std::size_t m) {
    const Eigen::Vector3d& seed = scene.points[seeds.indices[m]];
    const Eigen::Vector3d& view = seeds.views[m];

    // Candidates within the widest cylinder, keyed by squared radial
    // distance so that the per-range groups are sorted prefixes.
    std::vector<std::pair<double, std::uint32_t>> members;
    for (std::uint32_t j = 0; j < scene.size(); ++j) {
      const Eigen::Vector3d d = scene.points[j] - seed;
      const double t = view.dot(d);
      if (t < spec.h_min || t > spec.h_max) continue;
      const double rad2 = d.squaredNorm() - t * t;
      if (rad2 > r_outer2) continue;
      members.emplace_back(rad2, j);
    }
    std::sort(members.begin(), members.end());

    for (std::size_t g = 0; g < g_count; ++g) {
      const double r2 = spec.radii[g] * spec.radii[g];
      auto& group = lists[g][m];
      for (const auto& [rad2, j] : members) {
        if (rad2 > r2) break;
        if (group.size() >= spec.max_points) break;
        group.push_back(j);
      }
    }
  });
  return lists;
}

MultiRangeFeatures aggregate_features(const Scene& scene, const SeedSet& seeds,
                                      const GroupLists& groups, const CylinderSpec& spec,
                                      int threads) {
  spec.validate();
  validate_seeds(scene, seeds);
  if (!scene.has_features())
    throw ValidationError("feature aggregation requires scene features");
  if (static_cast<std::size_t>(scene.features.rows()) != scene.size())
    throw ValidationError("feature row count does not match the point count");
  if (groups.size() != spec.radii.size())
    throw ValidationError("group lists do not match the cylinder spec");
  for (const auto& per_seed : groups) {
    if (per_seed.size() != seeds.size())
      throw ValidationError("group lists do not match the seed set");
  }

  const std::size_t c_in = static_cast<std::size_t>(scene.features.cols());
  MultiRangeFeatures out;
  out.groups = groups.size();
  out.seeds = seeds.size();
  out.channels = c_in + 3;
  out.values.assign(out.groups * out.seeds * out.channels, 0.0);
  out.counts.assign(out.groups * out.seeds, 0);

  parallel_for(out.seeds, threads, [&](std::size_t m) {
    const Eigen::Vector3d& seed = scene.points[seeds.indices[m]];
    const Eigen::Matrix3d frame = frame_from_axis(seeds.views[m]);
    for (std::size_t g = 0; g < out.groups; ++g) {
      const auto& group = groups[g][m];
      out.counts[g * out.seeds + m] = static_cast<std::uint32_t>(group.size());
      if (group.empty()) continue;
      double* pooled = &out.at(g, m, 0);
      bool first = true;
      for (const std::uint32_t j : group) {
        const Eigen::Vector3d local = frame.transpose() * (scene.points[j] - seed);
        for (std::size_t c = 0; c < out.channels; ++c) {
          const double value = c < c_in ? scene.features(static_cast<Eigen::Index>(j),
                                                         static_cast<Eigen::Index>(c))
                                        : local[static_cast<Eigen::Index>(c - c_in)];
          if (first || value > pooled[c]) pooled[c] = value;
        }
        first = false;
      }
    }
  });
  return out;
}

}  // namespace fgrasp::grouping

#include "fgrasp/normals.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>

#include "detail/spatial_grid.hpp"
#include "fgrasp/error.hpp"
#include "fgrasp/parallel.hpp"

namespace fgrasp::normals {

namespace {

constexpr double kSnapRadius = 0.005;  // grasp-center-to-point association

Eigen::Vector3d pixel_point(const DepthImage& d, int u, int v) {
  const double z = d.at(v, u);
  return {(u - d.intrinsics.cx) * z / d.intrinsics.fx,
          (v - d.intrinsics.cy) * z / d.intrinsics.fy, z};
}

}  // namespace

NormalField estimate_normals(const DepthImage& depth, const BackprojectResult& bp, int stride,
                             int threads) {
  if (stride < 1) throw ValidationError("normal-estimation stride must be at least 1");
  if (bp.point_to_pixel.size() != bp.points.size() ||
      bp.pixel_to_point.size() !=
          static_cast<std::size_t>(depth.width) * static_cast<std::size_t>(depth.height))
    throw ValidationError("backprojection does not match the depth image");

  NormalField field;
  field.normals.assign(bp.points.size(), Eigen::Vector3d::Zero());
  field.valid.assign(bp.points.size(), 0);

  parallel_for(bp.points.size(), threads, [&](std::size_t j) {
    const auto [u, v] = bp.point_to_pixel[j];
    if (!depth.valid(v, u - stride) || !depth.valid(v, u + stride) ||
        !depth.valid(v - stride, u) || !depth.valid(v + stride, u))
      return;
    const Eigen::Vector3d horizontal =
        pixel_point(depth, u + stride, v) - pixel_point(depth, u - stride, v);
    const Eigen::Vector3d vertical =
        pixel_point(depth, u, v + stride) - pixel_point(depth, u, v - stride);
    Eigen::Vector3d n = horizontal.cross(vertical);
    const double len = n.norm();
    if (len < 1e-12) return;
    n /= len;
    if (n.dot(bp.points[j]) > 0.0) n = -n;  // face the camera
    field.normals[j] = n;
    field.valid[j] = 1;
  });
  return field;
}

NormalField estimate_normals(const DepthImage& depth, int stride, int threads) {
  return estimate_normals(depth, backproject(depth), stride, threads);
}

ViewNormalHistogram view_to_normal_statistics(const Scene& scene,
                                              const std::vector<GraspPose>& grasps,
                                              double bin_width_deg) {
  if (!(bin_width_deg > 0.0) || bin_width_deg > 180.0)
    throw ValidationError("histogram bin width must lie in (0, 180] degrees");
  if (!scene.has_normals())
    throw ValidationError("view-to-normal statistics require scene normals");

  ViewNormalHistogram hist;
  hist.bin_width_deg = bin_width_deg;
  const std::size_t nbins = static_cast<std::size_t>(std::ceil(180.0 / bin_width_deg));
  hist.mean_score.assign(nbins, 0.0);
  hist.counts.assign(nbins, 0);
  if (grasps.empty()) return hist;

  const detail::SpatialGrid index(scene.points, kSnapRadius);

  // Bin index per grasp; SIZE_MAX marks grasps without a usable normal.
  std::vector<std::size_t> bin_of(grasps.size(), std::numeric_limits<std::size_t>::max());
  std::vector<double> sums(nbins, 0.0);
  for (std::size_t g = 0; g < grasps.size(); ++g) {
    const auto near = index.query_ball(grasps[g].center, kSnapRadius);
    std::size_t snapped = std::numeric_limits<std::size_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const std::uint32_t i : near) {
      const double d2 = (scene.points[i] - grasps[g].center).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        snapped = i;
      }
    }
    if (snapped == std::numeric_limits<std::size_t>::max())
      throw ValidationError("grasp center lies more than 5 mm from every scene point");
    const Eigen::Vector3d& n = scene.normals[snapped];
    if (n.norm() < 1e-12) continue;  // no normal to compare against
    const double c = std::clamp(
        grasps[g].approach_axis().dot(-n.normalized()), -1.0, 1.0);
    const double angle = std::acos(c) * 180.0 / std::numbers::pi;
    const std::size_t bin =
        std::min(static_cast<std::size_t>(angle / bin_width_deg), nbins - 1);
    bin_of[g] = bin;
    sums[bin] += grasps[g].score;
    ++hist.counts[bin];
  }
  for (std::size_t b = 0; b < nbins; ++b) {
    if (hist.counts[b] > 0) hist.mean_score[b] = sums[b] / static_cast<double>(hist.counts[b]);
  }

  // Bins holding the top 1% of binnable grasps by score (ties by index).
  std::vector<std::size_t> order;
  order.reserve(grasps.size());
  for (std::size_t g = 0; g < grasps.size(); ++g) {
    if (bin_of[g] != std::numeric_limits<std::size_t>::max()) order.push_back(g);
  }
  if (!order.empty()) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return grasps[a].score > grasps[b].score;
    });
    const std::size_t take = std::max<std::size_t>(1, (order.size() + 99) / 100);
    std::vector<std::size_t> bins;
    for (std::size_t k = 0; k < take; ++k) bins.push_back(bin_of[order[k]]);
    std::sort(bins.begin(), bins.end());
    bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
    hist.top_percent_bins = std::move(bins);
  }
  return hist;
}

}  // namespace fgrasp::normals

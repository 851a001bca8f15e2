#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace fgrasp::detail {

// Uniform hash grid over a fixed point set for radius queries.
class SpatialGrid {
 public:
  SpatialGrid(const std::vector<Eigen::Vector3d>& points, double cell_size)
      : points_(points), cell_(cell_size) {
    cells_.reserve(points.size());
    for (std::uint32_t i = 0; i < points.size(); ++i) {
      cells_[key(points[i])].push_back(i);
    }
  }

  // Indices of points with |p - center| <= radius, ascending.
  std::vector<std::uint32_t> query_ball(const Eigen::Vector3d& center, double radius) const {
    std::vector<std::uint32_t> out;
    const double r2 = radius * radius;
    const auto lo = coords(center - Eigen::Vector3d::Constant(radius));
    const auto hi = coords(center + Eigen::Vector3d::Constant(radius));
    for (std::int64_t ix = lo[0]; ix <= hi[0]; ++ix)
      for (std::int64_t iy = lo[1]; iy <= hi[1]; ++iy)
        for (std::int64_t iz = lo[2]; iz <= hi[2]; ++iz) {
          const auto it = cells_.find(pack(ix, iy, iz));
          if (it == cells_.end()) continue;
          for (const std::uint32_t i : it->second) {
            if ((points_[i] - center).squaredNorm() <= r2) out.push_back(i);
          }
        }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::array<std::int64_t, 3> coords(const Eigen::Vector3d& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    // 21 bits per axis, offset to keep coordinates positive
    const std::uint64_t b = 1ull << 20;
    return ((static_cast<std::uint64_t>(x + b) & 0x1fffff) << 42) |
           ((static_cast<std::uint64_t>(y + b) & 0x1fffff) << 21) |
           (static_cast<std::uint64_t>(z + b) & 0x1fffff);
  }
  std::uint64_t key(const Eigen::Vector3d& p) const {
    const auto c = coords(p);
    return pack(c[0], c[1], c[2]);
  }

  const std::vector<Eigen::Vector3d>& points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

}  // namespace fgrasp::detail

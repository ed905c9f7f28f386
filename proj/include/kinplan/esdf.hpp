#pragma once

#include <iosfwd>
#include <vector>

#include "kinplan/envsim.hpp"

namespace kinplan {

/// Result of a differentiable field lookup.
struct EsdfSample {
  double distance = 0.0;  // bilinear signed distance, meters
  double cost = 0.0;      // obstacle-proximity cost c(distance)
  Vec2 grad{0.0, 0.0};    // d cost / d p in the world frame
  bool clamped = false;   // p fell outside the cell-center lattice
};

/// Signed distance between cell centers: distance to the nearest occupied
/// center on free cells, minus the distance to the nearest free center on
/// occupied cells.
class EsdfGrid {
 public:
  EsdfGrid() = default;

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Pose2& origin() const { return origin_; }
  double safe_distance() const { return d_safe_; }
  void set_safe_distance(double d_safe) { d_safe_ = d_safe; }

  double at(int i, int j) const {
    return dist_[static_cast<std::size_t>(j) * width_ + static_cast<std::size_t>(i)];
  }
  const std::vector<double>& values() const { return dist_; }

  /// Hinge cost max(0, d_safe - d)^2, continued linearly for d < 0.
  double cost(double d) const;
  double cost_derivative(double d) const;

  EsdfSample sample(const Vec2& p) const;

  /// Comma-separated matrix, one line per row j.
  void write_csv(std::ostream& os) const;

  friend EsdfGrid build_esdf(const OccupancyGrid& grid, double d_safe, double cap);

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.1;
  Pose2 origin_{};
  double d_safe_ = 0.525;
  std::vector<double> dist_;
};

inline constexpr double kDefaultEsdfCap = 1e6;

/// Exact Euclidean distance transform, separable lower-envelope algorithm.
/// Distances are capped to +-cap (an obstacle-free grid yields +cap).
EsdfGrid build_esdf(const OccupancyGrid& grid, double d_safe = 0.525,
                    double cap = kDefaultEsdfCap);

}  // namespace kinplan

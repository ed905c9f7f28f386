#pragma once

#include <vector>

#include <Eigen/Core>

#include "kinplan/se2.hpp"

namespace kinplan {

/// Key points predicted by the planner, robot body frame, plus the safety
/// score from the fear head.
struct Waypoints {
  std::vector<Vec2> points;
  double safety_score = 0.5;

  int k() const { return static_cast<int>(points.size()); }
};

/// Reference states sampled at T + 1 uniform arc-length fractions along the
/// polyline (origin, mu_1, ..., mu_k), with d states / d mu.
struct ReferenceTrajectory {
  std::vector<Pose2> states;
  /// Row 3 * t + c is state t component c (x, y, psi); column 2 * i + d is
  /// waypoint i coordinate d.
  Eigen::MatrixXd jacobian;
  /// Same layout with two extra leading columns for the polyline origin. Used
  /// to check translation equivariance; the origin is fixed at plan time.
  Eigen::MatrixXd jacobian_with_origin;

  int horizon() const { return static_cast<int>(states.size()) - 1; }
};

/// Piecewise-linear interpolation. Consecutive points closer than 1e-9 are
/// collapsed; throws DegenerateWaypoints when everything collapses to the
/// origin, std::invalid_argument when k < 2 or T < k.
ReferenceTrajectory interpolate(const Waypoints& w, int horizon);

}  // namespace kinplan

#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Core>

#include "kinplan/random.hpp"
#include "kinplan/se2.hpp"

namespace kinplan::testing {

/// Central-difference Jacobian of f: R^n -> R^m. When wrap_rows is set, the
/// listed output row is treated as an angle and differences are wrapped.
inline Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-6, int wrap_row = -1) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    Eigen::VectorXd d = f(xp) - f(xm);
    if (wrap_row >= 0) d(wrap_row) = wrap_angle(d(wrap_row));
    J.col(i) = d / (2.0 * h);
  }
  return J;
}

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             double floor = 1e-12) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

inline Pose2 random_pose(Rng& rng, double extent = 5.0, double max_angle = 3.1) {
  return {uniform(rng, -extent, extent), uniform(rng, -extent, extent),
          uniform(rng, -max_angle, max_angle)};
}

}  // namespace kinplan::testing

#pragma once

#include <Eigen/Core>

namespace kinplan {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// Planar rigid transform (x, y, heading). Heading is always stored wrapped.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double psi_) : x(x_), y(y_), psi(wrap_angle(psi_)) {}

  static Pose2 identity() { return {}; }
  static Pose2 from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

  Vec2 translation() const { return {x, y}; }
  Vec3 vector() const { return {x, y, psi}; }
  Mat2 rotation() const;

  bool operator==(const Pose2&) const = default;

  /// Maps a point expressed in this frame into the parent frame.
  Vec2 transform(const Vec2& p) const;
  /// Maps a parent-frame point into this frame.
  Vec2 inverse_transform(const Vec2& p) const;
};

/// Tangent-space increment (vx, vy, omega).
struct Twist2 {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Vec3 vector() const { return {vx, vy, omega}; }
  static Twist2 from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& p);
Pose2 exp(const Twist2& t);
Twist2 log(const Pose2& p);

/// Coordinate difference a - b with the heading component wrapped.
Vec3 difference(const Pose2& a, const Pose2& b);

// Jacobians are taken with respect to the raw (x, y, psi) / (vx, vy, omega)
// coordinates.
Mat3 compose_jacobian_a(const Pose2& a, const Pose2& b);
Mat3 compose_jacobian_b(const Pose2& a, const Pose2& b);
Mat3 inverse_jacobian(const Pose2& p);
Mat3 exp_jacobian(const Twist2& t);
Mat3 log_jacobian(const Pose2& p);

namespace detail {

// sin(w)/w, (1 - cos(w))/w and their first two derivatives in w. Series
// branches near zero keep all of them free of cancellation.
struct ArcCoefficients {
  double a, da, dda;
  double b, db, ddb;
};
ArcCoefficients arc_coefficients(double w);

// (h) * cot(h) with h = theta / 2, plus first two derivatives in theta; this is
// the diagonal of the inverse left Jacobian used by log.
struct HalfCotCoefficients {
  double c, dc, ddc;
};
HalfCotCoefficients half_cot_coefficients(double theta);

}  // namespace detail
}  // namespace kinplan

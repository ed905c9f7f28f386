#include "kinplan/se2.hpp"

#include <cmath>
#include <numbers>

namespace kinplan {

namespace {
constexpr double kSmallAngle = 1e-8;
constexpr double kSeriesAngle = 1e-2;
}  // namespace

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  if (a > -kPi && a <= kPi) return a;
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

Mat2 Pose2::rotation() const {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Vec2 Pose2::transform(const Vec2& p) const { return rotation() * p + translation(); }

Vec2 Pose2::inverse_transform(const Vec2& p) const {
  return rotation().transpose() * (p - translation());
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.psi), s = std::sin(a.psi);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.psi + b.psi};
}

Pose2 inverse(const Pose2& p) {
  const double c = std::cos(p.psi), s = std::sin(p.psi);
  return {-c * p.x - s * p.y, s * p.x - c * p.y, -p.psi};
}

Vec3 difference(const Pose2& a, const Pose2& b) {
  return {a.x - b.x, a.y - b.y, wrap_angle(a.psi - b.psi)};
}

namespace detail {

ArcCoefficients arc_coefficients(double w) {
  ArcCoefficients k{};
  const double w2 = w * w;
  if (std::abs(w) < kSmallAngle) {
    k.a = 1.0 - w2 / 6.0;
    k.b = 0.5 * w;
  } else {
    const double sh = std::sin(0.5 * w);
    k.a = std::sin(w) / w;
    k.b = 2.0 * sh * sh / w;
  }
  if (std::abs(w) < kSeriesAngle) {
    const double w3 = w2 * w, w4 = w2 * w2, w5 = w4 * w;
    k.da = -w / 3.0 + w3 / 30.0 - w5 / 840.0;
    k.dda = -1.0 / 3.0 + w2 / 10.0 - w4 / 168.0;
    k.db = 0.5 - w2 / 8.0 + w4 / 144.0;
    k.ddb = -w / 4.0 + w3 / 36.0;
  } else {
    const double s = std::sin(w), c = std::cos(w);
    const double one_minus_c = 2.0 * std::sin(0.5 * w) * std::sin(0.5 * w);
    const double w3 = w2 * w;
    k.da = (w * c - s) / w2;
    k.dda = (-w2 * s - 2.0 * w * c + 2.0 * s) / w3;
    k.db = (w * s - one_minus_c) / w2;
    k.ddb = (w2 * c - 2.0 * w * s + 2.0 * one_minus_c) / w3;
  }
  return k;
}

HalfCotCoefficients half_cot_coefficients(double theta) {
  HalfCotCoefficients k{};
  const double t2 = theta * theta;
  if (std::abs(theta) < kSeriesAngle) {
    const double t4 = t2 * t2;
    k.c = 1.0 - t2 / 12.0 - t4 / 720.0 - t4 * t2 / 30240.0;
    k.dc = -theta / 6.0 - t2 * theta / 180.0 - t4 * theta / 5040.0;
    k.ddc = -1.0 / 6.0 - t2 / 60.0 - t4 / 1008.0;
  } else {
    const double h = 0.5 * theta;
    const double sh = std::sin(h), ch = std::cos(h);
    const double cot = ch / sh;
    k.c = h * cot;
    k.dc = 0.5 * (cot - h / (sh * sh));
    k.ddc = 0.5 * (k.c - 1.0) / (sh * sh);
  }
  return k;
}

}  // namespace detail

Pose2 exp(const Twist2& t) {
  const auto k = detail::arc_coefficients(t.omega);
  // V = [[a, -b], [b, a]]
  return {k.a * t.vx - k.b * t.vy, k.b * t.vx + k.a * t.vy, t.omega};
}

Twist2 log(const Pose2& p) {
  const double theta = p.psi;
  const auto k = detail::half_cot_coefficients(theta);
  // V^-1 = [[c, theta/2], [-theta/2, c]]
  return {k.c * p.x + 0.5 * theta * p.y, -0.5 * theta * p.x + k.c * p.y, theta};
}

Mat3 compose_jacobian_a(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.psi), s = std::sin(a.psi);
  Mat3 j = Mat3::Identity();
  j(0, 2) = -s * b.x - c * b.y;
  j(1, 2) = c * b.x - s * b.y;
  return j;
}

Mat3 compose_jacobian_b(const Pose2& a, const Pose2& /*b*/) {
  Mat3 j = Mat3::Identity();
  j.topLeftCorner<2, 2>() = a.rotation();
  return j;
}

Mat3 inverse_jacobian(const Pose2& p) {
  const double c = std::cos(p.psi), s = std::sin(p.psi);
  Mat3 j;
  j << -c, -s, s * p.x - c * p.y,  //
      s, -c, c * p.x + s * p.y,    //
      0.0, 0.0, -1.0;
  return j;
}

Mat3 exp_jacobian(const Twist2& t) {
  const auto k = detail::arc_coefficients(t.omega);
  Mat3 j = Mat3::Zero();
  j(0, 0) = k.a;
  j(0, 1) = -k.b;
  j(1, 0) = k.b;
  j(1, 1) = k.a;
  j(0, 2) = k.da * t.vx - k.db * t.vy;
  j(1, 2) = k.db * t.vx + k.da * t.vy;
  j(2, 2) = 1.0;
  return j;
}

Mat3 log_jacobian(const Pose2& p) {
  const double theta = p.psi;
  const auto k = detail::half_cot_coefficients(theta);
  Mat3 j = Mat3::Zero();
  j(0, 0) = k.c;
  j(0, 1) = 0.5 * theta;
  j(1, 0) = -0.5 * theta;
  j(1, 1) = k.c;
  j(0, 2) = k.dc * p.x + 0.5 * p.y;
  j(1, 2) = -0.5 * p.x + k.dc * p.y;
  j(2, 2) = 1.0;
  return j;
}

}  // namespace kinplan

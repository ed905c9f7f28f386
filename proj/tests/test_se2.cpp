#include "kinplan/se2.hpp"

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace kinplan {
namespace {

using testing::numeric_jacobian;
using testing::random_pose;
using testing::relative_error;

constexpr double kPi = std::numbers::pi;

void ExpectPoseNear(const Pose2& a, const Pose2& b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(wrap_angle(a.psi - b.psi), 0.0, tol);
}

TEST(Se2, WrapAngleRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(-0.5 * kPi - 4 * kPi), -0.5 * kPi, 1e-12);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double a = wrap_angle(uniform(rng, -100.0, 100.0));
    EXPECT_GT(a, -kPi);
    EXPECT_LE(a, kPi);
  }
}

TEST(Se2, ComposeExamples) {
  const Pose2 p(1.5, -2.0, 0.3);
  ExpectPoseNear(compose(Pose2::identity(), p), p, 0.0);
  ExpectPoseNear(compose(Pose2(1, 0, 0), Pose2(1, 0, 0)), Pose2(2, 0, 0), 0.0);
  // Rotation by pi/2 maps the x axis onto the y axis.
  ExpectPoseNear(compose(Pose2(0, 0, kPi / 2), Pose2(1, 0, 0)), Pose2(0, 1, kPi / 2), 1e-15);
}

TEST(Se2, GroupAxioms) {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const Pose2 a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    ExpectPoseNear(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-12);
    ExpectPoseNear(compose(a, inverse(a)), Pose2::identity(), 1e-12);
    ExpectPoseNear(compose(inverse(a), a), Pose2::identity(), 1e-12);
    ExpectPoseNear(compose(a, Pose2::identity()), a, 0.0);
    ExpectPoseNear(inverse(inverse(a)), a, 1e-12);
    const Pose2 ab = compose(a, b);
    EXPECT_GT(ab.psi, -kPi);
    EXPECT_LE(ab.psi, kPi);
  }
}

// Integrates the left-invariant ODE g' = g * xi with RK4; independent of the
// closed-form exponential.
Pose2 integrate_twist(const Twist2& xi, int steps) {
  double x = 0, y = 0, psi = 0;
  const double h = 1.0 / steps;
  auto f = [&](double ps) {
    return Vec3(std::cos(ps) * xi.vx - std::sin(ps) * xi.vy,
                std::sin(ps) * xi.vx + std::cos(ps) * xi.vy, xi.omega);
  };
  for (int i = 0; i < steps; ++i) {
    const Vec3 k1 = f(psi);
    const Vec3 k2 = f(psi + 0.5 * h * k1.z());
    const Vec3 k3 = f(psi + 0.5 * h * k2.z());
    const Vec3 k4 = f(psi + h * k3.z());
    const Vec3 d = h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    x += d.x();
    y += d.y();
    psi += d.z();
  }
  return {x, y, psi};
}

TEST(Se2, ExpExamples) {
  ExpectPoseNear(exp(Twist2{0, 0, 0}), Pose2::identity(), 0.0);
  ExpectPoseNear(exp(Twist2{0.7, 0, 0}), Pose2(0.7, 0, 0), 0.0);
  // Quarter circle of radius 2/pi.
  const Pose2 e = exp(Twist2{1.0, 0.0, kPi / 2});
  ExpectPoseNear(e, integrate_twist({1.0, 0.0, kPi / 2}, 20000), 1e-12);
  ExpectPoseNear(e, Pose2(2 / kPi, 2 / kPi, kPi / 2), 1e-14);
}

TEST(Se2, ExpMatchesOdeOnRandomTwists) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Twist2 xi{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -3, 3)};
    ExpectPoseNear(exp(xi), integrate_twist(xi, 4000), 1e-11);
  }
}

TEST(Se2, LogExamples) {
  const Twist2 z = log(Pose2::identity());
  EXPECT_EQ(z.vx, 0.0);
  EXPECT_EQ(z.vy, 0.0);
  EXPECT_EQ(z.omega, 0.0);
  const Twist2 l = log(Pose2(1.25, 0, 0));
  EXPECT_DOUBLE_EQ(l.vx, 1.25);
  EXPECT_DOUBLE_EQ(l.vy, 0.0);
  EXPECT_DOUBLE_EQ(l.omega, 0.0);
}

TEST(Se2, ExpLogRoundTrip) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Pose2 p = random_pose(rng, 5.0, 3.1);
    ExpectPoseNear(exp(log(p)), p, 1e-9);
    const Twist2 xi{uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3.1, 3.1)};
    EXPECT_LT((log(exp(xi)).vector() - xi.vector()).norm(), 1e-9);
  }
  // Either side of the small-angle switch.
  for (double w : {0.0, 1e-12, 5e-9, 2e-8, 1e-6, 1e-3}) {
    const Twist2 xi{0.8, -0.3, w};
    EXPECT_LT((log(exp(xi)).vector() - xi.vector()).norm(), 1e-14) << w;
  }
}

TEST(Se2, ComposeJacobiansAtIdentity) {
  EXPECT_TRUE(compose_jacobian_a(Pose2::identity(), Pose2::identity()).isIdentity(0.0));
  EXPECT_TRUE(compose_jacobian_b(Pose2::identity(), Pose2::identity()).isIdentity(0.0));
}

TEST(Se2, JacobiansMatchFiniteDifferences) {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const Pose2 a = random_pose(rng, 3.0, 3.0), b = random_pose(rng, 3.0, 3.0);
    auto comp_a = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return compose(Pose2(v(0), v(1), v(2)), b).vector();
    };
    auto comp_b = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return compose(a, Pose2(v(0), v(1), v(2))).vector();
    };
    auto inv = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return inverse(Pose2(v(0), v(1), v(2))).vector();
    };
    auto ex = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return exp(Twist2{v(0), v(1), v(2)}).vector();
    };
    auto lg = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return log(Pose2(v(0), v(1), v(2))).vector();
    };
    EXPECT_LT(relative_error(compose_jacobian_a(a, b), numeric_jacobian(comp_a, a.vector(), 1e-6, 2)), 1e-6);
    EXPECT_LT(relative_error(compose_jacobian_b(a, b), numeric_jacobian(comp_b, b.vector(), 1e-6, 2)), 1e-6);
    EXPECT_LT(relative_error(inverse_jacobian(a), numeric_jacobian(inv, a.vector(), 1e-6, 2)), 1e-6);
    const Twist2 xi{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -3, 3)};
    EXPECT_LT(relative_error(exp_jacobian(xi), numeric_jacobian(ex, xi.vector(), 1e-6, 2)), 1e-6);
    const Pose2 p = random_pose(rng, 3.0, 3.0);
    EXPECT_LT(relative_error(log_jacobian(p), numeric_jacobian(lg, p.vector())), 1e-6);
  }
  // Small rotations exercise the series branches.
  for (double w : {0.0, 1e-9, 1e-5, 5e-3, 2e-2}) {
    const Twist2 xi{0.9, 0.4, w};
    auto ex = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return exp(Twist2{v(0), v(1), v(2)}).vector();
    };
    EXPECT_LT(relative_error(exp_jacobian(xi), numeric_jacobian(ex, xi.vector())), 1e-6) << w;
    const Pose2 p(0.9, 0.4, w);
    auto lg = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return log(Pose2(v(0), v(1), v(2))).vector();
    };
    EXPECT_LT(relative_error(log_jacobian(p), numeric_jacobian(lg, p.vector())), 1e-6) << w;
  }
}

TEST(Se2, ArcCoefficientDerivatives) {
  // Second derivatives used by the dynamics Hessians, checked against
  // differences of the first derivatives.
  for (double w : {-2.5, -0.7, -1e-3, 0.0, 1e-7, 3e-3, 0.011, 0.4, 2.9}) {
    const double h = 1e-6;
    const auto k = detail::arc_coefficients(w);
    const auto kp = detail::arc_coefficients(w + h), km = detail::arc_coefficients(w - h);
    EXPECT_NEAR(k.da, (kp.a - km.a) / (2 * h), 1e-8) << w;
    EXPECT_NEAR(k.db, (kp.b - km.b) / (2 * h), 1e-8) << w;
    EXPECT_NEAR(k.dda, (kp.da - km.da) / (2 * h), 1e-8) << w;
    EXPECT_NEAR(k.ddb, (kp.db - km.db) / (2 * h), 1e-8) << w;
    const auto c = detail::half_cot_coefficients(w);
    const auto cp = detail::half_cot_coefficients(w + h), cm = detail::half_cot_coefficients(w - h);
    EXPECT_NEAR(c.dc, (cp.c - cm.c) / (2 * h), 1e-8) << w;
    EXPECT_NEAR(c.ddc, (cp.dc - cm.dc) / (2 * h), 1e-8) << w;
  }
}

}  // namespace
}  // namespace kinplan

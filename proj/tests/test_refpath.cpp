#include "kinplan/refpath.hpp"

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "kinplan/errors.hpp"
#include "test_util.hpp"

namespace kinplan {
namespace {

using testing::relative_error;

Waypoints random_waypoints(Rng& rng, int k, bool monotone = false) {
  Waypoints w;
  Vec2 p(0.0, 0.0);
  for (int i = 0; i < k; ++i) {
    const double ang = monotone ? uniform(rng, -1.2, 1.2) : uniform(rng, -2.5, 2.5);
    const double len = uniform(rng, 0.3, 2.0);
    p += len * Vec2(std::cos(ang), std::sin(ang));
    w.points.push_back(p);
  }
  return w;
}

Eigen::VectorXd flatten(const ReferenceTrajectory& r) {
  Eigen::VectorXd v(3 * r.states.size());
  for (std::size_t t = 0; t < r.states.size(); ++t) v.segment<3>(3 * t) = r.states[t].vector();
  return v;
}

TEST(Refpath, CollinearUniformSpacing) {
  Waypoints w{{{1.0, 0.0}, {2.5, 0.0}, {4.0, 0.0}}, 0.9};
  const auto r = interpolate(w, 8);
  ASSERT_EQ(r.horizon(), 8);
  for (int t = 0; t <= 8; ++t) {
    EXPECT_NEAR(r.states[t].x, 4.0 * t / 8, 1e-12);
    EXPECT_EQ(r.states[t].y, 0.0);
    EXPECT_EQ(r.states[t].psi, 0.0);
  }
}

TEST(Refpath, TwoPointUniformSplit) {
  Waypoints w{{{1.0, 0.0}, {2.0, 0.0}}, 0.5};
  const auto r = interpolate(w, 2);
  ASSERT_EQ(r.states.size(), 3u);
  for (int t = 0; t < 3; ++t) {
    EXPECT_DOUBLE_EQ(r.states[t].x, t);
    EXPECT_DOUBLE_EQ(r.states[t].y, 0.0);
    EXPECT_DOUBLE_EQ(r.states[t].psi, 0.0);
  }
}

TEST(Refpath, OriginAndEndpoint) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + trial % 5;
    const auto w = random_waypoints(rng, k);
    const auto r = interpolate(w, 50);
    EXPECT_EQ(r.states[0].x, 0.0);
    EXPECT_EQ(r.states[0].y, 0.0);
    // Heading at the origin points at the first waypoint.
    EXPECT_NEAR(r.states[0].psi, std::atan2(w.points[0].y(), w.points[0].x()), 1e-12);
    EXPECT_EQ(r.states.back().translation(), w.points.back());
    for (std::size_t t = 1; t < r.states.size(); ++t)
      EXPECT_LT(std::abs(wrap_angle(r.states[t].psi - r.states[t - 1].psi)), std::numbers::pi);
  }
}

// Arc-length coordinate of a point known to lie on a monotone-in-x polyline.
double arc_coordinate(const std::vector<Vec2>& poly, const Vec2& p) {
  double acc = 0.0;
  for (std::size_t s = 1; s < poly.size(); ++s) {
    const Vec2 a = poly[s - 1], b = poly[s];
    if (p.x() <= b.x() + 1e-12 || s + 1 == poly.size()) return acc + (p - a).norm();
    acc += (b - a).norm();
  }
  return acc;
}

TEST(Refpath, ArcLengthUniformity) {
  Rng rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    auto w = random_waypoints(rng, 5, true);
    std::vector<Vec2> poly{Vec2::Zero()};
    poly.insert(poly.end(), w.points.begin(), w.points.end());
    double total = 0.0;
    for (std::size_t s = 1; s < poly.size(); ++s) total += (poly[s] - poly[s - 1]).norm();
    const int T = 40;
    const auto r = interpolate(w, T);
    for (int t = 0; t <= T; ++t)
      EXPECT_NEAR(arc_coordinate(poly, r.states[t].translation()), total * t / T, 1e-9);
  }
}

TEST(Refpath, JacobianMatchesFiniteDifferences) {
  Rng rng(33);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + trial % 5;
    const auto w = random_waypoints(rng, k);
    const int T = 10 + trial % 41;
    const auto r = interpolate(w, T);
    Eigen::VectorXd mu(2 * k);
    for (int i = 0; i < k; ++i) mu.segment<2>(2 * i) = w.points[i];
    const double h = 1e-6;
    Eigen::MatrixXd fd(3 * (T + 1), 2 * k);
    for (int c = 0; c < 2 * k; ++c) {
      Eigen::VectorXd mp = mu, mm = mu;
      mp(c) += h;
      mm(c) -= h;
      Waypoints wp = w, wm = w;
      for (int i = 0; i < k; ++i) {
        wp.points[i] = mp.segment<2>(2 * i);
        wm.points[i] = mm.segment<2>(2 * i);
      }
      Eigen::VectorXd d = flatten(interpolate(wp, T)) - flatten(interpolate(wm, T));
      for (int t = 0; t <= T; ++t) d(3 * t + 2) = wrap_angle(d(3 * t + 2));
      fd.col(c) = d / (2 * h);
    }
    EXPECT_LT(relative_error(r.jacobian, fd), 1e-4) << "trial " << trial;
  }
}

TEST(Refpath, TranslationEquivariance) {
  // Moving the origin and every waypoint together moves every sample by the
  // same vector: position rows sum to one over matching coordinates, heading
  // rows sum to zero.
  Rng rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + trial % 5;
    const auto r = interpolate(random_waypoints(rng, k), 30);
    const Eigen::MatrixXd& J = r.jacobian_with_origin;
    ASSERT_EQ(J.cols(), 2 * (k + 1));
    for (int t = 0; t <= 30; ++t)
      for (int d = 0; d < 2; ++d) {
        double sx = 0.0, sy = 0.0;
        for (int i = 0; i <= k; ++i) {
          sx += J(3 * t + d, 2 * i);
          sy += J(3 * t + d, 2 * i + 1);
        }
        EXPECT_NEAR(sx, d == 0 ? 1.0 : 0.0, 1e-12);
        EXPECT_NEAR(sy, d == 1 ? 1.0 : 0.0, 1e-12);
        EXPECT_NEAR(J.row(3 * t + 2).sum(), 0.0, 1e-9);
      }
    EXPECT_TRUE(r.jacobian.isApprox(J.rightCols(2 * k)));
  }
}

TEST(Refpath, OriginPositionIsFixed) {
  Waypoints w{{{1.0, 0.0}, {1.0, 1.0}, {2.0, 1.0}}, 0.5};
  const auto r = interpolate(w, 6);
  EXPECT_TRUE(r.jacobian.topRows(2).isZero());
  EXPECT_FALSE(r.jacobian.row(2).isZero());
}

TEST(Refpath, HeadingAveragedAtKnots) {
  Waypoints w{{{1.0, 0.0}, {1.0, 1.0}}, 0.5};
  const auto r = interpolate(w, 2);
  EXPECT_NEAR(r.states[1].psi, std::numbers::pi / 4, 1e-12);
  EXPECT_NEAR(r.states[2].psi, std::numbers::pi / 2, 1e-12);
}

TEST(Refpath, CoincidentWaypointsCollapse) {
  Waypoints dup{{{1.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}}, 0.5};
  Waypoints ref{{{1.0, 0.0}, {2.0, 0.0}}, 0.5};
  const auto a = interpolate(dup, 10), b = interpolate(ref, 10);
  for (int t = 0; t <= 10; ++t) EXPECT_EQ(a.states[t].vector(), b.states[t].vector());
  Waypoints zeros{{{0.0, 0.0}, {0.0, 0.0}}, 0.5};
  EXPECT_THROW(interpolate(zeros, 10), DegenerateWaypoints);
}

TEST(Refpath, PreconditionsEnforced) {
  Waypoints one{{{1.0, 0.0}}, 0.5};
  EXPECT_THROW(interpolate(one, 10), std::invalid_argument);
  Waypoints three{{{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}}, 0.5};
  EXPECT_THROW(interpolate(three, 2), std::invalid_argument);
}

}  // namespace
}  // namespace kinplan

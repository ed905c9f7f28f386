#include "kinplan/refpath.hpp"

#include <cmath>
#include <stdexcept>

#include "kinplan/errors.hpp"

namespace kinplan {

namespace {

constexpr double kCollapse = 1e-9;
constexpr double kShortSegment = 1e-6;

using RowBlock = Eigen::Matrix<double, 1, 2>;

RowBlock angle_gradient(const Vec2& d) {
  const double n2 = d.squaredNorm();
  return RowBlock(-d.y() / n2, d.x() / n2);
}

}  // namespace

ReferenceTrajectory interpolate(const Waypoints& w, int horizon) {
  const int k = w.k();
  if (k < 2) throw std::invalid_argument("interpolate: need at least two waypoints");
  if (horizon < k) throw std::invalid_argument("interpolate: horizon must be >= k");

  // Polyline points including the origin, and the subset kept after
  // collapsing coincident neighbours.
  std::vector<Vec2> all;
  all.reserve(static_cast<std::size_t>(k) + 1);
  all.emplace_back(0.0, 0.0);
  for (const auto& p : w.points) all.push_back(p);
  std::vector<int> kept{0};
  for (int i = 1; i <= k; ++i)
    if ((all[i] - all[kept.back()]).norm() > kCollapse) kept.push_back(i);
  const int M = static_cast<int>(kept.size()) - 1;  // segment count
  if (M == 0) throw DegenerateWaypoints("interpolate: all waypoints coincide with the origin");

  std::vector<double> len(M + 1, 0.0), cum(M + 1, 0.0);
  std::vector<Vec2> dir(M + 1, Vec2::Zero());
  for (int m = 1; m <= M; ++m) {
    const Vec2 d = all[kept[m]] - all[kept[m - 1]];
    len[m] = d.norm();
    dir[m] = d / len[m];
    cum[m] = cum[m - 1] + len[m];
  }
  const double total = cum[M];

  const int T = horizon;
  const int cols = 2 * (k + 1);
  ReferenceTrajectory ref;
  ref.states.resize(static_cast<std::size_t>(T) + 1);
  ref.jacobian_with_origin = Eigen::MatrixXd::Zero(3 * (T + 1), cols);
  auto block = [&](int t, int row, int point) {
    return ref.jacobian_with_origin.block<1, 2>(3 * t + row, 2 * kept[point]);
  };

  int m = 1;
  for (int i = 0; i <= T; ++i) {
    const double frac = static_cast<double>(i) / T;
    const double s = frac * total;
    while (m < M && s > cum[m]) ++m;
    const Vec2& A = all[kept[m - 1]];
    const Vec2& B = all[kept[m]];
    const double f = i == T ? 1.0 : (s - cum[m - 1]) / len[m];
    const Vec2 pos = i == T ? B : Vec2(A + f * (B - A));

    // d pos = (1 - f) dA + f dB + (B - A) df, df = sum_n c_n dlen_n with
    // dlen_n = dir_n . (dQ_n - dQ_{n-1}).
    for (int r = 0; r < 2; ++r) {
      block(i, r, m - 1)(r) += 1.0 - f;
      block(i, r, m)(r) += f;
    }
    if (i != T) {
      for (int n = 1; n <= M; ++n) {
        const double c = (frac - (n < m ? 1.0 : 0.0) - (n == m ? f : 0.0)) / len[m];
        if (c == 0.0) continue;
        const Vec2 BA = B - A;
        for (int r = 0; r < 2; ++r) {
          block(i, r, n) += BA(r) * c * dir[n].transpose();
          block(i, r, n - 1) -= BA(r) * c * dir[n].transpose();
        }
      }
    }

    // Heading: tangent of the containing segment, circular mean at interior
    // knots.
    const bool at_knot = i != 0 && i != T && m < M && std::abs(s - cum[m]) <= 1e-12 * total;
    double psi;
    if (at_knot && (dir[m] + dir[m + 1]).norm() > 1e-9) {
      const Vec2 sum = dir[m] + dir[m + 1];
      psi = std::atan2(sum.y(), sum.x());
      const RowBlock dpsi_dsum = angle_gradient(sum);
      for (int seg : {m, m + 1}) {
        if (len[seg] < kShortSegment) continue;
        const Mat2 du = (Mat2::Identity() - dir[seg] * dir[seg].transpose()) / len[seg];
        const RowBlock g = dpsi_dsum * du;
        block(i, 2, seg) += g;
        block(i, 2, seg - 1) -= g;
      }
    } else {
      const int seg = i == 0 ? 1 : m;
      psi = std::atan2(dir[seg].y(), dir[seg].x());
      if (len[seg] >= kShortSegment) {
        const RowBlock g = angle_gradient(all[kept[seg]] - all[kept[seg - 1]]);
        block(i, 2, seg) += g;
        block(i, 2, seg - 1) -= g;
      }
    }
    ref.states[static_cast<std::size_t>(i)] = Pose2(pos.x(), pos.y(), psi);
  }
  ref.jacobian = ref.jacobian_with_origin.rightCols(2 * k);
  return ref;
}

}  // namespace kinplan

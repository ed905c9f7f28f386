#include "kinplan/blo_cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kinplan/dmpc.hpp"
#include "kinplan/nnplanner.hpp"

namespace kinplan {
namespace {

PartialCost empty_partial(int k, std::size_t n_states) {
  PartialCost p;
  p.grad_mu.assign(static_cast<std::size_t>(k), Vec2::Zero());
  p.grad_states.assign(n_states, Vec3::Zero());
  p.grad_reference.assign(n_states, Vec3::Zero());
  return p;
}

// sqrt(|v|^2 + eps) and its gradient v / that.
template <typename V>
double smooth_norm(const V& v, V& grad) {
  const double n = std::sqrt(v.squaredNorm() + kNormSmoothing);
  grad = v / n;
  return n;
}

void require_horizon(std::span<const Pose2> states, int min_T, const char* what) {
  if (static_cast<int>(states.size()) < min_T + 1)
    throw std::invalid_argument(std::string(what) + ": trajectory too short");
}

}  // namespace

void CostWeights::validate() const {
  const double all[] = {alpha, beta, gamma, gamma1, gamma2, gamma3};
  for (double v : all)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("CostWeights: weights must be finite and non-negative");
  if (alpha == 0.0 && beta == 0.0 && gamma == 0.0)
    throw std::invalid_argument("CostWeights: at least one of alpha, beta, gamma must be positive");
}

FearCost fear_cost(double z, bool colliding) {
  // Label y = 0 on collision, 1 otherwise. BCE(sigmoid(z), y) =
  // max(z, 0) - z y + log(1 + exp(-|z|)).
  const double y = colliding ? 0.0 : 1.0;
  FearCost f;
  f.value = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  f.grad_logit = sigmoid(z) - y;
  return f;
}

PartialCost environment_cost(const EsdfGrid& esdf, const Pose2& start, const Waypoints& mu,
                             std::span<const Pose2> states) {
  const int k = mu.k();
  require_horizon(states, 1, "environment_cost");
  if (k < 1) throw std::invalid_argument("environment_cost: no waypoints");
  const int T = static_cast<int>(states.size()) - 1;
  PartialCost p = empty_partial(k, states.size());
  const Mat2 Rt = start.rotation().transpose();
  for (int i = 0; i < k; ++i) {
    const EsdfSample s = esdf.sample(start.transform(mu.points[i]));
    p.value += s.cost / k;
    p.grad_mu[i] = Rt * s.grad / k;
    p.clamped += s.clamped;
  }
  for (int t = 1; t <= T; ++t) {
    const EsdfSample s = esdf.sample(start.transform(states[t].translation()));
    p.value += s.cost / T;
    p.grad_states[t].head<2>() = Rt * s.grad / T;
    p.clamped += s.clamped;
  }
  return p;
}

PartialCost goal_cost(const Waypoints& mu, const Vec2& goal) {
  if (mu.k() < 1) throw std::invalid_argument("goal_cost: no waypoints");
  PartialCost p = empty_partial(mu.k(), 0);
  const Vec2 d = mu.points.back() - goal;
  const double n = d.norm();
  p.value = std::log1p(n);
  if (n > 0.0) p.grad_mu.back() = d / (n * (1.0 + n));
  return p;
}

PartialCost straightness_cost(const Waypoints& mu, std::span<const Pose2> states) {
  require_horizon(states, 2, "straightness_cost");
  if (mu.k() < 1) throw std::invalid_argument("straightness_cost: no waypoints");
  const int T = static_cast<int>(states.size()) - 1;
  PartialCost p = empty_partial(mu.k(), states.size());
  const Vec2& end = mu.points.back();
  for (int t = 2; t <= T; ++t) {
    const double f = static_cast<double>(t) / T;
    const Vec2 r = f * end - states[t].translation();
    Vec2 g;
    p.value += smooth_norm(r, g) / (T - 1);
    p.grad_mu.back() += f * g / (T - 1);
    p.grad_states[t].head<2>() -= g / (T - 1);
  }
  return p;
}

PartialCost tracking_cost(std::span<const Pose2> states, std::span<const Pose2> reference) {
  require_horizon(states, 1, "tracking_cost");
  if (reference.size() != states.size())
    throw std::invalid_argument("tracking_cost: reference and trajectory lengths differ");
  const int T = static_cast<int>(states.size()) - 1;
  PartialCost p = empty_partial(0, states.size());
  for (int t = 1; t <= T; ++t) {
    const auto d = lie_error_derivatives(states[t].vector(), reference[t].vector(), false);
    Vec3 g;
    p.value += smooth_norm(d.e, g) / T;
    p.grad_states[t] = d.J_x.transpose() * g / T;
    p.grad_reference[t] = d.J_ref.transpose() * g / T;
  }
  return p;
}

bool trajectory_collides(const OccupancyGrid& grid, const Pose2& start,
                         std::span<const Pose2> states, double robot_radius) {
  if (states.empty()) return false;
  std::vector<Vec2> pts;
  for (const Pose2& s : states) {
    pts.push_back(start.transform(s.translation()));
    // The grid rectangle is convex, so checking vertices covers the segments.
    if (in_collision(grid, pts.back(), robot_radius)) return true;
  }
  // Exact segment-to-cell-center distances over the cells near each segment.
  const double reach = robot_radius / grid.resolution + 1.0;
  for (std::size_t t = 1; t < pts.size(); ++t) {
    const Vec2 a = pts[t - 1], b = pts[t], ab = b - a;
    const Vec2 ga = grid.to_grid(a), gb = grid.to_grid(b);
    const int i0 = std::max(0, static_cast<int>(std::floor(std::min(ga.x(), gb.x()) - reach)));
    const int i1 = std::min(grid.width - 1, static_cast<int>(std::ceil(std::max(ga.x(), gb.x()) + reach)));
    const int j0 = std::max(0, static_cast<int>(std::floor(std::min(ga.y(), gb.y()) - reach)));
    const int j1 = std::min(grid.height - 1, static_cast<int>(std::ceil(std::max(ga.y(), gb.y()) + reach)));
    const double len2 = ab.squaredNorm();
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        if (!grid.occupied(i, j)) continue;
        const Vec2 c = grid.cell_center(i, j);
        const double s = len2 > 0.0 ? std::clamp((c - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        if ((a + s * ab - c).norm() < robot_radius) return true;
      }
  }
  return false;
}

CostBreakdown evaluate_cost(const CostInputs& in, const CostWeights& w) {
  if (!in.esdf || !in.grid) throw std::invalid_argument("evaluate_cost: missing map");
  if (in.states.size() != in.reference.size())
    throw std::invalid_argument("evaluate_cost: reference and trajectory lengths differ");
  const int k = in.mu.k();
  CostBreakdown b;
  b.grad_mu.assign(static_cast<std::size_t>(k), Vec2::Zero());
  b.grad_states.assign(in.states.size(), Vec3::Zero());
  b.grad_reference.assign(in.states.size(), Vec3::Zero());

  b.colliding = trajectory_collides(*in.grid, in.start, in.states, in.robot_radius);
  const FearCost fear = fear_cost(in.safety_logit, b.colliding);
  b.fear = fear.value;
  b.grad_logit = w.alpha * fear.grad_logit;

  auto accumulate = [&](const PartialCost& p, double weight) {
    for (std::size_t i = 0; i < p.grad_mu.size(); ++i) b.grad_mu[i] += weight * p.grad_mu[i];
    for (std::size_t t = 0; t < p.grad_states.size(); ++t) {
      b.grad_states[t] += weight * p.grad_states[t];
      b.grad_reference[t] += weight * p.grad_reference[t];
    }
  };

  const PartialCost env = environment_cost(*in.esdf, in.start, in.mu, in.states);
  b.environment = env.value;
  b.clamped = env.clamped;
  accumulate(env, w.beta);

  const PartialCost goal = goal_cost(in.mu, in.goal_body);
  b.trajectory_goal = w.gamma1 * goal.value;
  accumulate(goal, w.gamma * w.gamma1);

  const PartialCost straight = straightness_cost(in.mu, in.states);
  b.trajectory_straightness = w.gamma2 * straight.value;
  accumulate(straight, w.gamma * w.gamma2);

  if (w.gamma3 != 0.0) {
    const PartialCost track = tracking_cost(in.states, in.reference);
    b.trajectory_tracking = w.gamma3 * track.value;
    accumulate(track, w.gamma * w.gamma3);
  }

  b.total = w.alpha * b.fear + w.beta * b.environment + w.gamma * b.trajectory();
  return b;
}

}  // namespace kinplan

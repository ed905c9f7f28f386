#pragma once

#include <span>
#include <vector>

#include "kinplan/envsim.hpp"
#include "kinplan/esdf.hpp"
#include "kinplan/refpath.hpp"
#include "kinplan/se2.hpp"

namespace kinplan {

/// U = alpha * fear + beta * environment + gamma * trajectory, where the
/// trajectory cost is gamma1 * goal + gamma2 * straightness + gamma3 *
/// tracking.
struct CostWeights {
  double alpha = 1.0;
  double beta = 2.0;
  double gamma = 1.0;
  double gamma1 = 5.0;
  double gamma2 = 0.5;
  double gamma3 = 1.0;

  /// Throws std::invalid_argument for negative weights or all zero.
  void validate() const;
};

/// Norm smoothing used by the straightness and tracking terms.
inline constexpr double kNormSmoothing = 1e-12;

struct FearCost {
  double value = 0.0;
  double grad_logit = 0.0;
};

/// Binary cross-entropy of sigmoid(logit) against label 0 when colliding and
/// 1 otherwise, in the overflow-free logit form.
FearCost fear_cost(double safety_logit, bool colliding);

/// Partial cost with gradients. Waypoints and states live in the body frame
/// of the planning pose; gradients are in that frame too.
struct PartialCost {
  double value = 0.0;
  std::vector<Vec2> grad_mu;         // k
  std::vector<Vec3> grad_states;     // T + 1
  std::vector<Vec3> grad_reference;  // T + 1
  int clamped = 0;                   // ESDF lookups outside the lattice
};

/// (1/k) sum_i c(mu_i) + (1/T) sum_{t=1..T} c(p_t), with c the ESDF hinge
/// cost sampled at start.transform(point).
PartialCost environment_cost(const EsdfGrid& esdf, const Pose2& start, const Waypoints& mu,
                             std::span<const Pose2> states);

/// log(|mu_k - goal| + 1), unweighted. The gradient at mu_k = goal is zero.
PartialCost goal_cost(const Waypoints& mu, const Vec2& goal);

/// (1/(T-1)) sum_{t=2..T} |(t/T) mu_k - p_t|, unweighted, smoothed norm.
PartialCost straightness_cost(const Waypoints& mu, std::span<const Pose2> states);

/// (1/T) sum_{t=1..T} |log(ref_t^-1 x_t)|, unweighted, smoothed norm.
PartialCost tracking_cost(std::span<const Pose2> states, std::span<const Pose2> reference);

/// True iff any point on the polyline through the world-frame state
/// positions is in collision (exact disc sweep against occupied cell centers).
bool trajectory_collides(const OccupancyGrid& grid, const Pose2& start,
                         std::span<const Pose2> states, double robot_radius);

struct CostInputs {
  const EsdfGrid* esdf = nullptr;
  const OccupancyGrid* grid = nullptr;
  Pose2 start{};
  Vec2 goal_body{0.0, 0.0};
  Waypoints mu;
  double safety_logit = 0.0;
  std::span<const Pose2> states;     // tau*, T + 1, body frame
  std::span<const Pose2> reference;  // x_ref, T + 1, body frame
  double robot_radius = 0.35;
};

struct CostBreakdown {
  double fear = 0.0;
  double environment = 0.0;
  // Trajectory terms already carry gamma1..gamma3.
  double trajectory_goal = 0.0;
  double trajectory_straightness = 0.0;
  double trajectory_tracking = 0.0;
  double total = 0.0;

  std::vector<Vec2> grad_mu;
  std::vector<Vec3> grad_states;
  std::vector<Vec3> grad_reference;
  double grad_logit = 0.0;
  bool colliding = false;
  int clamped = 0;

  double trajectory() const {
    return trajectory_goal + trajectory_straightness + trajectory_tracking;
  }
};

/// Weighted assembly of every term; gradients are summed with the same
/// weights. Throws std::invalid_argument on inconsistent sizes.
CostBreakdown evaluate_cost(const CostInputs& in, const CostWeights& w);

}  // namespace kinplan

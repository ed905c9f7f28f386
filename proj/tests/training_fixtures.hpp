#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "kinplan/training.hpp"

namespace kinplan::testing {

/// Micro setup of the end-to-end gradient check: 8 beams, k = 2, T = 5.
inline TrainingConfig micro_config() {
  TrainingConfig c;
  c.pipeline.sensor.n_beams = 8;
  c.pipeline.horizon = 5;
  c.network = NetworkShape::micro(8, 2);
  c.maps_per_archetype = 1;
  c.batch_size = 4;
  c.checkpoint_every = 0;
  return c;
}

/// 8 m x 8 m room with a block and a post close to the start, so that the
/// environment, fear and tracking terms are all active.
inline TrainingMap micro_map(const TrainingConfig& c) {
  OccupancyGrid g(80, 80, 0.1);
  g.close_border();
  for (int j = 30; j < 52; ++j)
    for (int i = 44; i < 50; ++i) g.set(i, j, true);
  for (int j = 22; j < 26; ++j)
    for (int i = 30; i < 34; ++i) g.set(i, j, true);
  return make_training_map(std::move(g), c);
}

/// Start 0.5 m in front of the block, heading slightly towards it; goal past
/// the block.
inline TrainingSample micro_sample(const TrainingMap& map, int variant = 0) {
  TrainingSample s;
  s.map = &map;
  s.start = Pose2(3.9 - 0.03 * variant, 3.6 + 0.07 * variant, 0.3 - 0.1 * variant);
  s.goal = Vec2(7.0, 5.5 - 0.2 * variant);
  return s;
}

/// Norm-wise relative error between the analytic dU/dtheta of
/// evaluate_sample and central differences of its total cost.
inline double chain_gradient_error(const PlannerParams& params, const TrainingSample& sample,
                                   const TrainingConfig& config, double h = 1e-6) {
  const SampleResult base = evaluate_sample(params, sample, config, true);
  Eigen::VectorXd fd(base.grad.size());
  PlannerParams p = params;
  for (Eigen::Index i = 0; i < fd.size(); ++i) {
    const double v = p.values()[i];
    p.values()[i] = v + h;
    const double up = evaluate_sample(p, sample, config, false).cost.total;
    p.values()[i] = v - h;
    const double down = evaluate_sample(p, sample, config, false).cost.total;
    p.values()[i] = v;
    fd[i] = (up - down) / (2.0 * h);
  }
  return (base.grad - fd).norm() / std::max(fd.norm(), 1e-12);
}

}  // namespace kinplan::testing

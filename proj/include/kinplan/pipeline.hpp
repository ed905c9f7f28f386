#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kinplan/config.hpp"
#include "kinplan/dmpc.hpp"
#include "kinplan/envsim.hpp"
#include "kinplan/nnplanner.hpp"
#include "kinplan/refpath.hpp"

namespace kinplan {

/// Planning-time MPC: model, weights and solver budget.
struct MpcConfig {
  std::string model = "dubins";  // dubins | bicycle
  double dt = 0.1;
  double v_max = 1.5;
  double u_max = 1.0;     // dubins turn-rate limit, rad/s
  double r_min = 1.48;    // bicycle turning radius, m
  double wheelbase = 0.5;
  double q_position = 1.0;
  double q_heading = 0.25;
  double r_speed = 0.1;
  double r_turn = 0.1;
  double terminal_scale = 10.0;
  int max_iterations = 50;

  KinematicModel kinematic_model() const;
  MpcWeights weights() const;
  SolverOptions solver_options() const;
  void validate() const;
};

struct PipelineConfig {
  int horizon = 50;
  SensorParams sensor{};
  MpcConfig mpc{};
  /// Skip the MPC: tau* is the interpolated reference itself.
  bool geometric_only = false;
  double robot_radius = 0.35;

  void validate() const;
};

void bind_pipeline_config(ConfigSchema& schema, PipelineConfig& c);

/// One forward pass of the planning stack in the body frame of `start`:
/// raycast, network, interpolation and (unless geometric_only) the MPC.
struct PipelineResult {
  RangeScan scan;
  Vec2 goal_body{0.0, 0.0};
  PlannerOutput output;
  ForwardCache cache;
  ReferenceTrajectory reference;
  std::optional<MpcProblem> problem;
  std::optional<MpcSolution> solution;
  std::vector<Pose2> optimized;  // tau*, body frame, T + 1

  /// Maps body-frame poses into the world frame of the planning pose.
  static std::vector<Pose2> to_world(const Pose2& start, const std::vector<Pose2>& body);
};

/// Throws DegenerateWaypoints, PoseInCollision, IllConditioned as the stages
/// do.
PipelineResult run_pipeline(const PlannerParams& params, const OccupancyGrid& grid,
                            const Pose2& start, const Vec2& goal_world,
                            const PipelineConfig& config, bool with_mpc = true);

}  // namespace kinplan

#include "kinplan/pipeline.hpp"

#include <stdexcept>

#include "kinplan/errors.hpp"

namespace kinplan {

KinematicModel MpcConfig::kinematic_model() const {
  if (model == "bicycle") return KinematicModel::bicycle_with_radius(r_min, wheelbase, dt, 0.0, v_max);
  return KinematicModel::dubins(dt, ControlBounds{0.0, v_max, u_max});
}

MpcWeights MpcConfig::weights() const {
  MpcWeights w;
  w.Q = Vec3(q_position, q_position, q_heading).asDiagonal();
  w.R = Vec2(r_speed, r_turn).asDiagonal();
  w.Q_terminal = terminal_scale * w.Q;
  return w;
}

SolverOptions MpcConfig::solver_options() const {
  SolverOptions o;
  o.max_iterations = max_iterations;
  return o;
}

void MpcConfig::validate() const {
  if (model != "dubins" && model != "bicycle")
    throw std::invalid_argument("mpc.model must be dubins or bicycle");
  if (!(q_position > 0.0) || !(q_heading >= 0.0) || !(r_speed > 0.0) || !(r_turn > 0.0) ||
      !(terminal_scale >= 0.0))
    throw std::invalid_argument("mpc weights must be positive");
  if (max_iterations < 1) throw std::invalid_argument("mpc.max_iterations must be >= 1");
  kinematic_model().validate();
}

void PipelineConfig::validate() const {
  if (horizon < 2) throw std::invalid_argument("horizon must be >= 2");
  if (sensor.n_beams < 1 || !(sensor.fov > 0.0) || !(sensor.max_range > 0.0))
    throw std::invalid_argument("sensor parameters must be positive");
  if (!(robot_radius > 0.0)) throw std::invalid_argument("robot_radius must be positive");
  mpc.validate();
}

void bind_pipeline_config(ConfigSchema& s, PipelineConfig& c) {
  s.add("plan.horizon", &c.horizon, "MPC horizon T (steps of mpc.dt)");
  s.add("plan.geometric_only", &c.geometric_only, "ablation: no MPC, no tracking term");
  s.add("plan.robot_radius", &c.robot_radius, "m");
  s.add("sensor.n_beams", &c.sensor.n_beams);
  s.add("sensor.fov", &c.sensor.fov, "rad");
  s.add("sensor.max_range", &c.sensor.max_range, "m");
  s.add_choice("mpc.model", &c.mpc.model, {"dubins", "bicycle"});
  s.add("mpc.dt", &c.mpc.dt, "s");
  s.add("mpc.v_max", &c.mpc.v_max, "m/s");
  s.add("mpc.u_max", &c.mpc.u_max, "rad/s, dubins only");
  s.add("mpc.r_min", &c.mpc.r_min, "m, bicycle only");
  s.add("mpc.wheelbase", &c.mpc.wheelbase, "m, bicycle only");
  s.add("mpc.q_position", &c.mpc.q_position);
  s.add("mpc.q_heading", &c.mpc.q_heading);
  s.add("mpc.r_speed", &c.mpc.r_speed);
  s.add("mpc.r_turn", &c.mpc.r_turn);
  s.add("mpc.terminal_scale", &c.mpc.terminal_scale);
  s.add("mpc.max_iterations", &c.mpc.max_iterations);
}

std::vector<Pose2> PipelineResult::to_world(const Pose2& start, const std::vector<Pose2>& body) {
  std::vector<Pose2> out;
  out.reserve(body.size());
  for (const Pose2& p : body) out.push_back(compose(start, p));
  return out;
}

PipelineResult run_pipeline(const PlannerParams& params, const OccupancyGrid& grid,
                            const Pose2& start, const Vec2& goal_world,
                            const PipelineConfig& config, bool with_mpc) {
  PipelineResult r;
  r.scan = raycast(grid, start, config.sensor);
  r.goal_body = start.inverse_transform(goal_world);
  r.output = forward(params, r.scan, r.goal_body, &r.cache);
  r.reference = interpolate(r.output.waypoints, config.horizon);
  if (config.geometric_only || !with_mpc) {
    r.optimized = r.reference.states;
    return r;
  }
  r.problem = MpcProblem::tracking(config.mpc.kinematic_model(), r.reference.states,
                                   config.mpc.weights());
  r.solution = solve(*r.problem, config.mpc.solver_options());
  r.optimized = r.solution->poses();
  return r;
}

}  // namespace kinplan

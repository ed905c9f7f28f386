#include "kinplan/controllers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "kinplan/errors.hpp"
#include "kinplan/refpath.hpp"

namespace kinplan {

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kReached: return "reached";
    case Outcome::kCollision: return "collision";
    case Outcome::kDeadlock: return "deadlock";
    case Outcome::kTimeout: return "timeout";
    case Outcome::kInfeasible: return "infeasible";
  }
  return "unknown";
}

std::string_view controller_name(ControllerKind k) {
  return k == ControllerKind::kPid ? "pid" : "mpc";
}

ControllerKind parse_controller(std::string_view name) {
  if (name == "pid") return ControllerKind::kPid;
  if (name == "mpc") return ControllerKind::kMpc;
  throw std::invalid_argument("unknown controller '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// PolylinePath

PolylinePath::PolylinePath(std::span<const Pose2> poses) : poses_(poses.begin(), poses.end()) {
  s_.reserve(poses_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < poses_.size(); ++i) {
    if (i > 0) acc += (poses_[i].translation() - poses_[i - 1].translation()).norm();
    s_.push_back(acc);
  }
}

namespace {

// Index of the segment [i, i+1] containing arc length s.
std::size_t segment_at(const std::vector<double>& s, double t) {
  if (s.size() < 2) return 0;
  const auto it = std::upper_bound(s.begin(), s.end(), t);
  const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - s.begin() - 1, 0));
  return std::min(i, s.size() - 2);
}

}  // namespace

Vec2 PolylinePath::point_at(double s) const {
  if (poses_.empty()) throw std::logic_error("PolylinePath: empty path");
  if (poses_.size() == 1) return poses_[0].translation();
  s = std::clamp(s, 0.0, length());
  const std::size_t i = segment_at(s_, s);
  const double len = s_[i + 1] - s_[i];
  const double a = len > 0.0 ? (s - s_[i]) / len : 0.0;
  return (1.0 - a) * poses_[i].translation() + a * poses_[i + 1].translation();
}

double PolylinePath::heading_at(double s) const {
  if (poses_.empty()) throw std::logic_error("PolylinePath: empty path");
  if (poses_.size() == 1) return poses_[0].psi;
  s = std::clamp(s, 0.0, length());
  std::size_t i = segment_at(s_, s);
  // Skip zero-length segments towards the end, then back.
  std::size_t j = i;
  while (j + 2 < s_.size() && s_[j + 1] - s_[j] <= 1e-12) ++j;
  if (s_[j + 1] - s_[j] <= 1e-12) {
    j = i;
    while (j > 0 && s_[j + 1] - s_[j] <= 1e-12) --j;
  }
  if (s_[j + 1] - s_[j] <= 1e-12) return poses_[i].psi;
  const Vec2 d = poses_[j + 1].translation() - poses_[j].translation();
  return std::atan2(d.y(), d.x());
}

double PolylinePath::project(const Vec2& p, double s_min, double s_max) const {
  if (poses_.empty()) throw std::logic_error("PolylinePath: empty path");
  if (poses_.size() == 1) return 0.0;
  s_min = std::clamp(s_min, 0.0, length());
  s_max = std::clamp(s_max, s_min, length());
  double best_s = s_min, best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = segment_at(s_, s_min); i + 1 < poses_.size() && s_[i] <= s_max; ++i) {
    const Vec2 a = poses_[i].translation(), b = poses_[i + 1].translation();
    const double len = s_[i + 1] - s_[i];
    double s = s_[i];
    if (len > 0.0) s += std::clamp((p - a).dot(b - a) / len, 0.0, len);
    s = std::clamp(s, s_min, s_max);
    const double d = (point_at(s) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_s = s;
    }
  }
  return best_s;
}

double PolylinePath::distance(const Vec2& p) const {
  if (poses_.empty()) throw std::logic_error("PolylinePath: empty path");
  if (poses_.size() == 1) return (p - poses_[0].translation()).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < poses_.size(); ++i) {
    const Vec2 a = poses_[i].translation(), b = poses_[i + 1].translation();
    const Vec2 ab = b - a;
    const double l2 = ab.squaredNorm();
    const double t = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + t * ab - p).norm());
  }
  return best;
}

// ---------------------------------------------------------------------------
// Configuration

KinematicModel ControllerConfig::robot() const {
  return KinematicModel::bicycle_with_radius(r_min, wheelbase, dt, 0.0, v_max);
}

void ControllerConfig::validate() const {
  auto fail = [](const char* key, const char* what) {
    throw ConfigError(std::string("control.") + key + ": " + what);
  };
  if (!(dt > 0.0)) fail("dt", "must be > 0");
  if (!(r_min > 0.0)) fail("r_min", "must be > 0");
  if (!(wheelbase > 0.0)) fail("wheelbase", "must be > 0");
  if (!(v_max > 0.0)) fail("v_max", "must be > 0");
  if (!(cruise_speed > 0.0 && cruise_speed <= v_max)) fail("cruise_speed", "must lie in (0, v_max]");
  if (!(stop_gain > 0.0)) fail("stop_gain", "must be > 0");
  if (!(lookahead > 0.0)) fail("lookahead", "must be > 0");
  if (!(speed_kp > 0.0)) fail("speed_kp", "must be > 0");
  if (mpc_horizon < 1) fail("mpc_horizon", "must be >= 1");
  if (mpc_max_iterations < 1) fail("mpc_max_iterations", "must be >= 1");
  if (!(mpc_q_position > 0.0) || !(mpc_q_heading >= 0.0) || !(mpc_r_speed > 0.0) ||
      !(mpc_r_steer > 0.0) || !(mpc_terminal_scale >= 0.0))
    fail("mpc_*", "weights must be positive");
  if (!(goal_tolerance > 0.0)) fail("goal_tolerance", "must be > 0");
  if (!(timeout > 0.0)) fail("timeout", "must be > 0");
  if (!(deadlock_window > 0.0) || !(deadlock_progress >= 0.0))
    fail("deadlock_window", "window must be > 0 and progress >= 0");
  if (!(replan_period >= dt)) fail("replan_period", "must be >= dt");
  if (!(robot_radius > 0.0)) fail("robot_radius", "must be > 0");
}

void bind_controller_config(ConfigSchema& s, ControllerConfig& c) {
  s.add("control.dt", &c.dt, "s");
  s.add("control.r_min", &c.r_min, "robot minimum turning radius, m");
  s.add("control.wheelbase", &c.wheelbase, "m");
  s.add("control.v_max", &c.v_max, "m/s");
  s.add("control.cruise_speed", &c.cruise_speed, "m/s");
  s.add("control.stop_gain", &c.stop_gain, "1/s");
  s.add("control.lookahead", &c.lookahead, "m, pid target distance along the reference");
  s.add("control.heading_kp", &c.heading_kp);
  s.add("control.heading_ki", &c.heading_ki);
  s.add("control.heading_kd", &c.heading_kd);
  s.add("control.speed_kp", &c.speed_kp, "1/s");
  s.add("control.mpc_horizon", &c.mpc_horizon, "steps");
  s.add("control.mpc_max_iterations", &c.mpc_max_iterations);
  s.add("control.mpc_q_position", &c.mpc_q_position);
  s.add("control.mpc_q_heading", &c.mpc_q_heading);
  s.add("control.mpc_r_speed", &c.mpc_r_speed);
  s.add("control.mpc_r_steer", &c.mpc_r_steer);
  s.add("control.mpc_terminal_scale", &c.mpc_terminal_scale);
  s.add("control.goal_tolerance", &c.goal_tolerance, "m");
  s.add("control.timeout", &c.timeout, "s simulated");
  s.add("control.deadlock_window", &c.deadlock_window, "s");
  s.add("control.deadlock_progress", &c.deadlock_progress, "m");
  s.add("control.replan_period", &c.replan_period, "s");
  s.add("control.robot_radius", &c.robot_radius, "m");
}

// ---------------------------------------------------------------------------
// Trackers

namespace {

// Shared speed profile: cruise, slowing down linearly over the last meters.
double target_speed(const ControllerConfig& c, double remaining) {
  return std::clamp(c.stop_gain * remaining, 0.0, c.cruise_speed);
}

// Progress along the reference is searched in a window ahead of the last
// projection so that self-approaching paths do not make it jump.
constexpr double kProjectionWindow = 2.0;

class PidTracker final : public Tracker {
 public:
  explicit PidTracker(const ControllerConfig& c) : c_(c), model_(c.robot()) {}

  void set_reference(const PolylinePath& path) override {
    path_ = path;
    s_ = 0.0;
    integral_ = 0.0;
    has_prev_ = false;
  }

  Control2 control(const Pose2& x, double v_prev) override {
    if (path_.empty()) return {0.0, 0.0};
    const Vec2 p = x.translation();
    s_ = path_.project(p, s_, s_ + kProjectionWindow);
    // Off-path robots keep moving until they are close to the end point.
    const double remaining =
        std::max(path_.length() - s_, (path_.point_at(path_.length()) - p).norm());
    const Vec2 target = path_.point_at(s_ + c_.lookahead);
    const Vec2 d = target - p;
    const double e = d.norm() > 1e-9 ? wrap_angle(std::atan2(d.y(), d.x()) - x.psi) : 0.0;
    integral_ += e * c_.dt;
    const double de = has_prev_ ? wrap_angle(e - prev_e_) / c_.dt : 0.0;
    prev_e_ = e;
    has_prev_ = true;
    const double delta = c_.heading_kp * e + c_.heading_ki * integral_ + c_.heading_kd * de;
    const double v = v_prev + c_.speed_kp * c_.dt * (target_speed(c_, remaining) - v_prev);
    return model_.bounds.clamp({v, delta});
  }

 private:
  ControllerConfig c_;
  KinematicModel model_;
  PolylinePath path_;
  double s_ = 0.0;
  double integral_ = 0.0;
  double prev_e_ = 0.0;
  bool has_prev_ = false;
};

class MpcTracker final : public Tracker {
 public:
  explicit MpcTracker(const ControllerConfig& c) : c_(c), model_(c.robot()) {
    weights_.Q = Vec3(c.mpc_q_position, c.mpc_q_position, c.mpc_q_heading).asDiagonal();
    weights_.R = Vec2(c.mpc_r_speed, c.mpc_r_steer).asDiagonal();
    weights_.Q_terminal = c.mpc_terminal_scale * weights_.Q;
    options_.max_iterations = c.mpc_max_iterations;
  }

  void set_reference(const PolylinePath& path) override {
    path_ = path;
    s_ = 0.0;
  }

  Control2 control(const Pose2& x, double v_prev) override {
    (void)v_prev;
    if (path_.empty()) return {0.0, 0.0};
    s_ = path_.project(x.translation(), s_, s_ + kProjectionWindow);
    // Reference window in the body frame, advanced along the shared speed
    // profile from the nearest point.
    const int H = c_.mpc_horizon;
    std::vector<Pose2> window;
    window.reserve(static_cast<std::size_t>(H) + 1);
    const Pose2 inv = inverse(x);
    double s = s_;
    for (int t = 0; t <= H; ++t) {
      const Vec2 q = path_.point_at(s);
      window.push_back(compose(inv, Pose2(q.x(), q.y(), path_.heading_at(s))));
      s = std::min(path_.length(), s + c_.dt * target_speed(c_, path_.length() - s));
    }
    // The first window pose is the robot itself; its error does not enter.
    window[0] = Pose2();
    MpcProblem problem = MpcProblem::tracking(model_, window, weights_);
    std::vector<Vec2> warm;
    if (static_cast<int>(previous_.size()) == H) {
      warm.assign(previous_.begin() + 1, previous_.end());
      warm.push_back(previous_.back());
    }
    const MpcSolution sol = solve(problem, options_, warm);
    previous_ = sol.controls;
    const Trajectory plan{sol.poses(), sol.control_list()};
    audit_.max_curvature = std::max(audit_.max_curvature, max_step_curvature(plan.states));
    audit_.max_defect = std::max(audit_.max_defect, max_rollout_defect(model_, plan));
    return model_.bounds.clamp(Control2::from_vector(sol.controls.front()));
  }

  Audit audit() const override { return audit_; }

 private:
  ControllerConfig c_;
  KinematicModel model_;
  MpcWeights weights_;
  SolverOptions options_;
  PolylinePath path_;
  double s_ = 0.0;
  std::vector<Vec2> previous_;
  Audit audit_;
};

}  // namespace

std::unique_ptr<Tracker> make_tracker(ControllerKind kind, const ControllerConfig& config) {
  config.validate();
  if (kind == ControllerKind::kPid) return std::make_unique<PidTracker>(config);
  return std::make_unique<MpcTracker>(config);
}

double ExecutionResult::mean_error() const {
  if (errors.empty()) return 0.0;
  double sum = 0.0;
  for (double e : errors) sum += e;
  return sum / static_cast<double>(errors.size());
}

// ---------------------------------------------------------------------------
// Simulation loop

namespace {

struct LoopHooks {
  // Called before every step; may replace the tracker's reference.
  std::function<void(const Pose2&, int step)> before_step;
  Vec2 goal;
  // Reported when net progress stalls over the deadlock window.
  Outcome stall = Outcome::kDeadlock;
};

ExecutionResult simulate(Tracker& tracker, const Pose2& start, const ControllerConfig& c,
                         const OccupancyGrid* grid, const PolylinePath* fixed_path,
                         const LoopHooks& hooks, const PolylinePath** current_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const KinematicModel model = c.robot();
  ExecutionResult r;
  r.executed.states.push_back(start);
  const int max_steps = static_cast<int>(std::ceil(c.timeout / c.dt - 1e-9));
  const int window = std::max(1, static_cast<int>(std::lround(c.deadlock_window / c.dt)));
  auto done = [&](Outcome o) {
    r.outcome = o;
    r.solver_audit = tracker.audit();
    r.sim_time = static_cast<double>(r.steps()) * c.dt;
    r.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
  };

  if ((start.translation() - hooks.goal).norm() <= c.goal_tolerance) return done(Outcome::kReached);
  if (grid && in_collision(*grid, start, c.robot_radius)) return done(Outcome::kCollision);

  Pose2 x = start;
  double v = 0.0;
  for (int step = 0; step < max_steps; ++step) {
    if (hooks.before_step) hooks.before_step(x, step);
    Control2 u;
    try {
      u = tracker.control(x, v);
    } catch (const Error&) {
      return done(Outcome::kInfeasible);
    }
    x = kinplan::step(model, x, u);
    v = u.v;
    r.executed.controls.push_back(u);
    r.executed.states.push_back(x);
    const PolylinePath* path = fixed_path ? fixed_path : *current_path;
    r.errors.push_back(path && !path->empty() ? path->distance(x.translation()) : 0.0);

    if (grid && in_collision(*grid, x, c.robot_radius)) return done(Outcome::kCollision);
    if ((x.translation() - hooks.goal).norm() <= c.goal_tolerance) return done(Outcome::kReached);
    const int n = static_cast<int>(r.executed.states.size()) - 1;
    if (n >= window) {
      const Vec2 before = r.executed.states[static_cast<std::size_t>(n - window)].translation();
      if ((x.translation() - before).norm() < c.deadlock_progress) return done(hooks.stall);
    }
  }
  return done(Outcome::kTimeout);
}

}  // namespace

ExecutionResult track(ControllerKind kind, std::span<const Pose2> reference,
                      const ControllerConfig& config, const OccupancyGrid* grid,
                      std::optional<Pose2> start) {
  if (reference.empty()) throw std::invalid_argument("track: empty reference");
  auto tracker = make_tracker(kind, config);
  const PolylinePath path(reference);
  tracker->set_reference(path);
  LoopHooks hooks;
  hooks.goal = reference.back().translation();
  // Without replanning, a stall means the reference cannot be executed.
  hooks.stall = Outcome::kInfeasible;
  ExecutionResult r =
      simulate(*tracker, start.value_or(reference.front()), config, grid, &path, hooks, nullptr);
  r.plans.emplace_back(reference.begin(), reference.end());
  return r;
}

ExecutionResult track_pid(std::span<const Pose2> reference, const ControllerConfig& config,
                          const OccupancyGrid* grid) {
  return track(ControllerKind::kPid, reference, config, grid);
}

ExecutionResult track_mpc(std::span<const Pose2> reference, const ControllerConfig& config,
                          const OccupancyGrid* grid) {
  return track(ControllerKind::kMpc, reference, config, grid);
}

LocalPlanner network_planner(const PlannerParams& params, int horizon) {
  return [params, horizon](const RangeScan& scan, const Vec2& goal_body) -> std::vector<Pose2> {
    const PlannerOutput out = forward(params, scan, goal_body);
    try {
      return interpolate(out.waypoints, horizon).states;
    } catch (const DegenerateWaypoints&) {
      return {};
    }
  };
}

ExecutionResult navigate(const LocalPlanner& planner, const Scenario& scenario,
                         ControllerKind kind, const ControllerConfig& config,
                         const SensorParams& sensor) {
  if (!scenario.grid) throw std::invalid_argument("navigate: scenario without grid");
  auto tracker = make_tracker(kind, config);
  const int period = std::max(1, static_cast<int>(std::lround(config.replan_period / config.dt)));
  PolylinePath current;
  const PolylinePath* current_ptr = &current;
  std::vector<std::vector<Pose2>> plans;
  LoopHooks hooks;
  hooks.goal = scenario.goal;
  hooks.before_step = [&](const Pose2& x, int step) {
    if (step % period != 0) return;
    const RangeScan scan = raycast(*scenario.grid, x, sensor);
    const std::vector<Pose2> body = planner(scan, x.inverse_transform(scenario.goal));
    std::vector<Pose2> world = body.empty() ? std::vector<Pose2>{}
                                            : PipelineResult::to_world(x, body);
    current = PolylinePath(world);
    tracker->set_reference(current);
    plans.push_back(std::move(world));
  };
  ExecutionResult r =
      simulate(*tracker, scenario.start, config, scenario.grid.get(), nullptr, hooks, &current_ptr);
  r.plans = std::move(plans);
  return r;
}

ExecutionResult navigate(const PlannerParams& params, const Scenario& scenario,
                         ControllerKind kind, const ControllerConfig& config,
                         const PipelineConfig& pipeline) {
  return navigate(network_planner(params, pipeline.horizon), scenario, kind, config,
                  pipeline.sensor);
}

// ---------------------------------------------------------------------------
// Traces

void write_trace(std::ostream& os, const ExecutionResult& r, double dt) {
  os << "t,x,y,psi,v,delta,error\n";
  os.precision(10);
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    const Pose2& x = r.executed.states[i + 1];
    const Control2& u = r.executed.controls[i];
    os << static_cast<double>(i + 1) * dt << ',' << x.x << ',' << x.y << ',' << x.psi << ','
       << u.v << ',' << u.u << ',' << r.errors[i] << '\n';
  }
}

std::vector<TraceRow> read_trace(std::istream& is) {
  std::vector<TraceRow> rows;
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,x,y,psi,v,delta,error", 0) != 0)
    throw FormatError("trace: missing header");
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TraceRow r;
    char c1, c2, c3, c4, c5, c6;
    ls >> r.t >> c1 >> r.x >> c2 >> r.y >> c3 >> r.psi >> c4 >> r.v >> c5 >> r.delta >> c6 >>
        r.error;
    if (!ls || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || c5 != ',' || c6 != ',')
      throw FormatError("trace: malformed line " + std::to_string(n));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace kinplan

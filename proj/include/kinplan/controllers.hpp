#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinplan/config.hpp"
#include "kinplan/dmpc.hpp"
#include "kinplan/envsim.hpp"
#include "kinplan/kinematics.hpp"
#include "kinplan/nnplanner.hpp"
#include "kinplan/pipeline.hpp"

namespace kinplan {

enum class Outcome { kReached, kCollision, kDeadlock, kTimeout, kInfeasible };
std::string_view outcome_name(Outcome o);

enum class ControllerKind { kPid, kMpc };
std::string_view controller_name(ControllerKind k);
/// Throws std::invalid_argument for anything but "pid" and "mpc".
ControllerKind parse_controller(std::string_view name);

/// Arc-length parameterized polyline through reference positions. Headings
/// follow the containing segment; zero-length segments keep the stored pose
/// heading.
class PolylinePath {
 public:
  PolylinePath() = default;
  explicit PolylinePath(std::span<const Pose2> poses);

  double length() const { return s_.empty() ? 0.0 : s_.back(); }
  bool empty() const { return poses_.empty(); }
  const std::vector<Pose2>& poses() const { return poses_; }

  Vec2 point_at(double s) const;
  double heading_at(double s) const;
  /// Arc length of the closest point with s in [s_min, s_max].
  double project(const Vec2& p, double s_min = 0.0,
                 double s_max = std::numeric_limits<double>::infinity()) const;
  /// Distance from p to the closest point of the whole path.
  double distance(const Vec2& p) const;

 private:
  std::vector<Pose2> poses_;
  std::vector<double> s_;  // cumulative arc length at each pose
};

struct ControllerConfig {
  double dt = 0.1;               // simulation and control period, s
  double r_min = 1.48;           // robot turning radius, m
  double wheelbase = 0.5;
  double v_max = 1.5;
  double cruise_speed = 1.0;     // m/s
  double stop_gain = 1.0;        // target speed <= stop_gain * remaining length
  double lookahead = 0.5;        // m
  double heading_kp = 2.0;
  double heading_ki = 0.0;
  double heading_kd = 0.2;
  double speed_kp = 1.0;         // 1/s, first-order speed loop
  int mpc_horizon = 10;
  int mpc_max_iterations = 30;
  double mpc_q_position = 1.0;
  double mpc_q_heading = 0.25;
  double mpc_r_speed = 0.01;
  double mpc_r_steer = 0.01;
  double mpc_terminal_scale = 10.0;
  double goal_tolerance = 0.3;   // m
  double timeout = 60.0;         // s simulated
  double deadlock_window = 5.0;  // s
  double deadlock_progress = 0.1;  // m of net progress within the window
  double replan_period = 0.4;    // s, navigation only
  double robot_radius = 0.35;

  KinematicModel robot() const;
  void validate() const;
};

void bind_controller_config(ConfigSchema& schema, ControllerConfig& c);

/// Stepping controller. The reference is given in the world frame.
class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual void set_reference(const PolylinePath& path) = 0;
  /// Control for the next step from the current pose and the speed applied
  /// in the previous step. Throws on solver failure.
  virtual Control2 control(const Pose2& x, double v_prev) = 0;

  /// Worst curvature and rollout defect over the internal solutions so far;
  /// zero for trackers without an internal model.
  struct Audit {
    double max_curvature = 0.0;
    double max_defect = 0.0;
  };
  virtual Audit audit() const { return {}; }
};

std::unique_ptr<Tracker> make_tracker(ControllerKind kind, const ControllerConfig& config);

struct ExecutionResult {
  Trajectory executed;          // states: steps + 1, controls: steps
  std::vector<double> errors;   // one per executed step
  Outcome outcome = Outcome::kTimeout;
  double sim_time = 0.0;        // s
  double wall_ms = 0.0;
  std::vector<std::vector<Pose2>> plans;  // world-frame references, in order
  Tracker::Audit solver_audit;  // internal MPC solutions of the tracker

  /// Mean over executed steps of the nearest-point distance to the reference.
  double mean_error() const;
  std::size_t steps() const { return errors.size(); }
};

/// Tracks a fixed world-frame reference, starting at `start` or, when unset,
/// at its first pose. The robot stops at the reference end; `goal` tolerance
/// applies to that end. A stall (no net progress over the deadlock window) is
/// reported as infeasible, since nothing replans. `grid` may be null for
/// obstacle-free runs.
ExecutionResult track(ControllerKind kind, std::span<const Pose2> reference,
                      const ControllerConfig& config, const OccupancyGrid* grid = nullptr,
                      std::optional<Pose2> start = std::nullopt);
ExecutionResult track_pid(std::span<const Pose2> reference, const ControllerConfig& config,
                          const OccupancyGrid* grid = nullptr);
ExecutionResult track_mpc(std::span<const Pose2> reference, const ControllerConfig& config,
                          const OccupancyGrid* grid = nullptr);

/// Local planner used in the closed loop: body-frame reference poses from a
/// scan and a body-frame goal. An empty result means "stay".
using LocalPlanner = std::function<std::vector<Pose2>(const RangeScan&, const Vec2&)>;

/// Network planner: forward pass and interpolation over `horizon` steps;
/// degenerate outputs become an empty plan.
LocalPlanner network_planner(const PlannerParams& params, int horizon);

/// Closed-loop navigation: replans every replan_period from a fresh scan
/// and hands the reference to the tracker until an outcome is reached.
ExecutionResult navigate(const LocalPlanner& planner, const Scenario& scenario,
                         ControllerKind kind, const ControllerConfig& config,
                         const SensorParams& sensor = {});
ExecutionResult navigate(const PlannerParams& params, const Scenario& scenario,
                         ControllerKind kind, const ControllerConfig& config,
                         const PipelineConfig& pipeline = {});

/// Trace CSV: t, x, y, psi, v, delta, error; one row per executed step with
/// the pose reached, the control applied and the tracking error there.
void write_trace(std::ostream& os, const ExecutionResult& r, double dt);
struct TraceRow {
  double t = 0.0, x = 0.0, y = 0.0, psi = 0.0, v = 0.0, delta = 0.0, error = 0.0;
};
std::vector<TraceRow> read_trace(std::istream& is);

}  // namespace kinplan

#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "kinplan/se2.hpp"

namespace kinplan {

using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

/// Forward speed and a turn command: turn rate (rad/s) for Dubins/unicycle,
/// front-wheel steering angle (rad) for the bicycle model.
struct Control2 {
  double v = 0.0;
  double u = 0.0;

  Vec2 vector() const { return {v, u}; }
  static Control2 from_vector(const Vec2& c) { return {c.x(), c.y()}; }
};

struct ControlBounds {
  double v_min = 0.0;
  double v_max = 1.5;
  double u_max = 1.0;

  Vec2 lower() const { return {v_min, -u_max}; }
  Vec2 upper() const { return {v_max, u_max}; }
  Control2 clamp(const Control2& c) const;
  bool contains(const Control2& c, double tol = 0.0) const;
};

enum class ModelKind { kDubins, kBicycle, kUnicycle };

/// Discrete-time kinematic model stepped with the exact SE(2) exponential.
struct KinematicModel {
  ModelKind kind = ModelKind::kDubins;
  double dt = 0.1;
  ControlBounds bounds{};
  double wheelbase = 0.5;  // bicycle only

  static KinematicModel dubins(double dt = 0.1, ControlBounds b = {});
  /// Bicycle with steering limit chosen so that L / tan(delta_max) = r_min.
  static KinematicModel bicycle_with_radius(double r_min, double wheelbase = 0.5,
                                            double dt = 0.1, double v_min = 0.0,
                                            double v_max = 1.5);

  /// Throws std::invalid_argument when dt, bounds or wheelbase are unusable.
  void validate() const;
  /// Minimum turning radius: L / tan(delta_max) for the bicycle, v_max / u_max
  /// for Dubins and unicycle at full speed.
  double min_turning_radius() const;
  /// Turn rate produced by a control.
  double turn_rate(const Control2& c) const;
};

/// First and second derivatives of one step. hessians[i] is the Hessian of
/// output component i with respect to the stacked input (x, y, psi, v, u).
struct StepDerivatives {
  Mat3 A;
  Mat32 B;
  std::array<Mat5, 3> hessians;
};

Pose2 step(const KinematicModel& model, const Pose2& x, const Control2& u);

/// Analytic A = d step / d x and B = d step / d u.
std::pair<Mat3, Mat32> jacobians(const KinematicModel& model, const Pose2& x,
                                 const Control2& u);

StepDerivatives step_derivatives(const KinematicModel& model, const Pose2& x,
                                 const Control2& u);

struct Trajectory {
  std::vector<Pose2> states;
  std::vector<Control2> controls;  // empty or states.size() - 1

  std::size_t size() const { return states.size(); }
};

Trajectory rollout(const KinematicModel& model, const Pose2& x0,
                   std::span<const Control2> controls);

/// Largest |step(x_t, u_t) - x_{t+1}| over the trajectory (heading wrapped).
double max_rollout_defect(const KinematicModel& model, const Trajectory& traj);

/// Largest per-step curvature |dpsi| / |dp| over steps that move more than
/// min_step meters.
double max_step_curvature(std::span<const Pose2> states, double min_step = 1e-9);

}  // namespace kinplan

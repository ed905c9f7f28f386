#include "kinplan/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kinplan {

Control2 ControlBounds::clamp(const Control2& c) const {
  return {std::clamp(c.v, v_min, v_max), std::clamp(c.u, -u_max, u_max)};
}

bool ControlBounds::contains(const Control2& c, double tol) const {
  return c.v >= v_min - tol && c.v <= v_max + tol && std::abs(c.u) <= u_max + tol;
}

KinematicModel KinematicModel::dubins(double dt, ControlBounds b) {
  KinematicModel m;
  m.kind = ModelKind::kDubins;
  m.dt = dt;
  m.bounds = b;
  return m;
}

KinematicModel KinematicModel::bicycle_with_radius(double r_min, double wheelbase,
                                                   double dt, double v_min,
                                                   double v_max) {
  KinematicModel m;
  m.kind = ModelKind::kBicycle;
  m.dt = dt;
  m.wheelbase = wheelbase;
  m.bounds = {v_min, v_max, std::atan(wheelbase / r_min)};
  return m;
}

void KinematicModel::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("kinematic model: dt must be positive");
  if (!(bounds.v_max >= bounds.v_min) || !(bounds.u_max >= 0.0))
    throw std::invalid_argument("kinematic model: empty control bounds");
  if (kind == ModelKind::kBicycle) {
    if (!(wheelbase > 0.0))
      throw std::invalid_argument("kinematic model: wheelbase must be positive");
    if (!(bounds.u_max > 0.0) || !(bounds.u_max < 0.5 * 3.141592653589793))
      throw std::invalid_argument("kinematic model: steering limit must be in (0, pi/2)");
  }
}

double KinematicModel::min_turning_radius() const {
  if (kind == ModelKind::kBicycle) return wheelbase / std::tan(bounds.u_max);
  return bounds.v_max / bounds.u_max;
}

double KinematicModel::turn_rate(const Control2& c) const {
  if (kind == ModelKind::kBicycle) return c.v * std::tan(c.u) / wheelbase;
  return c.u;
}

namespace {

// Arc length and heading change of one step together with their derivatives
// with respect to (v, u).
struct StepIncrement {
  double s, w;
  Mat2 jac;                    // rows: s, w; cols: v, u
  Mat2 w_hess = Mat2::Zero();  // Hessian of w in (v, u); s is linear
};

StepIncrement increment(const KinematicModel& m, const Control2& c) {
  StepIncrement inc{};
  inc.s = c.v * m.dt;
  inc.jac.setZero();
  inc.jac(0, 0) = m.dt;
  if (m.kind == ModelKind::kBicycle) {
    const double t = std::tan(c.u);
    const double sec2 = 1.0 + t * t;
    const double k = m.dt / m.wheelbase;
    inc.w = k * c.v * t;
    inc.jac(1, 0) = k * t;
    inc.jac(1, 1) = k * c.v * sec2;
    inc.w_hess(0, 1) = inc.w_hess(1, 0) = k * sec2;
    inc.w_hess(1, 1) = k * c.v * 2.0 * sec2 * t;
  } else {
    inc.w = c.u * m.dt;
    inc.jac(1, 1) = m.dt;
  }
  return inc;
}

}  // namespace

Pose2 step(const KinematicModel& model, const Pose2& x, const Control2& u) {
  const auto inc = increment(model, u);
  return compose(x, exp(Twist2{inc.s, 0.0, inc.w}));
}

std::pair<Mat3, Mat32> jacobians(const KinematicModel& model, const Pose2& x,
                                 const Control2& u) {
  const auto d = step_derivatives(model, x, u);
  return {d.A, d.B};
}

StepDerivatives step_derivatives(const KinematicModel& model, const Pose2& x,
                                 const Control2& u) {
  // x' = x + s P(psi, w), y' = y + s S(psi, w), psi' = psi + w with
  // P = a cos(psi) - b sin(psi), S = a sin(psi) + b cos(psi).
  const auto inc = increment(model, u);
  const auto k = detail::arc_coefficients(inc.w);
  const double c = std::cos(x.psi), sn = std::sin(x.psi);
  const double s = inc.s;

  const double P = k.a * c - k.b * sn, S = k.a * sn + k.b * c;
  const double Pw = k.da * c - k.db * sn, Sw = k.da * sn + k.db * c;
  const double Pww = k.dda * c - k.ddb * sn, Sww = k.dda * sn + k.ddb * c;

  // Derivatives in the intermediate variables z = (x, y, psi, s, w).
  Eigen::Matrix<double, 3, 5> Jz = Eigen::Matrix<double, 3, 5>::Zero();
  Jz(0, 0) = 1.0;
  Jz(0, 2) = -s * S;
  Jz(0, 3) = P;
  Jz(0, 4) = s * Pw;
  Jz(1, 1) = 1.0;
  Jz(1, 2) = s * P;
  Jz(1, 3) = S;
  Jz(1, 4) = s * Sw;
  Jz(2, 2) = 1.0;
  Jz(2, 4) = 1.0;

  std::array<Mat5, 3> Hz;
  for (auto& h : Hz) h.setZero();
  // indices: psi=2, s=3, w=4
  Hz[0](2, 2) = -s * P;
  Hz[0](2, 3) = Hz[0](3, 2) = -S;
  Hz[0](2, 4) = Hz[0](4, 2) = -s * Sw;
  Hz[0](3, 4) = Hz[0](4, 3) = Pw;
  Hz[0](4, 4) = s * Pww;
  Hz[1](2, 2) = -s * S;
  Hz[1](2, 3) = Hz[1](3, 2) = P;
  Hz[1](2, 4) = Hz[1](4, 2) = s * Pw;
  Hz[1](3, 4) = Hz[1](4, 3) = Sw;
  Hz[1](4, 4) = s * Sww;

  // Chain rule from z to the stacked input q = (x, y, psi, v, u).
  Mat5 G = Mat5::Zero();
  G.topLeftCorner<3, 3>().setIdentity();
  G.bottomRightCorner<2, 2>() = inc.jac;

  StepDerivatives out;
  const Eigen::Matrix<double, 3, 5> Jq = Jz * G;
  out.A = Jq.leftCols<3>();
  out.B = Jq.rightCols<2>();
  for (int i = 0; i < 3; ++i) {
    out.hessians[i] = G.transpose() * Hz[i] * G;
    // Only w has curvature in (v, u).
    out.hessians[i].bottomRightCorner<2, 2>() += Jz(i, 4) * inc.w_hess;
  }
  return out;
}

Trajectory rollout(const KinematicModel& model, const Pose2& x0,
                   std::span<const Control2> controls) {
  Trajectory traj;
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(x0);
  traj.controls.assign(controls.begin(), controls.end());
  for (const auto& u : controls) traj.states.push_back(step(model, traj.states.back(), u));
  return traj;
}

double max_rollout_defect(const KinematicModel& model, const Trajectory& traj) {
  double worst = 0.0;
  for (std::size_t t = 0; t < traj.controls.size(); ++t) {
    const Pose2 next = step(model, traj.states[t], traj.controls[t]);
    worst = std::max(worst, difference(next, traj.states[t + 1]).cwiseAbs().maxCoeff());
  }
  return worst;
}

double max_step_curvature(std::span<const Pose2> states, double min_step) {
  double worst = 0.0;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    // The relative twist of one exact-arc step is (arc length, 0, dpsi).
    const Twist2 tw = log(compose(inverse(states[t]), states[t + 1]));
    const double len = std::hypot(tw.vx, tw.vy);
    if (len <= min_step) continue;
    worst = std::max(worst, std::abs(tw.omega) / len);
  }
  return worst;
}

}  // namespace kinplan

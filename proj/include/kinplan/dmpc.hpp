#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "kinplan/kinematics.hpp"
#include "kinplan/se2.hpp"

namespace kinplan {

/// Default tracking weights: heading weighted below position, dominant
/// terminal term.
struct MpcWeights {
  Mat3 Q = Vec3(1.0, 1.0, 0.25).asDiagonal();
  Mat2 R = Vec2(0.1, 0.1).asDiagonal();
  Mat3 Q_terminal = 10.0 * Mat3(Vec3(1.0, 1.0, 0.25).asDiagonal());
};

/// Affine dynamics x' = A x + B u + c. Used for frozen linearizations.
struct LinearDynamics {
  Mat3 A = Mat3::Identity();
  Mat32 B = Mat32::Zero();
  Vec3 c = Vec3::Zero();
};

enum class ErrorMetric {
  kLieLog,     // e = log(ref^-1 * x)
  kEuclidean,  // e = x - ref, no wrapping
};

/// Tracking problem
///   min_u sum_{t<T} e_t' Q_t e_t + u_t' R_t u_t + e_T' Q_T e_T
///   s.t.  x_{t+1} = F(x_t, u_t), x_0 given, u_t in the control box.
struct MpcProblem {
  KinematicModel model{};
  std::optional<LinearDynamics> linear;
  ControlBounds bounds{};
  std::vector<Mat3> Q;  // size T
  std::vector<Mat2> R;  // size T
  Mat3 Q_terminal = Mat3::Identity();
  std::vector<Vec3> reference;  // size T + 1
  Vec3 x0 = Vec3::Zero();
  ErrorMetric metric = ErrorMetric::kLieLog;

  int horizon() const { return static_cast<int>(Q.size()); }

  /// Throws std::invalid_argument on size mismatches, non-PSD Q, non-PD R or
  /// an empty control box.
  void validate() const;

  static MpcProblem tracking(const KinematicModel& model, std::span<const Pose2> reference,
                             const MpcWeights& weights = {});

  Vec3 step(const Vec3& x, const Vec2& u) const;
};

/// Box with no effective limit, for unconstrained problems.
ControlBounds unbounded_controls();

struct SolverOptions {
  int max_iterations = 100;
  double rel_tol = 1e-8;
  double grad_tol = 1e-8;
  double reg_init = 1e-6;
  double reg_factor = 10.0;
  double reg_max = 1e4;
  int max_line_search = 14;
  /// Switch from Gauss-Newton to exact second-order expansions once the
  /// relative decrease drops below this.
  double polish_threshold = 1e-4;
};

struct MpcSolution {
  std::vector<Vec3> states;  // T + 1
  std::vector<Vec2> controls;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  // projected, infinity norm
  std::vector<std::array<bool, 2>> active_set;
  std::vector<double> objective_history;

  std::vector<Pose2> poses() const;
  std::vector<Control2> control_list() const;
};

/// Box-constrained iLQR with Levenberg regularization and backtracking line
/// search. Never throws for lack of descent: returns the best iterate with
/// converged = false. Throws IllConditioned when the Riccati recursion cannot
/// be made positive definite below the regularization cap.
MpcSolution solve(const MpcProblem& problem, const SolverOptions& options = {},
                  std::span<const Vec2> warm_start = {});

struct MpcGradient {
  std::vector<Vec3> reference;  // dL / d reference, T + 1
  bool approximate = false;     // solution was not converged
};

/// Implicit differentiation at the optimum: maps dL/d states to dL/d reference
/// through one auxiliary LQR built from the exact second-order KKT
/// expansion. Clamped controls are held fixed. Throws SingularFeedback when
/// the auxiliary recursion cannot be regularized below the cap.
MpcGradient backward(const MpcProblem& problem, const MpcSolution& solution,
                     std::span<const Vec3> grad_states);

/// Exact objective for given states and controls.
double tracking_objective(const MpcProblem& problem, std::span<const Vec3> states,
                          std::span<const Vec2> controls);

/// Error state e(x, ref) under the problem metric.
Vec3 tracking_error(const MpcProblem& problem, const Vec3& x, const Vec3& ref);

/// Error state with Jacobians, and optionally second derivatives with respect
/// to the stacked (x, ref) 6-vector.
struct ErrorDerivatives {
  Vec3 e;
  Mat3 J_x;
  Mat3 J_ref;
  std::array<Eigen::Matrix<double, 6, 6>, 3> hessians;
};
ErrorDerivatives lie_error_derivatives(const Vec3& x, const Vec3& ref, bool second_order);

}  // namespace kinplan

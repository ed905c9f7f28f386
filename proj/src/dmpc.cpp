#include "kinplan/dmpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "kinplan/errors.hpp"

namespace kinplan {

namespace {

using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

constexpr double kBoundTol = 1e-10;
constexpr double kRoundOff = 1e-14;

bool is_psd(const Eigen::MatrixXd& m, bool strict) {
  if ((m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm())) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double lo = es.eigenvalues().minCoeff();
  return strict ? lo > 0.0 : lo >= -1e-12;
}

// Per-step first/second order data at the current iterate.
struct StageData {
  Vec3 lx;
  Mat3 lxx;
  Mat3 lxr;  // d^2 l / dx dref
  Vec2 lu;
  Mat2 luu;
  Mat3 A;
  Mat32 B;
  std::array<Mat5, 3> H;  // dynamics Hessians in (x, u)
};

Vec3 state_difference(const MpcProblem& p, const Vec3& a, const Vec3& b) {
  Vec3 d = a - b;
  if (!p.linear) d.z() = wrap_angle(d.z());
  return d;
}

const Mat3& stage_weight(const MpcProblem& p, int t) {
  return t < p.horizon() ? p.Q[static_cast<std::size_t>(t)] : p.Q_terminal;
}

void cost_expansion(const MpcProblem& p, int t, const Vec3& x, bool second_order,
                    bool want_cross, StageData& s) {
  const Mat3& Q = stage_weight(p, t);
  const Vec3& r = p.reference[static_cast<std::size_t>(t)];
  if (p.metric == ErrorMetric::kEuclidean) {
    const Vec3 e = x - r;
    s.lx = 2.0 * Q * e;
    s.lxx = 2.0 * Q;
    s.lxr = -2.0 * Q;
    return;
  }
  const auto d = lie_error_derivatives(x, r, second_order || want_cross);
  const Vec3 Qe = Q * d.e;
  s.lx = 2.0 * d.J_x.transpose() * Qe;
  s.lxx = 2.0 * d.J_x.transpose() * Q * d.J_x;
  if (second_order)
    for (int i = 0; i < 3; ++i) s.lxx += 2.0 * Qe(i) * d.hessians[i].topLeftCorner<3, 3>();
  if (want_cross) {
    s.lxr = 2.0 * d.J_x.transpose() * Q * d.J_ref;
    for (int i = 0; i < 3; ++i) s.lxr += 2.0 * Qe(i) * d.hessians[i].topRightCorner<3, 3>();
  }
}

void dynamics_expansion(const MpcProblem& p, const Vec3& x, const Vec2& u, bool second_order,
                        StageData& s) {
  if (p.linear) {
    s.A = p.linear->A;
    s.B = p.linear->B;
    for (auto& h : s.H) h.setZero();
    return;
  }
  const auto d = step_derivatives(p.model, Pose2(x.x(), x.y(), x.z()), Control2{u.x(), u.y()});
  s.A = d.A;
  s.B = d.B;
  if (second_order)
    s.H = d.hessians;
  else
    for (auto& h : s.H) h.setZero();
}

// Exact minimizer of 0.5 x'Hx + g'x over a 2D box by enumerating faces.
// H must be positive definite. fixed[i] reports components held at a bound.
Vec2 box_qp2(const Mat2& H, const Vec2& g, const Vec2& lo, const Vec2& hi,
             std::array<bool, 2>& fixed) {
  Vec2 best = Vec2::Zero();
  double best_val = std::numeric_limits<double>::infinity();
  std::array<bool, 2> best_fixed{false, false};
  auto feasible = [&](const Vec2& x) {
    for (int i = 0; i < 2; ++i) {
      const double tol = 1e-12 * (1.0 + std::abs(x(i)));
      if (x(i) < lo(i) - tol || x(i) > hi(i) + tol) return false;
    }
    return true;
  };
  auto consider = [&](const Vec2& x, std::array<bool, 2> f) {
    if (!feasible(x)) return;
    const double val = 0.5 * x.dot(H * x) + g.dot(x);
    if (val < best_val - 1e-15 * (1.0 + std::abs(val))) {
      best_val = val;
      best = x.cwiseMax(lo).cwiseMin(hi);
      best_fixed = f;
    }
  };
  consider(H.llt().solve(-g), {false, false});
  for (int c = 0; c < 2; ++c) {
    const int f = 1 - c;
    for (double bound : {lo(c), hi(c)}) {
      if (!std::isfinite(bound)) continue;
      Vec2 x;
      x(c) = bound;
      x(f) = -(g(f) + H(f, c) * bound) / H(f, f);
      std::array<bool, 2> fx{};
      fx[static_cast<std::size_t>(c)] = true;
      consider(x, fx);
    }
  }
  for (double b0 : {lo(0), hi(0)})
    for (double b1 : {lo(1), hi(1)})
      if (std::isfinite(b0) && std::isfinite(b1)) consider(Vec2(b0, b1), {true, true});
  fixed = best_fixed;
  return best;
}

struct Policy {
  std::vector<Vec2> k;
  std::vector<Mat23> K;
  double expected = 0.0;  // predicted change for a full step
};

class Ilqr {
 public:
  Ilqr(const MpcProblem& p, const SolverOptions& o) : p_(p), o_(o), T_(p.horizon()) {
    stages_.resize(static_cast<std::size_t>(T_) + 1);
    policy_.k.assign(static_cast<std::size_t>(T_), Vec2::Zero());
    policy_.K.assign(static_cast<std::size_t>(T_), Mat23::Zero());
    lo_ = p.bounds.lower();
    hi_ = p.bounds.upper();
  }

  MpcSolution run(std::span<const Vec2> warm) {
    std::vector<Vec2> u(static_cast<std::size_t>(T_), Vec2::Zero());
    if (warm.size() == u.size())
      for (std::size_t t = 0; t < u.size(); ++t) u[t] = warm[t].cwiseMax(lo_).cwiseMin(hi_);
    std::vector<Vec3> x = roll(u);
    double J = tracking_objective(p_, x, u);

    MpcSolution sol;
    sol.objective_history.push_back(J);
    double mu = o_.reg_init;
    bool second_order = false;
    bool converged = false;
    double grad_norm = std::numeric_limits<double>::infinity();
    int iter = 0;
    std::vector<Vec3> x_new(x.size());
    std::vector<Vec2> u_new(u.size());

    for (; iter < o_.max_iterations; ++iter) {
      expand(x, u, second_order);
      grad_norm = projected_gradient_norm(u);
      if (grad_norm < o_.grad_tol) {
        converged = true;
        break;
      }
      if (!backward_pass(u, mu, second_order)) {
        if (second_order) {
          second_order = false;
          continue;
        }
        mu *= o_.reg_factor;
        if (mu > o_.reg_max)
          throw IllConditioned("iLQR: Riccati recursion not positive definite at regularization cap");
        continue;
      }
      // Backtracking line search on the true objective.
      double alpha = 1.0;
      bool accepted = false;
      double J_new = J;
      for (int ls = 0; ls < o_.max_line_search; ++ls, alpha *= 0.5) {
        forward_pass(x, u, alpha, x_new, u_new);
        J_new = tracking_objective(p_, x_new, u_new);
        if (std::isfinite(J_new) && J_new < J) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // No decrease and the model predicts none worth having: stationary
        // up to round-off.
        if (-policy_.expected <= std::max(o_.rel_tol, kRoundOff) * std::abs(J)) {
          converged = true;
          break;
        }
        if (second_order) {
          second_order = false;
          continue;
        }
        mu *= o_.reg_factor;
        if (mu > o_.reg_max) break;
        continue;
      }
      const double rel = (J - J_new) / std::max(std::abs(J), 1e-300);
      x.swap(x_new);
      u.swap(u_new);
      J = J_new;
      sol.objective_history.push_back(J);
      mu = std::max(mu / o_.reg_factor, o_.reg_init);
      if (rel < o_.polish_threshold) second_order = true;
      if (rel < o_.rel_tol && alpha == 1.0) {
        ++iter;
        expand(x, u, false);
        grad_norm = projected_gradient_norm(u);
        converged = true;
        break;
      }
    }
    if (!converged && iter >= o_.max_iterations) {
      expand(x, u, false);
      grad_norm = projected_gradient_norm(u);
      converged = grad_norm < o_.grad_tol;
    }

    sol.states = std::move(x);
    sol.controls = std::move(u);
    sol.objective = J;
    sol.converged = converged;
    sol.iterations = iter;
    sol.gradient_norm = grad_norm;
    sol.active_set.resize(sol.controls.size());
    for (std::size_t t = 0; t < sol.controls.size(); ++t)
      for (int i = 0; i < 2; ++i) {
        const double v = sol.controls[t](i);
        sol.active_set[t][static_cast<std::size_t>(i)] =
            std::abs(v - lo_(i)) <= kBoundTol || std::abs(v - hi_(i)) <= kBoundTol;
      }
    return sol;
  }

 private:
  std::vector<Vec3> roll(const std::vector<Vec2>& u) const {
    std::vector<Vec3> x(u.size() + 1);
    x[0] = p_.x0;
    for (std::size_t t = 0; t < u.size(); ++t) x[t + 1] = p_.step(x[t], u[t]);
    return x;
  }

  void expand(const std::vector<Vec3>& x, const std::vector<Vec2>& u, bool second_order) {
    for (int t = 0; t < T_; ++t) {
      auto& s = stages_[static_cast<std::size_t>(t)];
      cost_expansion(p_, t, x[static_cast<std::size_t>(t)], second_order, false, s);
      const Mat2& R = p_.R[static_cast<std::size_t>(t)];
      s.lu = 2.0 * R * u[static_cast<std::size_t>(t)];
      s.luu = 2.0 * R;
      dynamics_expansion(p_, x[static_cast<std::size_t>(t)], u[static_cast<std::size_t>(t)],
                         second_order, s);
    }
    cost_expansion(p_, T_, x.back(), second_order, false, stages_.back());
  }

  double projected_gradient_norm(const std::vector<Vec2>& u) const {
    Vec3 lambda = stages_.back().lx;
    double norm = 0.0;
    for (int t = T_ - 1; t >= 0; --t) {
      const auto& s = stages_[static_cast<std::size_t>(t)];
      const Vec2 g = s.lu + s.B.transpose() * lambda;
      const Vec2& ut = u[static_cast<std::size_t>(t)];
      for (int i = 0; i < 2; ++i) {
        const bool at_lo = ut(i) <= lo_(i) + kBoundTol && g(i) > 0.0;
        const bool at_hi = ut(i) >= hi_(i) - kBoundTol && g(i) < 0.0;
        if (!at_lo && !at_hi) norm = std::max(norm, std::abs(g(i)));
      }
      lambda = s.lx + s.A.transpose() * lambda;
    }
    return norm;
  }

  bool backward_pass(const std::vector<Vec2>& u, double mu, bool second_order) {
    Vec3 Vx = stages_.back().lx;
    Mat3 Vxx = stages_.back().lxx;
    policy_.expected = 0.0;
    for (int t = T_ - 1; t >= 0; --t) {
      const auto& s = stages_[static_cast<std::size_t>(t)];
      const Vec3 Qx = s.lx + s.A.transpose() * Vx;
      const Vec2 Qu = s.lu + s.B.transpose() * Vx;
      Mat3 Qxx = s.lxx + s.A.transpose() * Vxx * s.A;
      Mat23 Qux = s.B.transpose() * Vxx * s.A;
      Mat2 Quu = s.luu + s.B.transpose() * Vxx * s.B;
      if (second_order) {
        Mat5 Z = Vx(0) * s.H[0] + Vx(1) * s.H[1] + Vx(2) * s.H[2];
        Qxx += Z.topLeftCorner<3, 3>();
        Qux += Z.bottomLeftCorner<2, 3>();
        Quu += Z.bottomRightCorner<2, 2>();
      }
      const Mat2 Quu_reg = Quu + mu * Mat2::Identity();
      Eigen::LLT<Mat2> llt(Quu_reg);
      if (llt.info() != Eigen::Success || !Quu_reg.allFinite()) return false;

      const Vec2& ut = u[static_cast<std::size_t>(t)];
      std::array<bool, 2> fixed{};
      const Vec2 k = box_qp2(Quu_reg, Qu, lo_ - ut, hi_ - ut, fixed);
      Mat23 K = Mat23::Zero();
      if (!fixed[0] && !fixed[1]) {
        K = -llt.solve(Qux);
      } else if (!fixed[0] || !fixed[1]) {
        const int f = fixed[0] ? 1 : 0;
        K.row(f) = -Qux.row(f) / Quu_reg(f, f);
      }
      policy_.k[static_cast<std::size_t>(t)] = k;
      policy_.K[static_cast<std::size_t>(t)] = K;
      policy_.expected += k.dot(Qu) + 0.5 * k.dot(Quu * k);

      Vx = Qx + K.transpose() * Quu * k + K.transpose() * Qu + Qux.transpose() * k;
      Vxx = Qxx + K.transpose() * Quu * K + K.transpose() * Qux + Qux.transpose() * K;
      Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
      if (!Vx.allFinite() || !Vxx.allFinite()) return false;
    }
    return true;
  }

  void forward_pass(const std::vector<Vec3>& x, const std::vector<Vec2>& u, double alpha,
                    std::vector<Vec3>& x_new, std::vector<Vec2>& u_new) const {
    x_new[0] = p_.x0;
    for (std::size_t t = 0; t < u.size(); ++t) {
      const Vec3 dx = state_difference(p_, x_new[t], x[t]);
      const Vec2 un = u[t] + alpha * policy_.k[t] + policy_.K[t] * dx;
      u_new[t] = un.cwiseMax(lo_).cwiseMin(hi_);
      x_new[t + 1] = p_.step(x_new[t], u_new[t]);
    }
  }

  const MpcProblem& p_;
  const SolverOptions& o_;
  int T_;
  Vec2 lo_, hi_;
  std::vector<StageData> stages_;
  Policy policy_;
};

}  // namespace

ControlBounds unbounded_controls() {
  constexpr double kBig = std::numeric_limits<double>::infinity();
  return {-kBig, kBig, kBig};
}

void MpcProblem::validate() const {
  const int T = horizon();
  if (T < 1) throw std::invalid_argument("mpc: horizon must be at least 1");
  if (static_cast<int>(R.size()) != T)
    throw std::invalid_argument("mpc: need one R per stage");
  if (static_cast<int>(reference.size()) != T + 1)
    throw std::invalid_argument("mpc: reference length must be T + 1");
  for (const auto& q : Q)
    if (!is_psd(q, false)) throw std::invalid_argument("mpc: Q_t must be PSD");
  if (!is_psd(Q_terminal, false)) throw std::invalid_argument("mpc: Q_T must be PSD");
  for (const auto& r : R)
    if (!is_psd(r, true)) throw std::invalid_argument("mpc: R_t must be PD");
  if (!(bounds.v_max >= bounds.v_min) || !(bounds.u_max >= 0.0))
    throw std::invalid_argument("mpc: empty control box");
  if (!linear) model.validate();
}

MpcProblem MpcProblem::tracking(const KinematicModel& model, std::span<const Pose2> reference,
                                const MpcWeights& weights) {
  if (reference.size() < 2) throw std::invalid_argument("mpc: reference needs T + 1 >= 2 states");
  MpcProblem p;
  p.model = model;
  p.bounds = model.bounds;
  const std::size_t T = reference.size() - 1;
  p.Q.assign(T, weights.Q);
  p.R.assign(T, weights.R);
  p.Q_terminal = weights.Q_terminal;
  p.reference.reserve(reference.size());
  for (const auto& r : reference) p.reference.push_back(r.vector());
  return p;
}

Vec3 MpcProblem::step(const Vec3& x, const Vec2& u) const {
  if (linear) return linear->A * x + linear->B * u + linear->c;
  return kinplan::step(model, Pose2(x.x(), x.y(), x.z()), Control2{u.x(), u.y()}).vector();
}

std::vector<Pose2> MpcSolution::poses() const {
  std::vector<Pose2> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(Pose2::from_vector(s));
  return out;
}

std::vector<Control2> MpcSolution::control_list() const {
  std::vector<Control2> out;
  out.reserve(controls.size());
  for (const auto& c : controls) out.push_back(Control2::from_vector(c));
  return out;
}

ErrorDerivatives lie_error_derivatives(const Vec3& x, const Vec3& ref, bool second_order) {
  // e = (M(theta) d, theta), d = R(ref_psi)^T (p - ref_p), theta = psi - ref_psi,
  // M = [[c, theta/2], [-theta/2, c]] with c = (theta/2) cot(theta/2).
  // Variables z = (px, py, psi, rx, ry, rpsi).
  const double cr = std::cos(ref.z()), sr = std::sin(ref.z());
  Mat2 Rt;
  Rt << cr, sr, -sr, cr;
  const Vec2 d = Rt * Vec2(x.x() - ref.x(), x.y() - ref.y());
  const double theta = wrap_angle(x.z() - ref.z());
  const auto hc = detail::half_cot_coefficients(theta);
  Mat2 M, M1;
  M << hc.c, 0.5 * theta, -0.5 * theta, hc.c;
  M1 << hc.dc, 0.5, -0.5, hc.dc;
  const double th[6] = {0, 0, 1, 0, 0, -1};
  Eigen::Matrix<double, 2, 6> D1 = Eigen::Matrix<double, 2, 6>::Zero();
  D1.block<2, 2>(0, 0) = Rt;
  D1.block<2, 2>(0, 3) = -Rt;
  D1.col(5) = Vec2(d.y(), -d.x());

  ErrorDerivatives out;
  out.e << M * d, theta;
  Eigen::Matrix<double, 3, 6> J = Eigen::Matrix<double, 3, 6>::Zero();
  for (int j = 0; j < 6; ++j) {
    J.block<2, 1>(0, j) = M1 * d * th[j] + M * D1.col(j);
    J(2, j) = th[j];
  }
  out.J_x = J.leftCols<3>();
  out.J_ref = J.rightCols<3>();
  for (auto& h : out.hessians) h.setZero();
  if (!second_order) return out;

  Mat2 SRt;  // d(R^T)/d rpsi
  SRt << -sr, cr, -cr, -sr;
  const Vec2 M2d = hc.ddc * d;
  auto dd = [&](int j, int k) -> Vec2 {
    if (j != 5 && k != 5) return Vec2::Zero();
    if (j == 5 && k == 5) return -d;
    const int o = j == 5 ? k : j;
    if (o <= 1) return SRt.col(o);
    if (o == 3 || o == 4) return -SRt.col(o - 3);
    return Vec2::Zero();
  };
  for (int j = 0; j < 6; ++j)
    for (int k = j; k < 6; ++k) {
      const Vec2 h = M2d * th[j] * th[k] + M1 * D1.col(k) * th[j] + M1 * D1.col(j) * th[k] +
                     M * dd(j, k);
      for (int i = 0; i < 2; ++i) out.hessians[i](j, k) = out.hessians[i](k, j) = h(i);
    }
  return out;
}

Vec3 tracking_error(const MpcProblem& problem, const Vec3& x, const Vec3& ref) {
  if (problem.metric == ErrorMetric::kEuclidean) return x - ref;
  const Twist2 e = log(compose(inverse(Pose2::from_vector(ref)), Pose2::from_vector(x)));
  return e.vector();
}

double tracking_objective(const MpcProblem& problem, std::span<const Vec3> states,
                          std::span<const Vec2> controls) {
  const int T = problem.horizon();
  if (static_cast<int>(states.size()) != T + 1 || static_cast<int>(controls.size()) != T)
    throw std::invalid_argument("tracking_objective: dimension mismatch");
  double J = 0.0;
  for (int t = 0; t <= T; ++t) {
    const Vec3 e = tracking_error(problem, states[static_cast<std::size_t>(t)],
                                  problem.reference[static_cast<std::size_t>(t)]);
    J += e.dot(stage_weight(problem, t) * e);
    if (t < T) {
      const Vec2& u = controls[static_cast<std::size_t>(t)];
      J += u.dot(problem.R[static_cast<std::size_t>(t)] * u);
    }
  }
  return J;
}

MpcSolution solve(const MpcProblem& problem, const SolverOptions& options,
                  std::span<const Vec2> warm_start) {
  problem.validate();
  Ilqr solver(problem, options);
  return solver.run(warm_start);
}

MpcGradient backward(const MpcProblem& problem, const MpcSolution& solution,
                     std::span<const Vec3> grad_states) {
  const int T = problem.horizon();
  if (static_cast<int>(grad_states.size()) != T + 1 ||
      static_cast<int>(solution.states.size()) != T + 1)
    throw std::invalid_argument("mpc backward: dimension mismatch");

  MpcGradient out;
  out.approximate = !solution.converged;
  out.reference.assign(static_cast<std::size_t>(T) + 1, Vec3::Zero());
  bool any = false;
  for (const auto& g : grad_states) any = any || !g.isZero(0.0);
  if (!any) return out;

  // Exact second-order expansion of the Lagrangian at the solution.
  std::vector<StageData> st(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t < T; ++t) {
    auto& s = st[static_cast<std::size_t>(t)];
    cost_expansion(problem, t, solution.states[static_cast<std::size_t>(t)], true, true, s);
    s.luu = 2.0 * problem.R[static_cast<std::size_t>(t)];
    s.lu = s.luu * solution.controls[static_cast<std::size_t>(t)];
    dynamics_expansion(problem, solution.states[static_cast<std::size_t>(t)],
                       solution.controls[static_cast<std::size_t>(t)], true, s);
  }
  cost_expansion(problem, T, solution.states.back(), true, true, st.back());

  // Costates lambda_{t+1} weight the dynamics curvature.
  std::vector<Vec3> lambda(static_cast<std::size_t>(T) + 1);
  lambda[static_cast<std::size_t>(T)] = st.back().lx;
  for (int t = T - 1; t >= 1; --t)
    lambda[static_cast<std::size_t>(t)] =
        st[static_cast<std::size_t>(t)].lx +
        st[static_cast<std::size_t>(t)].A.transpose() * lambda[static_cast<std::size_t>(t) + 1];

  // Auxiliary LQR: min 0.5 w'Hw - g'w subject to the linearized dynamics,
  // w_x0 = 0 and clamped control directions frozen.
  std::vector<Vec2> kk(static_cast<std::size_t>(T));
  std::vector<Mat23> KK(static_cast<std::size_t>(T));
  double mu = 0.0;
  while (true) {
    bool ok = true;
    Mat3 P = st.back().lxx;
    Vec3 pv = -grad_states[static_cast<std::size_t>(T)];
    for (int t = T - 1; t >= 0 && ok; --t) {
      const auto& s = st[static_cast<std::size_t>(t)];
      const Vec3& lam = lambda[static_cast<std::size_t>(t) + 1];
      const Mat5 Z = lam(0) * s.H[0] + lam(1) * s.H[1] + lam(2) * s.H[2];
      const Mat3 Qxx = s.lxx + Z.topLeftCorner<3, 3>() + s.A.transpose() * P * s.A;
      const Mat23 Qux = Z.bottomLeftCorner<2, 3>() + s.B.transpose() * P * s.A;
      Mat2 Quu = s.luu + Z.bottomRightCorner<2, 2>() + s.B.transpose() * P * s.B;
      const Vec3 qx = -grad_states[static_cast<std::size_t>(t)] + s.A.transpose() * pv;
      const Vec2 qu = s.B.transpose() * pv;

      const auto& act = solution.active_set[static_cast<std::size_t>(t)];
      Vec2 k = Vec2::Zero();
      Mat23 K = Mat23::Zero();
      if (!act[0] && !act[1]) {
        const Mat2 Qr = Quu + mu * Mat2::Identity();
        Eigen::LLT<Mat2> llt(Qr);
        if (llt.info() != Eigen::Success) {
          ok = false;
          break;
        }
        k = -llt.solve(qu);
        K = -llt.solve(Qux);
      } else if (!act[0] || !act[1]) {
        const int f = act[0] ? 1 : 0;
        const double q = Quu(f, f) + mu;
        if (!(q > 0.0)) {
          ok = false;
          break;
        }
        k(f) = -qu(f) / q;
        K.row(f) = -Qux.row(f) / q;
      }
      kk[static_cast<std::size_t>(t)] = k;
      KK[static_cast<std::size_t>(t)] = K;
      pv = qx + K.transpose() * Quu * k + K.transpose() * qu + Qux.transpose() * k;
      P = Qxx + K.transpose() * Quu * K + K.transpose() * Qux + Qux.transpose() * K;
      P = 0.5 * (P + P.transpose()).eval();
    }
    if (ok) break;
    mu = mu == 0.0 ? 1e-6 : mu * 10.0;
    if (mu > 1e4)
      throw SingularFeedback("mpc backward: auxiliary Riccati recursion is singular");
  }

  Vec3 w = Vec3::Zero();
  for (int t = 0; t < T; ++t) {
    const auto& s = st[static_cast<std::size_t>(t)];
    if (t > 0) out.reference[static_cast<std::size_t>(t)] = -s.lxr.transpose() * w;
    const Vec2 wu = kk[static_cast<std::size_t>(t)] + KK[static_cast<std::size_t>(t)] * w;
    w = s.A * w + s.B * wu;
  }
  out.reference[static_cast<std::size_t>(T)] = -st.back().lxr.transpose() * w;
  return out;
}

}  // namespace kinplan

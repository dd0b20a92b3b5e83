#include "stonehop/srb_mpc.hpp"

#include <cmath>
#include <stdexcept>

#include "stonehop/dynamics.hpp"

namespace stonehop {

Eigen::Matrix<double, 7, 7> srb_system_matrix(double dt) {
  Eigen::Matrix<double, 7, 7> A = Eigen::Matrix<double, 7, 7>::Identity();
  A(0, 3) = dt;
  A(1, 4) = dt;
  A(2, 5) = dt;
  A(4, 6) = -dt;
  A(1, 6) = -0.5 * dt * dt;
  return A;
}

double srb_pitch_inertia(const RobotModel& m) {
  // Trunk (plus payload) inertia only: the legs are light and fast relative
  // to the trunk, and folding them into a posture-frozen inertia would
  // overestimate the rotational sluggishness the controller plans against.
  return m.trunk_pitch_inertia();
}

MatX srb_input_matrix(const RobotModel& m, const MpcStep& step, double dt) {
  const int nf = 2 * step.mode.count();
  MatX B = MatX::Zero(7, nf);
  const double inv_m = 1.0 / m.mass_with_payload();
  const double inv_i = 1.0 / srb_pitch_inertia(m);
  int col = 0;
  for (Foot foot : {Foot::kFront, Foot::kRear}) {
    if (!step.mode.has(foot)) continue;
    const Vec2 anchor = foot == Foot::kFront ? step.front_anchor : step.rear_anchor;
    const Vec2 r = anchor - Vec2(step.x_ref[0], step.x_ref[1]);
    // Continuous columns: accelerations per unit force.
    Eigen::Matrix<double, 7, 2> bc = Eigen::Matrix<double, 7, 2>::Zero();
    bc(3, 0) = inv_m;
    bc(4, 1) = inv_m;
    bc(5, 0) = -r.y() * inv_i;  // moment r x f = rx*fz - rz*fx
    bc(5, 1) = r.x() * inv_i;
    // Exact ZOH: integrate velocities once more into positions.
    Eigen::Matrix<double, 7, 2> bd = dt * bc;
    bd.row(0) += 0.5 * dt * dt * bc.row(3);
    bd.row(1) += 0.5 * dt * dt * bc.row(4);
    bd.row(2) += 0.5 * dt * dt * bc.row(5);
    B.block<7, 2>(0, col) = bd;
    col += 2;
  }
  return B;
}

MpcSolution solve_srb_mpc(const RobotModel& m, const SrbState& x0,
                          const std::vector<MpcStep>& steps, const MpcOptions& opts) {
  const int N = static_cast<int>(steps.size());
  if (N == 0) throw std::invalid_argument("solve_srb_mpc: empty horizon");
  for (const auto& s : steps) {
    if (s.f_ref.size() != 2 * s.mode.count()) {
      throw std::invalid_argument("solve_srb_mpc: f_ref size mismatch");
    }
  }

  MpcSolution sol;
  std::vector<int> offset(N, 0);
  int n_u = 0;
  for (int i = 0; i < N; ++i) {
    offset[i] = n_u;
    n_u += 2 * steps[i].mode.count();
  }
  sol.forces.resize(N);
  for (int i = 0; i < N; ++i) sol.forces[i] = steps[i].f_ref;
  sol.wrench.set = steps[0].mode;
  sol.wrench.f = steps[0].f_ref;
  if (n_u == 0) return sol;  // fully airborne horizon: nothing to decide

  const Eigen::Matrix<double, 7, 7> A = srb_system_matrix(opts.dt);
  std::vector<MatX> B(N);
  for (int i = 0; i < N; ++i) B[i] = srb_input_matrix(m, steps[i], opts.dt);

  // Condense: x_{i+1} = A^{i+1} x0 + sum_{j<=i} A^{i-j} B_j u_j.
  MatX A_qp(7 * N, 7);
  Eigen::Matrix<double, 7, 7> Apow = A;
  for (int i = 0; i < N; ++i) {
    A_qp.block<7, 7>(7 * i, 0) = Apow;
    Apow = A * Apow;
  }
  MatX B_qp = MatX::Zero(7 * N, n_u);
  for (int j = 0; j < N; ++j) {
    if (B[j].cols() == 0) continue;
    MatX blk = B[j];
    for (int i = j; i < N; ++i) {
      B_qp.block(7 * i, offset[j], 7, B[j].cols()) = blk;
      blk = A * blk;
    }
  }

  VecX s_diag(7 * N);
  VecX xd(7 * N);
  VecX f_ref(n_u);
  for (int i = 0; i < N; ++i) {
    const double scale = i == N - 1 ? opts.terminal_scale : 1.0;
    s_diag.segment<7>(7 * i) = scale * opts.state_weights;
    xd.segment<7>(7 * i) = steps[i].x_ref;
    f_ref.segment(offset[i], steps[i].f_ref.size()) = steps[i].f_ref;
  }

  QpProblem qp;
  const MatX SB = s_diag.asDiagonal() * B_qp;
  qp.H = 2.0 * (B_qp.transpose() * SB);
  qp.H.diagonal().array() += 2.0 * opts.force_weight;
  const VecX drift = A_qp * x0 - xd;
  qp.b = 2.0 * (SB.transpose() * drift) - 2.0 * opts.force_weight * f_ref;

  // Three rows per stance foot: fx - mu*fz <= 0, fx + mu*fz >= 0, fz in
  // [0, fz_max].
  const int n_feet = n_u / 2;
  qp.C = MatX::Zero(3 * n_feet, n_u);
  qp.c_min = VecX::Zero(3 * n_feet);
  qp.c_max = VecX::Zero(3 * n_feet);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_feet; ++k) {
    const int fx = 2 * k, fz = 2 * k + 1;
    qp.C(3 * k, fx) = 1.0;
    qp.C(3 * k, fz) = -opts.mu;
    qp.c_min[3 * k] = -inf;
    qp.c_max[3 * k] = 0.0;
    qp.C(3 * k + 1, fx) = 1.0;
    qp.C(3 * k + 1, fz) = opts.mu;
    qp.c_min[3 * k + 1] = 0.0;
    qp.c_max[3 * k + 1] = inf;
    qp.C(3 * k + 2, fz) = 1.0;
    qp.c_min[3 * k + 2] = 0.0;
    qp.c_max[3 * k + 2] = opts.fz_max;
  }

  QpSolution qs;
  try {
    qs = solve_qp(qp, &f_ref);
  } catch (const std::exception&) {
    sol.status = QpStatus::kInfeasible;
    return sol;  // keep the reference forces
  }
  sol.status = qs.status;
  sol.objective = qs.objective;
  if (qs.status == QpStatus::kInfeasible) return sol;

  for (int i = 0; i < N; ++i) {
    sol.forces[i] = qs.x.segment(offset[i], 2 * steps[i].mode.count());
  }
  sol.wrench.f = sol.forces[0];
  return sol;
}

}  // namespace stonehop

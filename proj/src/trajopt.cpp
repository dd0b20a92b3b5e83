#include "stonehop/trajopt.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <vector>

#include "stonehop/dynamics.hpp"
#include "stonehop/kinematics.hpp"
#include "stonehop/terrain.hpp"

namespace stonehop {
namespace {

constexpr double kPostureWeight = 1.0;
constexpr double kTorqueWeight = 0.005;
constexpr double kHessianRidge = 1e-9;
constexpr double kFdStep = 1e-6;

// Required swing-foot height at knot k, relaxed near this foot's own stance
// boundaries so liftoff and touchdown can reach the ground.
double swing_threshold(const ContactSchedule& s, Foot foot, int k) {
  if (foot == Foot::kFront) {
    const int since_liftoff = k - s.front_liftoff;
    const int to_touchdown = (s.num_knots - 1) - k;  // wraps into stance at knot 0
    return (since_liftoff >= kSwingClearanceSkirt &&
            to_touchdown >= kSwingClearanceSkirt)
               ? kSwingClearance
               : 0.0;
  }
  if (k < s.rear_touchdown) {
    return (s.rear_touchdown - k) > kSwingClearanceSkirt ? kSwingClearance : 0.0;
  }
  return (k - s.rear_liftoff) >= kSwingClearanceSkirt ? kSwingClearance : 0.0;
}

struct RowCounts {
  int defects = 0;
  int pins = 0;
  int periodicity = 14;
  int prelanding = 0;
  int n_eq = 0;
  int row_pins = 0, row_periodic = 0, row_prelanding = 0;

  int friction = 0;
  int trunk = 0;
  int knee = 0;
  int swing = 0;
  int n_ineq = 0;
  int irow_trunk = 0, irow_knee = 0, irow_swing = 0;
};

RowCounts count_rows(const ContactSchedule& s) {
  RowCounts r;
  r.defects = 14 * (s.num_knots - 1);
  r.prelanding = 4 * kPrelandingKnots;
  int stance_feet = 0, stance_knots = 0, swing_feet = 0;
  for (int k = 0; k < s.num_knots; ++k) {
    const ContactSet c = s.at_knot(k);
    stance_feet += c.count();
    swing_feet += 2 - c.count();
    if (c.any()) ++stance_knots;
  }
  r.pins = 2 * s.front_liftoff + 2 * (s.rear_liftoff - s.rear_touchdown);
  r.row_pins = r.defects;
  r.row_periodic = r.row_pins + r.pins;
  r.row_prelanding = r.row_periodic + r.periodicity;
  r.n_eq = r.row_prelanding + r.prelanding;

  r.friction = 2 * stance_feet;
  r.trunk = stance_knots;
  r.knee = 2 * s.num_knots;
  r.swing = swing_feet;
  r.irow_trunk = r.friction;
  r.irow_knee = r.irow_trunk + r.trunk;
  r.irow_swing = r.irow_knee + r.knee;
  r.n_ineq = r.irow_swing + r.swing;
  return r;
}

struct Ctx {
  RobotModel model;
  TrajoptLayout layout;
  double jump_distance = 0.0;
  RowCounts rows;
};

Vec7 knot_q(const Ctx& c, const VecX& x, int k) {
  return x.segment<7>(c.layout.q_offset(k));
}
Vec7 knot_qd(const Ctx& c, const VecX& x, int k) {
  return x.segment<7>(c.layout.qd_offset(k));
}
Vec4 knot_tau(const Ctx& c, const VecX& x, int k) {
  return x.segment<4>(c.layout.tau_offset(k));
}
ContactWrench knot_wrench(const Ctx& c, const VecX& x, int k) {
  ContactWrench w;
  w.set = c.layout.schedule.at_knot(k);
  w.f = x.segment(c.layout.force_offset(k), c.layout.force_dim(k));
  return w;
}

VecX eval_eq(const Ctx& c, const VecX& x) {
  const ContactSchedule& s = c.layout.schedule;
  const int N = s.num_knots;
  const double dt = s.dt;
  VecX out = VecX::Zero(c.rows.n_eq);

  std::vector<Vec7> acc(N);
  for (int k = 0; k < N; ++k) {
    acc[k] = forward_accel(c.model, knot_q(c, x, k), knot_qd(c, x, k),
                           knot_tau(c, x, k), knot_wrench(c, x, k));
  }
  for (int k = 0; k + 1 < N; ++k) {
    const Vec7 q0 = knot_q(c, x, k), q1 = knot_q(c, x, k + 1);
    const Vec7 v0 = knot_qd(c, x, k), v1 = knot_qd(c, x, k + 1);
    out.segment<7>(14 * k) = q1 - q0 - 0.5 * dt * (v0 + v1);
    out.segment<7>(14 * k + 7) = v1 - v0 - 0.5 * dt * (acc[k] + acc[k + 1]);
  }

  int r = c.rows.row_pins;
  for (int k = 0; k < s.front_liftoff; ++k) {
    const auto feet = foot_positions(c.model, GenCoords::from(knot_q(c, x, k)));
    out.segment<2>(r) = feet.first;  // pinned at the origin
    r += 2;
  }
  const Vec2 rear_target(-c.model.foot_spacing, 0.0);
  for (int k = s.rear_touchdown; k < s.rear_liftoff; ++k) {
    const auto feet = foot_positions(c.model, GenCoords::from(knot_q(c, x, k)));
    out.segment<2>(r) = feet.second - rear_target;
    r += 2;
  }

  Vec7 shift = Vec7::Zero();
  shift[0] = c.jump_distance;
  out.segment<7>(c.rows.row_periodic) = knot_q(c, x, N - 1) - knot_q(c, x, 0) - shift;
  out.segment<7>(c.rows.row_periodic + 7) = knot_qd(c, x, N - 1) - knot_qd(c, x, 0);

  r = c.rows.row_prelanding;
  for (int k = N - kPrelandingKnots; k < N; ++k) {
    out.segment<4>(r) = knot_qd(c, x, k).segment<4>(3);
    r += 4;
  }
  return out;
}

VecX eval_ineq(const Ctx& c, const VecX& x) {
  const ContactSchedule& s = c.layout.schedule;
  const int N = s.num_knots;
  const double mu = kFrictionCoefficient;
  VecX out = VecX::Zero(c.rows.n_ineq);
  const Vec7 zero7 = Vec7::Zero();

  int r = 0;
  for (int k = 0; k < N; ++k) {
    const ContactWrench w = knot_wrench(c, x, k);
    for (int i = 0; i < w.set.count(); ++i) {
      const double fx = w.f[2 * i], fz = w.f[2 * i + 1];
      out[r++] = fx - mu * fz;
      out[r++] = -fx - mu * fz;
    }
  }
  for (int k = 0; k < N; ++k) {
    if (s.at_knot(k).any()) out[r++] = kTrunkMinHeight - knot_q(c, x, k)[1];
  }
  for (int k = 0; k < N; ++k) {
    const Vec7 q = knot_q(c, x, k);
    out[r++] = kKneeMinHeight - knee_kin(c.model, q, zero7, Foot::kFront).p.y();
    out[r++] = kKneeMinHeight - knee_kin(c.model, q, zero7, Foot::kRear).p.y();
  }
  for (int k = 0; k < N; ++k) {
    const ContactSet cs = s.at_knot(k);
    const Vec7 q = knot_q(c, x, k);
    if (!cs.front) {
      out[r++] = swing_threshold(s, Foot::kFront, k) -
                 foot_kin(c.model, q, zero7, Foot::kFront).p.y();
    }
    if (!cs.rear) {
      out[r++] = swing_threshold(s, Foot::kRear, k) -
                 foot_kin(c.model, q, zero7, Foot::kRear).p.y();
    }
  }
  return out;
}

struct KnotDeriv {
  Mat7 Aq, Aqd;
  Eigen::Matrix<double, 7, 4> Atau;
  MatX Af;  // 7 x force_dim
};

KnotDeriv accel_derivatives(const RobotModel& m, const Vec7& q, const Vec7& qd,
                            const Vec4& tau, const ContactWrench& f) {
  KnotDeriv d;
  Vec7 p = q;
  for (int i = 0; i < 7; ++i) {
    p[i] = q[i] + kFdStep;
    const Vec7 ap = forward_accel(m, p, qd, tau, f);
    p[i] = q[i] - kFdStep;
    const Vec7 am = forward_accel(m, p, qd, tau, f);
    p[i] = q[i];
    d.Aq.col(i) = (ap - am) / (2.0 * kFdStep);
  }
  p = qd;
  for (int i = 0; i < 7; ++i) {
    p[i] = qd[i] + kFdStep;
    const Vec7 ap = forward_accel(m, q, p, tau, f);
    p[i] = qd[i] - kFdStep;
    const Vec7 am = forward_accel(m, q, p, tau, f);
    p[i] = qd[i];
    d.Aqd.col(i) = (ap - am) / (2.0 * kFdStep);
  }
  const Mat7 M = mass_matrix(m, q);
  const Eigen::LLT<Mat7> llt(M);
  Eigen::Matrix<double, 7, 4> S = Eigen::Matrix<double, 7, 4>::Zero();
  S.block<4, 4>(3, 0).setIdentity();
  d.Atau = llt.solve(S);
  if (f.set.any()) {
    const MatX Jc = contact_jacobian(m, GenCoords::from(q), f.set);
    d.Af = llt.solve(Jc.transpose());
  } else {
    d.Af.resize(7, 0);
  }
  return d;
}

using Trips = std::vector<Eigen::Triplet<double>>;

void add_block(Trips& t, int row0, int col0, const Eigen::Ref<const MatX>& B) {
  for (int i = 0; i < B.rows(); ++i) {
    for (int j = 0; j < B.cols(); ++j) {
      if (B(i, j) != 0.0) t.emplace_back(row0 + i, col0 + j, B(i, j));
    }
  }
}

SpMat eq_jacobian(const Ctx& c, const VecX& x) {
  const ContactSchedule& s = c.layout.schedule;
  const int N = s.num_knots;
  const double dt = s.dt;
  const Vec7 zero7 = Vec7::Zero();
  Trips t;
  t.reserve(60000);

  std::vector<KnotDeriv> kd(N);
  for (int k = 0; k < N; ++k) {
    kd[k] = accel_derivatives(c.model, knot_q(c, x, k), knot_qd(c, x, k),
                              knot_tau(c, x, k), knot_wrench(c, x, k));
  }

  const Mat7 I7 = Mat7::Identity();
  for (int k = 0; k + 1 < N; ++k) {
    const int rq = 14 * k, rv = 14 * k + 7;
    for (int i = 0; i < 7; ++i) {
      t.emplace_back(rq + i, c.layout.q_offset(k + 1) + i, 1.0);
      t.emplace_back(rq + i, c.layout.q_offset(k) + i, -1.0);
      t.emplace_back(rq + i, c.layout.qd_offset(k) + i, -0.5 * dt);
      t.emplace_back(rq + i, c.layout.qd_offset(k + 1) + i, -0.5 * dt);
    }
    add_block(t, rv, c.layout.q_offset(k), MatX(-0.5 * dt * kd[k].Aq));
    add_block(t, rv, c.layout.q_offset(k + 1), MatX(-0.5 * dt * kd[k + 1].Aq));
    add_block(t, rv, c.layout.qd_offset(k), MatX(-I7 - 0.5 * dt * kd[k].Aqd));
    add_block(t, rv, c.layout.qd_offset(k + 1), MatX(I7 - 0.5 * dt * kd[k + 1].Aqd));
    add_block(t, rv, c.layout.tau_offset(k), MatX(-0.5 * dt * kd[k].Atau));
    add_block(t, rv, c.layout.tau_offset(k + 1), MatX(-0.5 * dt * kd[k + 1].Atau));
    if (c.layout.force_dim(k) > 0) {
      add_block(t, rv, c.layout.force_offset(k), MatX(-0.5 * dt * kd[k].Af));
    }
    if (c.layout.force_dim(k + 1) > 0) {
      add_block(t, rv, c.layout.force_offset(k + 1), MatX(-0.5 * dt * kd[k + 1].Af));
    }
  }

  int r = c.rows.row_pins;
  for (int k = 0; k < s.front_liftoff; ++k) {
    const Mat27 J = foot_kin(c.model, knot_q(c, x, k), zero7, Foot::kFront).J;
    add_block(t, r, c.layout.q_offset(k), MatX(J));
    r += 2;
  }
  for (int k = s.rear_touchdown; k < s.rear_liftoff; ++k) {
    const Mat27 J = foot_kin(c.model, knot_q(c, x, k), zero7, Foot::kRear).J;
    add_block(t, r, c.layout.q_offset(k), MatX(J));
    r += 2;
  }

  for (int i = 0; i < 7; ++i) {
    t.emplace_back(c.rows.row_periodic + i, c.layout.q_offset(N - 1) + i, 1.0);
    t.emplace_back(c.rows.row_periodic + i, c.layout.q_offset(0) + i, -1.0);
    t.emplace_back(c.rows.row_periodic + 7 + i, c.layout.qd_offset(N - 1) + i, 1.0);
    t.emplace_back(c.rows.row_periodic + 7 + i, c.layout.qd_offset(0) + i, -1.0);
  }

  r = c.rows.row_prelanding;
  for (int k = N - kPrelandingKnots; k < N; ++k) {
    for (int i = 0; i < 4; ++i) {
      t.emplace_back(r + i, c.layout.qd_offset(k) + 3 + i, 1.0);
    }
    r += 4;
  }

  SpMat J(c.rows.n_eq, c.layout.n);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

SpMat ineq_jacobian(const Ctx& c, const VecX& x) {
  const ContactSchedule& s = c.layout.schedule;
  const int N = s.num_knots;
  const double mu = kFrictionCoefficient;
  const Vec7 zero7 = Vec7::Zero();
  Trips t;
  t.reserve(8000);

  int r = 0;
  for (int k = 0; k < N; ++k) {
    const ContactSet cs = s.at_knot(k);
    for (int i = 0; i < cs.count(); ++i) {
      const int fo = c.layout.force_offset(k) + 2 * i;
      t.emplace_back(r, fo, 1.0);
      t.emplace_back(r, fo + 1, -mu);
      ++r;
      t.emplace_back(r, fo, -1.0);
      t.emplace_back(r, fo + 1, -mu);
      ++r;
    }
  }
  for (int k = 0; k < N; ++k) {
    if (s.at_knot(k).any()) {
      t.emplace_back(r, c.layout.q_offset(k) + 1, -1.0);
      ++r;
    }
  }
  for (int k = 0; k < N; ++k) {
    const Vec7 q = knot_q(c, x, k);
    for (Foot foot : {Foot::kFront, Foot::kRear}) {
      const Mat27 J = knee_kin(c.model, q, zero7, foot).J;
      add_block(t, r, c.layout.q_offset(k), MatX(-J.row(1)));
      ++r;
    }
  }
  for (int k = 0; k < N; ++k) {
    const ContactSet cs = s.at_knot(k);
    const Vec7 q = knot_q(c, x, k);
    for (Foot foot : {Foot::kFront, Foot::kRear}) {
      if (cs.has(foot)) continue;
      const Mat27 J = foot_kin(c.model, q, zero7, foot).J;
      add_block(t, r, c.layout.q_offset(k), MatX(-J.row(1)));
      ++r;
    }
  }

  SpMat J(c.rows.n_ineq, c.layout.n);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

}  // namespace

TrajoptLayout make_layout(const ContactSchedule& s) {
  if (!s.valid()) throw std::invalid_argument("make_layout: invalid schedule");
  TrajoptLayout l;
  l.schedule = s;
  l.knot_offset.assign(s.num_knots, 0);
  // Interleaved visit order: 0, N-1, 1, N-2, ... keeps cyclically adjacent
  // knots within two blocks of each other.
  std::vector<int> order;
  order.reserve(s.num_knots);
  for (int i = 0; i < s.num_knots / 2; ++i) {
    order.push_back(i);
    order.push_back(s.num_knots - 1 - i);
  }
  if (s.num_knots % 2 == 1) order.push_back(s.num_knots / 2);
  int off = 0;
  for (const int k : order) {
    l.knot_offset[k] = off;
    off += 18 + 2 * s.at_knot(k).count();
  }
  l.n = off;
  return l;
}

KnotBounds jump_knot_bounds(const RobotModel& m) {
  KnotBounds b;
  b.q_min << -2.0, 0.08, -1.0, m.qj_min;
  b.q_max << 3.0, 1.2, 1.0, m.qj_max;
  b.qd_min << -6.0, -6.0, -12.0, Vec4::Constant(-m.qd_max);
  b.qd_max << 6.0, 6.0, 12.0, Vec4::Constant(m.qd_max);
  b.tau_min = Vec4::Constant(-m.tau_max);
  b.tau_max = Vec4::Constant(m.tau_max);
  b.f_min = Vec2(-300.0, 0.0);
  b.f_max = Vec2(300.0, 500.0);
  return b;
}

NlpProblem transcribe_jump(const RobotModel& m, double jump_distance,
                           const TrajoptLayout& layout) {
  if (!(jump_distance > 0.0) || jump_distance > 1.5) {
    throw std::invalid_argument("transcribe_jump: jump distance out of range");
  }
  auto ctx = std::make_shared<Ctx>();
  ctx->model = m;
  ctx->layout = layout;
  ctx->jump_distance = jump_distance;
  ctx->rows = count_rows(layout.schedule);

  NlpProblem p;
  p.n = layout.n;
  p.num_eq = ctx->rows.n_eq;
  p.num_ineq = ctx->rows.n_ineq;

  const KnotBounds kb = jump_knot_bounds(m);
  p.x_lower = VecX::Zero(p.n);
  p.x_upper = VecX::Zero(p.n);
  for (int k = 0; k < layout.schedule.num_knots; ++k) {
    p.x_lower.segment<7>(layout.q_offset(k)) = kb.q_min;
    p.x_upper.segment<7>(layout.q_offset(k)) = kb.q_max;
    p.x_lower.segment<7>(layout.qd_offset(k)) = kb.qd_min;
    p.x_upper.segment<7>(layout.qd_offset(k)) = kb.qd_max;
    p.x_lower.segment<4>(layout.tau_offset(k)) = kb.tau_min;
    p.x_upper.segment<4>(layout.tau_offset(k)) = kb.tau_max;
    for (int i = 0; i < layout.force_dim(k) / 2; ++i) {
      p.x_lower.segment<2>(layout.force_offset(k) + 2 * i) = kb.f_min;
      p.x_upper.segment<2>(layout.force_offset(k) + 2 * i) = kb.f_max;
    }
  }

  const Vec4 ref = nominal_posture();
  p.cost = [ctx, ref](const VecX& x) {
    double f = 0.0;
    for (int k = 0; k < ctx->layout.schedule.num_knots; ++k) {
      const Vec4 qj = x.segment<4>(ctx->layout.q_offset(k) + 3);
      const Vec4 tau = x.segment<4>(ctx->layout.tau_offset(k));
      f += kPostureWeight * (qj - ref).squaredNorm() +
           kTorqueWeight * tau.squaredNorm();
    }
    return f;
  };
  p.cost_gradient = [ctx, ref](const VecX& x) {
    VecX g = VecX::Zero(x.size());
    for (int k = 0; k < ctx->layout.schedule.num_knots; ++k) {
      const Vec4 qj = x.segment<4>(ctx->layout.q_offset(k) + 3);
      const Vec4 tau = x.segment<4>(ctx->layout.tau_offset(k));
      g.segment<4>(ctx->layout.q_offset(k) + 3) = 2.0 * kPostureWeight * (qj - ref);
      g.segment<4>(ctx->layout.tau_offset(k)) = 2.0 * kTorqueWeight * tau;
    }
    return g;
  };
  p.cost_hessian = [ctx](const VecX& x) {
    MatX H = MatX::Zero(x.size(), x.size());
    H.diagonal().setConstant(kHessianRidge);
    for (int k = 0; k < ctx->layout.schedule.num_knots; ++k) {
      for (int i = 0; i < 4; ++i) {
        H(ctx->layout.q_offset(k) + 3 + i, ctx->layout.q_offset(k) + 3 + i) +=
            2.0 * kPostureWeight;
        H(ctx->layout.tau_offset(k) + i, ctx->layout.tau_offset(k) + i) +=
            2.0 * kTorqueWeight;
      }
    }
    return H;
  };

  p.eq = [ctx](const VecX& x) { return eval_eq(*ctx, x); };
  p.ineq = [ctx](const VecX& x) { return eval_ineq(*ctx, x); };
  p.eq_jacobian = [ctx](const VecX& x) { return eq_jacobian(*ctx, x); };
  p.ineq_jacobian = [ctx](const VecX& x) { return ineq_jacobian(*ctx, x); };
  return p;
}

VecX pack_gait(const TrajoptLayout& layout, const GaitTrajectory& g) {
  if (!g.consistent() || g.num_knots() != layout.schedule.num_knots) {
    throw std::invalid_argument("pack_gait: trajectory does not match layout");
  }
  VecX x = VecX::Zero(layout.n);
  for (int k = 0; k < g.num_knots(); ++k) {
    x.segment<7>(layout.q_offset(k)) = g.q[k];
    x.segment<7>(layout.qd_offset(k)) = g.qd[k];
    x.segment<4>(layout.tau_offset(k)) = g.tau[k];
    x.segment(layout.force_offset(k), layout.force_dim(k)) = g.force[k];
  }
  return x;
}

GaitTrajectory unpack_gait(const TrajoptLayout& layout, const VecX& x,
                           double jump_distance) {
  if (x.size() != layout.n) throw std::invalid_argument("unpack_gait: bad size");
  GaitTrajectory g;
  g.jump_distance = jump_distance;
  g.schedule = layout.schedule;
  const int N = layout.schedule.num_knots;
  g.q.resize(N);
  g.qd.resize(N);
  g.tau.resize(N);
  g.force.resize(N);
  for (int k = 0; k < N; ++k) {
    g.q[k] = x.segment<7>(layout.q_offset(k));
    g.qd[k] = x.segment<7>(layout.qd_offset(k));
    g.tau[k] = x.segment<4>(layout.tau_offset(k));
    g.force[k] = x.segment(layout.force_offset(k), layout.force_dim(k));
  }
  return g;
}

VecX initial_guess(const RobotModel& m, double jump_distance,
                   const TrajoptLayout& layout) {
  const ContactSchedule& s = layout.schedule;
  const int N = s.num_knots;
  const double dt = s.dt;
  const double d = m.foot_spacing;
  const double kPi = std::numbers::pi;

  // Phase times. The wrap instant doubles as the front touchdown, so the
  // ballistic arc spans [t_lo, t_land] and the profiles below close the cycle
  // exactly: same trunk state at the first and last knot (up to the forward
  // shift), no velocity jumps anywhere.
  const double t_lo = (s.rear_liftoff - 1) * dt;  // last stance knot
  const double t_land = (N - 1) * dt;             // wrap instant
  const double t_fl = t_land - t_lo;
  const double t_a = 0.14;  // touchdown absorption ramp
  const double t_b = 0.16;  // pushoff ramp

  // Vertical profile: brake the landing velocity over t_a (sized so the knee
  // torque stays well inside its box), hold a crouch, push back off over t_b.
  // Net height change over the cycle must vanish, which fixes the liftoff
  // rate.
  const double g = m.gravity;
  const double vz_lo =
      (0.5 * g * t_fl * t_fl + 0.5 * t_a * g * t_fl) / (0.5 * t_a + 0.5 * t_b + t_fl);
  const double vz_land = vz_lo - g * t_fl;
  // Cycle at a crouch: landing with bent knees keeps the leg Jacobian well
  // conditioned, so absorbing the touchdown velocity stays inside the
  // joint-rate box.
  const double z0 = 0.88 * standing_trunk_height(m);
  const double z_mid = z0 + 0.5 * vz_land * t_a;
  const double t_bs = t_lo - t_b;  // pushoff ramp start

  auto trunk_z = [&](double t) {
    if (t <= t_a) return z0 + vz_land * (t - 0.5 * t * t / t_a);
    if (t <= t_bs) return z_mid;
    if (t <= t_lo) {
      const double u = t - t_bs;
      return z_mid + 0.5 * vz_lo * u * u / t_b;
    }
    const double u = t - t_lo;
    return z_mid + 0.5 * vz_lo * t_b + vz_lo * u - 0.5 * g * u * u;
  };
  auto trunk_vz = [&](double t) {
    if (t <= t_a) return vz_land * (1.0 - t / t_a);
    if (t <= t_bs) return 0.0;
    if (t <= t_lo) return vz_lo * (t - t_bs) / t_b;
    return vz_lo - g * (t - t_lo);
  };

  // Forward speed: flight speed at both stance ends with a shallow triangular
  // dip in between, integrating to one jump length per cycle. Keeping the
  // trunk moving bounds the foot-to-hip excursion during stance.
  const double v_land = 1.15 * jump_distance / t_land;
  const double v_min = 2.0 * (jump_distance - v_land * t_fl) / t_lo - v_land;
  auto tri_integral = [&](double t) {  // integral of the unit triangle bump
    if (t <= 0.5 * t_lo) return t * t / t_lo;
    return 2.0 * t - t * t / t_lo - 0.5 * t_lo;
  };
  auto trunk_vx = [&](double t) {
    if (t >= t_lo) return v_land;
    const double u = t / t_lo;
    return v_land + (v_min - v_land) * (1.0 - std::abs(1.0 - 2.0 * u));
  };
  // x0 is fixed below so the front foot sits under its hip mid-stance.
  double x0 = 0.0;
  auto trunk_x = [&](double t) {
    const double tc = std::min(t, t_lo);
    return x0 + v_land * t + (v_min - v_land) * tri_integral(tc);
  };

  // Pitch: land rotating nose-up. The touchdown foot must track the ground
  // while the trunk still falls; rotating the landing point about the center
  // of mass cancels part of that descent, which is what keeps the
  // post-landing knee rate inside its box. The pitch itself stays near zero
  // (both hips must remain within leg reach of their pinned feet); only the
  // rate swings, dipping mid-flight so its integral over flight vanishes.
  // The legs sweeping forward exchange angular momentum with the trunk, so a
  // varying flight rate is dynamically sound.
  const double w_land = 2.6;
  const double w_lo = 0.3;
  const double cw = (3.0 * (w_land - w_lo) + 6.0 * w_lo) / (t_fl * t_fl);
  const double bw = ((w_land - w_lo) - cw * t_fl * t_fl) / t_fl;
  auto trunk_pitch = [&](double t) {
    if (t > t_lo) {
      const double u = t - t_lo;
      return w_lo * u + 0.5 * bw * u * u + cw * u * u * u / 3.0;
    }
    // Hermite from 0 back to 0 with end rates w_land -> w_lo.
    const double u = t / t_lo, u2 = u * u, u3 = u2 * u;
    return (u3 - 2.0 * u2 + u) * t_lo * w_land + (u3 - u2) * t_lo * w_lo;
  };
  auto trunk_w = [&](double t) {
    if (t > t_lo) {
      const double u = t - t_lo;
      return w_lo + bw * u + cw * u * u;
    }
    const double u = t / t_lo, u2 = u * u;
    return (3.0 * u2 - 4.0 * u + 1.0) * w_land + (3.0 * u2 - 2.0 * u) * w_lo;
  };

  auto hip = [&](Foot foot, double t) {
    const double p = trunk_pitch(t);
    return Vec2(trunk_x(t) + m.hip_x(foot) * std::cos(p),
                trunk_z(t) + m.hip_x(foot) * std::sin(p));
  };
  auto smooth = [](double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
  };
  auto body_frame = [&](const Vec2& world, double p) {
    return Vec2(std::cos(p) * world.x() + std::sin(p) * world.y(),
                -std::sin(p) * world.x() + std::cos(p) * world.y());
  };
  auto world_frame = [&](const Vec2& body, double p) {
    return Vec2(std::cos(p) * body.x() - std::sin(p) * body.y(),
                std::sin(p) * body.x() + std::cos(p) * body.y());
  };

  // Place the cycle so the front foot sits under its hip mid-stance.
  const double t_mid_front_pin = 0.5 * (s.front_liftoff - 1) * dt;
  x0 = -(v_land * t_mid_front_pin +
         (v_min - v_land) * tri_integral(t_mid_front_pin)) -
       m.hip_x(Foot::kFront) * std::cos(trunk_pitch(t_mid_front_pin));

  // Swing-foot targets interpolated in the body frame between the liftoff and
  // touchdown offsets, with a tuck bump. Both profiles finish early and hold,
  // so the joints are still through the pre-landing window; offsets frozen in
  // the body frame keep the joint angles exactly constant there.
  const Vec2 front_pin(0.0, 0.0), rear_pin(-d, 0.0);
  const double t_ftd = s.front_liftoff * dt;
  const double t_rlo = s.rear_liftoff * dt;
  const double t_rtd = s.rear_touchdown * dt;
  const Vec2 fb_start =
      body_frame(front_pin - hip(Foot::kFront, t_ftd), trunk_pitch(t_ftd));
  const Vec2 fb_end = body_frame(
      Vec2(front_pin.x() + jump_distance, front_pin.y()) - hip(Foot::kFront, t_land),
      trunk_pitch(t_land));
  const Vec2 rb_start =
      body_frame(rear_pin - hip(Foot::kRear, t_rlo), trunk_pitch(t_rlo));
  const Vec2 rb_end =
      body_frame(rear_pin - hip(Foot::kRear, t_rtd), trunk_pitch(t_rtd));
  // Kept small: the trunk is crouched at the swing endpoints, so a large bump
  // would fold the knee past its travel.
  const double kTuck = 0.05;

  auto front_body = [&](int k) {
    const double span = N - s.front_liftoff;
    const double c = std::min(((k - s.front_liftoff) / span) / 0.83, 1.0);
    Vec2 r = fb_start + smooth(c) * (fb_end - fb_start);
    r.y() += kTuck * std::sin(kPi * c);
    return r;
  };
  auto rear_body = [&](int k) {
    // The rear swing wraps: knots [rear_liftoff, N) then [0, rear_touchdown).
    // No tuck bump: the swing rides the flight arc, and near touchdown the
    // crouched trunk leaves no knee travel to fold any further.
    const double span = N - s.rear_liftoff + s.rear_touchdown;
    const double sr = (k >= s.rear_liftoff ? k - s.rear_liftoff
                                           : k + N - s.rear_liftoff) /
                      span;
    const double u = smooth(std::min(sr / 0.5, 1.0));
    return Vec2(rb_start + u * (rb_end - rb_start));
  };

  std::vector<Vec7> q(N);
  for (int k = 0; k < N; ++k) {
    const double t = k * dt;
    const double p = trunk_pitch(t);
    Vec7 qk;
    qk << trunk_x(t), trunk_z(t), p, Vec4::Zero();
    const Vec2 front_target =
        k < s.front_liftoff
            ? front_pin
            : Vec2(hip(Foot::kFront, t) + world_frame(front_body(k), p));
    const Vec2 rear_target =
        (k >= s.rear_touchdown && k < s.rear_liftoff)
            ? rear_pin
            : Vec2(hip(Foot::kRear, t) + world_frame(rear_body(k), p));
    qk.segment<2>(3) = leg_ik(m, front_target - hip(Foot::kFront, t), p);
    qk.segment<2>(5) = leg_ik(m, rear_target - hip(Foot::kRear, t), p);
    q[k] = qk;
  }

  // Velocities: analytic for the trunk, periodic central differences for the
  // joints (joint angles are invariant to the cycle's forward shift), pinned
  // to zero through the pre-landing window and at the wrap knot.
  std::vector<Vec7> qd(N);
  for (int k = 0; k < N; ++k) {
    const double t = k * dt;
    Vec7 v = Vec7::Zero();
    v[0] = trunk_vx(t);
    v[1] = trunk_vz(t);
    v[2] = trunk_w(t);
    const Vec4 prev = k > 0 ? Vec4(q[k - 1].tail<4>()) : Vec4(q[N - 2].tail<4>());
    const Vec4 next = k + 1 < N ? Vec4(q[k + 1].tail<4>()) : Vec4(q[1].tail<4>());
    v.tail<4>() = (next - prev) / (2.0 * dt);
    if (k == 0 || k >= N - kPrelandingKnots) v.tail<4>().setZero();
    qd[k] = v;
  }

  // Torques and stance forces from knot-wise inverse dynamics: a ridge
  // least-squares fit of the resulting acceleration M^-1 (S tau + Jc^T f -
  // bias) to the differenced rates. Weighting in acceleration space matters:
  // the unactuated trunk direction is unmatchable, and penalizing it as a
  // force error would let M^-1 blow the residual up into the joint rows.
  VecX x = VecX::Zero(layout.n);
  const KnotBounds kb = jump_knot_bounds(m);
  for (int k = 0; k < N; ++k) {
    const Vec7& vprev = k > 0 ? qd[k - 1] : qd[N - 2];
    const Vec7& vnext = k + 1 < N ? qd[k + 1] : qd[1];
    const Vec7 qdd = (vnext - vprev) / (2.0 * dt);
    const ContactSet cs = s.at_knot(k);
    const int nc = cs.count();
    const auto Mllt = mass_matrix(m, q[k]).llt();

    MatX A = MatX::Zero(7, 4 + 2 * nc);
    A.block<4, 4>(3, 0).setIdentity();
    if (nc > 0) {
      A.rightCols(2 * nc) =
          contact_jacobian(m, GenCoords::from(q[k]), cs).transpose();
    }
    const MatX Ah = Mllt.solve(A);
    const Vec7 rh = qdd + Mllt.solve(bias_forces(m, q[k], qd[k]));
    VecX w(4 + 2 * nc);
    w.head<4>().setConstant(1.0);
    if (nc > 0) w.tail(2 * nc).setConstant(0.1);
    MatX G = Ah.transpose() * Ah;
    G.diagonal() += 1e-8 * w;
    const VecX u = G.llt().solve(Ah.transpose() * rh);

    Vec4 tau = u.head<4>().cwiseMax(kb.tau_min).cwiseMin(kb.tau_max);
    VecX f = u.tail(2 * nc);
    for (int i = 0; i + 1 < static_cast<int>(f.size()); i += 2) {
      // Box clamps only: a friction-cone overshoot is a soft inequality the
      // solver repairs cheaply, whereas projecting it here would corrupt the
      // dynamics residual of the seed.
      f[i + 1] = std::clamp(f[i + 1], 0.0, kb.f_max[1]);
      f[i] = std::clamp(f[i], -kb.f_max[0], kb.f_max[0]);
    }

    x.segment<7>(layout.q_offset(k)) = q[k];
    x.segment<7>(layout.qd_offset(k)) = qd[k];
    x.segment<4>(layout.tau_offset(k)) = tau;
    x.segment(layout.force_offset(k), layout.force_dim(k)) = f;
  }
  return x;
}

void polish_gait(const RobotModel& m, GaitTrajectory& g) {
  const KnotBounds kb = jump_knot_bounds(m);
  const int N = g.num_knots();
  for (int k = 0; k < N; ++k) {
    g.q[k] = g.q[k].cwiseMax(kb.q_min).cwiseMin(kb.q_max);
    g.qd[k] = g.qd[k].cwiseMax(kb.qd_min).cwiseMin(kb.qd_max);
    g.tau[k] = g.tau[k].cwiseMax(kb.tau_min).cwiseMin(kb.tau_max);
    for (int i = 0; i + 1 < g.force[k].size(); i += 2) {
      double fz = std::clamp(g.force[k][i + 1], kb.f_min[1], kb.f_max[1]);
      double cap = kFrictionCoefficient * fz;
      cap = std::min(cap, kb.f_max[0]);
      g.force[k][i + 1] = fz;
      g.force[k][i] = std::clamp(g.force[k][i], -cap, cap);
    }
  }
  for (int k = N - kPrelandingKnots; k < N; ++k) {
    g.qd[k].segment<4>(3).setZero();
  }
  // The cycle wrap maps the last knot onto the first.
  g.qd[0].segment<4>(3).setZero();
}

std::string GaitValidation::describe() const {
  std::ostringstream os;
  os << (ok ? "valid" : "INVALID") << ": box " << max_box << ", friction "
     << max_friction << ", prelanding " << max_prelanding << ", defect " << max_defect
     << ", pin " << max_pin << ", periodicity " << max_periodicity << ", clearance "
     << max_clearance;
  return os.str();
}

GaitValidation validate_gait(const RobotModel& m, const GaitTrajectory& g) {
  if (!g.consistent()) {
    throw std::invalid_argument("validate_gait: structurally inconsistent gait");
  }
  const ContactSchedule& s = g.schedule;
  const int N = s.num_knots;
  const double dt = s.dt;
  const KnotBounds kb = jump_knot_bounds(m);
  const Vec7 zero7 = Vec7::Zero();
  GaitValidation v;

  for (int k = 0; k < N; ++k) {
    v.max_box = std::max(v.max_box, (kb.q_min - g.q[k]).maxCoeff());
    v.max_box = std::max(v.max_box, (g.q[k] - kb.q_max).maxCoeff());
    v.max_box = std::max(v.max_box, (kb.qd_min - g.qd[k]).maxCoeff());
    v.max_box = std::max(v.max_box, (g.qd[k] - kb.qd_max).maxCoeff());
    v.max_box = std::max(v.max_box, (kb.tau_min - g.tau[k]).maxCoeff());
    v.max_box = std::max(v.max_box, (g.tau[k] - kb.tau_max).maxCoeff());
    for (int i = 0; i + 1 < g.force[k].size(); i += 2) {
      const Vec2 f(g.force[k][i], g.force[k][i + 1]);
      v.max_box = std::max({v.max_box, kb.f_min[0] - f[0], f[0] - kb.f_max[0],
                            kb.f_min[1] - f[1], f[1] - kb.f_max[1]});
      v.max_friction =
          std::max(v.max_friction, std::abs(f[0]) - kFrictionCoefficient * f[1]);
    }
  }

  for (int k = N - kPrelandingKnots; k < N; ++k) {
    v.max_prelanding = std::max(
        v.max_prelanding, g.qd[k].segment<4>(3).cwiseAbs().maxCoeff());
  }

  std::vector<Vec7> acc(N);
  for (int k = 0; k < N; ++k) {
    ContactWrench w;
    w.set = s.at_knot(k);
    w.f = g.force[k];
    acc[k] = forward_accel(m, g.q[k], g.qd[k], g.tau[k], w);
  }
  for (int k = 0; k + 1 < N; ++k) {
    const Vec7 dq = g.q[k + 1] - g.q[k] - 0.5 * dt * (g.qd[k] + g.qd[k + 1]);
    const Vec7 dv = g.qd[k + 1] - g.qd[k] - 0.5 * dt * (acc[k] + acc[k + 1]);
    v.max_defect = std::max({v.max_defect, dq.cwiseAbs().maxCoeff(),
                             dv.cwiseAbs().maxCoeff()});
  }

  const Vec2 rear_target(-m.foot_spacing, 0.0);
  for (int k = 0; k < N; ++k) {
    const auto feet = foot_positions(m, GenCoords::from(g.q[k]));
    const ContactSet cs = s.at_knot(k);
    if (cs.front) {
      v.max_pin = std::max(v.max_pin, feet.first.cwiseAbs().maxCoeff());
    }
    if (cs.rear) {
      v.max_pin =
          std::max(v.max_pin, (feet.second - rear_target).cwiseAbs().maxCoeff());
    }
    if (cs.any()) {
      v.max_clearance = std::max(v.max_clearance, kTrunkMinHeight - g.q[k][1]);
    }
    for (Foot foot : {Foot::kFront, Foot::kRear}) {
      v.max_clearance =
          std::max(v.max_clearance,
                   kKneeMinHeight - knee_kin(m, g.q[k], zero7, foot).p.y());
      if (!cs.has(foot)) {
        const double z = foot == Foot::kFront ? feet.first.y() : feet.second.y();
        v.max_clearance = std::max(v.max_clearance, swing_threshold(s, foot, k) - z);
      }
    }
  }

  Vec7 shift = Vec7::Zero();
  shift[0] = g.jump_distance;
  v.max_periodicity = (g.q[N - 1] - g.q[0] - shift).cwiseAbs().maxCoeff();
  v.max_periodicity =
      std::max(v.max_periodicity, (g.qd[N - 1] - g.qd[0]).cwiseAbs().maxCoeff());

  v.ok = v.max_box <= 1e-6 && v.max_friction <= 1e-6 && v.max_prelanding <= 1e-6 &&
         v.max_defect <= 1e-3 && v.max_pin <= 1e-3 && v.max_periodicity <= 1e-3 &&
         v.max_clearance <= 1e-3;
  return v;
}

GaitTrajectory optimize_gait(const RobotModel& m, double jump_distance,
                             const TrajoptOptions& opts) {
  const TrajoptLayout layout = make_layout(default_jump_schedule());
  NlpProblem nlp = transcribe_jump(m, jump_distance, layout);
  nlp.x0 = initial_guess(m, jump_distance, layout);

  // Continuation on the joint-rate boxes. The touchdown instant is the hard
  // part: the pinned foot must stop while the trunk still moves, and the
  // joint rates that absorb the difference sit against their limits. Solving
  // first with widened rate boxes lets the optimizer settle the overall
  // cycle, then each tightening stage warms the next until the true limits
  // hold. Only the final, exact problem decides convergence.
  const ContactSchedule s = default_jump_schedule();
  const int N = s.num_knots;
  auto scale_rate_boxes = [&](NlpProblem& p, double beta) {
    for (int k = 0; k < N; ++k) {
      for (int j = 3; j < 7; ++j) {
        p.x_lower[layout.qd_offset(k) + j] *= beta;
        p.x_upper[layout.qd_offset(k) + j] *= beta;
      }
    }
  };

  NlpReport report;
  VecX warm = nlp.x0;
  const double stages[] = {2.0, 1.5, 1.2, 1.0};
  for (double beta : stages) {
    NlpProblem stage = nlp;
    scale_rate_boxes(stage, beta);
    stage.x0 = warm;
    NlpOptions nlp_opts = opts.nlp;
    nlp_opts.verbose = opts.verbose;
    if (beta > 1.0) {
      nlp_opts.max_outer_iterations =
          std::min(nlp_opts.max_outer_iterations, 12);
      nlp_opts.constraint_tolerance =
          std::max(nlp_opts.constraint_tolerance, 1e-4);
    }
    report = solve_augmented_lagrangian(stage, nlp_opts);
    warm = report.x;
  }

  GaitTrajectory g = unpack_gait(layout, report.x, jump_distance);
  polish_gait(m, g);
  const GaitValidation validation = validate_gait(m, g);
  if (!report.converged || !validation.ok) {
    std::ostringstream os;
    os << "optimize_gait(" << jump_distance << "): "
       << (report.converged ? "solver converged" : "solver did not converge")
       << " (violation " << report.constraint_violation << ", stationarity "
       << report.stationarity << ", outer " << report.outer_iterations
       << "), audit " << validation.describe();
    throw GaitOptimizationError(os.str(), report, validation);
  }
  return g;
}

}  // namespace stonehop

#include "stonehop/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stonehop {
namespace {

// Chain evaluator. A point is reached from the floating base through up to three
// rotated segments; each segment R(angle) * vec rotating with the listed coordinate
// indices contributes
//   position:  R * vec
//   velocity:  w * perp(R * vec)          w = sum of qd over the indices
//   Jacobian:  perp(R * vec) into every listed coordinate column
//   bias acc: -w^2 * (R * vec)            (qddot = 0 term)
struct ChainBuilder {
  PointKin k;

  ChainBuilder(const Vec7& q, const Vec7& qd) {
    k.p = Vec2(q[0], q[1]);
    k.v = Vec2(qd[0], qd[1]);
    k.J(0, 0) = 1.0;
    k.J(1, 1) = 1.0;
  }

  void add(double angle, double w, const Vec2& vec, std::initializer_list<int> coords) {
    const Vec2 r = rot(angle) * vec;
    const Vec2 t = perp(r);
    k.p += r;
    k.v += w * t;
    k.acc_bias += -w * w * r;
    for (int c : coords) {
      k.J(0, c) += t.x();
      k.J(1, c) += t.y();
    }
  }
};

// depth: 1 = point on thigh at distance r1 from hip, 2 = point on shank at
// distance r2 from knee (with the full thigh l1 in between).
PointKin leg_point(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot,
                   int depth, double r1, double r2) {
  const int jh = foot == Foot::kFront ? 3 : 5;
  const int jk = jh + 1;
  const double th = q[2];
  const double wth = qd[2];

  ChainBuilder b(q, qd);
  b.add(th, wth, Vec2(m.hip_x(foot), 0.0), {2});
  const double a1 = th + q[jh];
  const double w1 = wth + qd[jh];
  if (depth == 1) {
    b.add(a1, w1, Vec2(0.0, -r1), {2, jh});
    return b.k;
  }
  b.add(a1, w1, Vec2(0.0, -m.l1), {2, jh});
  const double a2 = a1 + q[jk];
  const double w2 = w1 + qd[jk];
  b.add(a2, w2, Vec2(0.0, -r2), {2, jh, jk});
  return b.k;
}

}  // namespace

PointKin trunk_com_kin(const RobotModel& m, const Vec7& q, const Vec7& qd) {
  ChainBuilder b(q, qd);
  b.add(q[2], qd[2], m.c_trunk, {2});
  return b.k;
}

PointKin hip_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot) {
  ChainBuilder b(q, qd);
  b.add(q[2], qd[2], Vec2(m.hip_x(foot), 0.0), {2});
  return b.k;
}

PointKin knee_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot) {
  return leg_point(m, q, qd, foot, 1, m.l1, 0.0);
}

PointKin foot_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot) {
  return leg_point(m, q, qd, foot, 2, m.l1, m.l2);
}

PointKin thigh_com_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot) {
  return leg_point(m, q, qd, foot, 1, m.c_thigh, 0.0);
}

PointKin shank_com_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot) {
  return leg_point(m, q, qd, foot, 2, m.l1, m.c_shank);
}

std::pair<Vec2, Vec2> foot_positions(const RobotModel& m, const GenCoords& q) {
  const Vec7 qv = q.vec();
  const Vec7 zero = Vec7::Zero();
  return {foot_kin(m, qv, zero, Foot::kFront).p, foot_kin(m, qv, zero, Foot::kRear).p};
}

MatX contact_jacobian(const RobotModel& m, const GenCoords& q, ContactSet contacts) {
  if (!contacts.any()) {
    throw std::invalid_argument("contact_jacobian: no contact");
  }
  const Vec7 qv = q.vec();
  const Vec7 zero = Vec7::Zero();
  MatX J(2 * contacts.count(), 7);
  int row = 0;
  if (contacts.front) {
    J.middleRows<2>(row) = foot_kin(m, qv, zero, Foot::kFront).J;
    row += 2;
  }
  if (contacts.rear) {
    J.middleRows<2>(row) = foot_kin(m, qv, zero, Foot::kRear).J;
  }
  return J;
}

VecX contact_jdot_qdot(const RobotModel& m, const Vec7& q, const Vec7& qd,
                       ContactSet contacts) {
  VecX out(2 * contacts.count());
  int row = 0;
  if (contacts.front) {
    out.segment<2>(row) = foot_kin(m, q, qd, Foot::kFront).acc_bias;
    row += 2;
  }
  if (contacts.rear) {
    out.segment<2>(row) = foot_kin(m, q, qd, Foot::kRear).acc_bias;
  }
  return out;
}

Mat2 leg_jacobian(const RobotModel& m, const Vec7& q, Foot foot) {
  const Vec7 zero = Vec7::Zero();
  const Mat27 J = foot_kin(m, q, zero, foot).J;
  const int jh = foot == Foot::kFront ? 3 : 5;
  Mat2 Jl;
  Jl.col(0) = J.col(jh);
  Jl.col(1) = J.col(jh + 1);
  return Jl;
}

Vec2 leg_ik(const RobotModel& m, const Vec2& foot_minus_hip, double pitch) {
  const double lo = std::abs(m.l1 - m.l2) + 1e-6;
  const double hi = m.l1 + m.l2 - 1e-6;
  double L = foot_minus_hip.norm();
  Vec2 r = foot_minus_hip;
  if (L < 1e-12) {
    r = Vec2(0.0, -lo);
    L = lo;
  }
  const double Lc = std::clamp(L, lo, hi);
  r *= Lc / L;

  const double ck =
      std::clamp((Lc * Lc - m.l1 * m.l1 - m.l2 * m.l2) / (2.0 * m.l1 * m.l2), -1.0, 1.0);
  const double qk = -std::acos(ck);
  // Absolute angle of the hip-to-foot ray in the "straight down = 0" convention.
  const double phi = std::atan2(r.x(), -r.y());
  const double a1 = phi - std::atan2(m.l2 * std::sin(qk), m.l1 + m.l2 * std::cos(qk));
  return Vec2(a1 - pitch, qk);
}

Vec4 nominal_posture() { return Vec4(0.6, -1.2, 0.6, -1.2); }

double standing_trunk_height(const RobotModel& m) {
  const Vec4 p = nominal_posture();
  return m.l1 * std::cos(p[0]) + m.l2 * std::cos(p[0] + p[1]);
}

}  // namespace stonehop

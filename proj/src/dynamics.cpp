#include "stonehop/dynamics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>

namespace stonehop {
namespace {

struct LinkList {
  // (kinematics, mass, rotational inertia, angle-coordinate indices)
  struct Link {
    PointKin kin;
    double mass;
    double inertia;
    int coords[3];
    int ncoords;
  };
  Link links[5];

  LinkList(const RobotModel& m, const Vec7& q, const Vec7& qd) {
    links[0] = {trunk_com_kin(m, q, qd), m.trunk_mass(), m.trunk_pitch_inertia(), {2, 0, 0}, 1};
    links[1] = {thigh_com_kin(m, q, qd, Foot::kFront), m.m_thigh, m.I_thigh, {2, 3, 0}, 2};
    links[2] = {shank_com_kin(m, q, qd, Foot::kFront), m.m_shank, m.I_shank, {2, 3, 4}, 3};
    links[3] = {thigh_com_kin(m, q, qd, Foot::kRear), m.m_thigh, m.I_thigh, {2, 5, 0}, 2};
    links[4] = {shank_com_kin(m, q, qd, Foot::kRear), m.m_shank, m.I_shank, {2, 5, 6}, 3};
  }
};

}  // namespace

Mat7 mass_matrix(const RobotModel& m, const Vec7& q) {
  const Vec7 zero = Vec7::Zero();
  LinkList list(m, q, zero);
  Mat7 M = Mat7::Zero();
  for (const auto& link : list.links) {
    M.noalias() += link.mass * link.kin.J.transpose() * link.kin.J;
    // Angular part: the link angle is the plain sum of its angle coordinates, so
    // the angular Jacobian is a constant 0/1 row.
    for (int a = 0; a < link.ncoords; ++a) {
      for (int b = 0; b < link.ncoords; ++b) {
        M(link.coords[a], link.coords[b]) += link.inertia;
      }
    }
  }
  return M;
}

Vec7 bias_forces(const RobotModel& m, const Vec7& q, const Vec7& qd) {
  LinkList list(m, q, qd);
  const Vec2 gvec(0.0, m.gravity);
  Vec7 h = Vec7::Zero();
  for (const auto& link : list.links) {
    h.noalias() += link.mass * link.kin.J.transpose() * (link.kin.acc_bias + gvec);
  }
  return h;
}

Vec4 joint_friction(const RobotModel& m, const Vec7& qd) {
  Vec4 tf;
  for (int i = 0; i < 4; ++i) {
    const double w = qd[3 + i];
    tf[i] = -m.b_viscous * w - m.b_coulomb * std::tanh(100.0 * w);
  }
  return tf;
}

ContactDynamicsResult contact_dynamics(const RobotModel& m, const Vec7& q,
                                       const Vec7& qd, const Vec4& tau,
                                       ContactSet contacts) {
  const Mat7 M = mass_matrix(m, q);
  Vec7 rhs1 = -bias_forces(m, q, qd);
  rhs1.segment<4>(3) += tau + joint_friction(m, qd);

  ContactDynamicsResult out;
  out.force = ContactWrench::zero(contacts);
  if (!contacts.any()) {
    out.qdd = Eigen::LLT<Mat7>(M).solve(rhs1);
    return out;
  }

  GenCoords qc = GenCoords::from(q);
  const MatX Jc = contact_jacobian(m, qc, contacts);
  const VecX jdqd = contact_jdot_qdot(m, q, qd, contacts);
  const int k = 2 * contacts.count();
  const int n = 7 + k;
  MatX K = MatX::Zero(n, n);
  K.topLeftCorner<7, 7>() = M;
  K.topRightCorner(7, k) = -Jc.transpose();
  K.bottomLeftCorner(k, 7) = -Jc;
  VecX rhs(n);
  rhs.head<7>() = rhs1;
  rhs.tail(k) = jdqd;

  Eigen::FullPivLU<MatX> lu(K);
  const auto& U = lu.matrixLU();
  double pmax = 0.0, pmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double p = std::abs(U(i, i));
    pmax = std::max(pmax, p);
    pmin = std::min(pmin, p);
  }
  const double cond = pmin > 0.0 ? pmax / pmin : std::numeric_limits<double>::infinity();
  if (!(cond < 1e12)) throw SingularDynamics(cond);

  const VecX sol = lu.solve(rhs);
  out.qdd = sol.head<7>();
  out.force.f = sol.tail(k);
  return out;
}

Vec7 forward_accel(const RobotModel& m, const Vec7& q, const Vec7& qd, const Vec4& tau,
                   const ContactWrench& f) {
  Vec7 rhs = -bias_forces(m, q, qd);
  rhs.segment<4>(3) += tau + joint_friction(m, qd);
  if (f.set.any()) {
    GenCoords qc = GenCoords::from(q);
    const MatX Jc = contact_jacobian(m, qc, f.set);
    rhs.noalias() += Jc.transpose() * f.f;
  }
  return Eigen::LLT<Mat7>(mass_matrix(m, q)).solve(rhs);
}

Eigen::Matrix<double, 7, 1> srb_state(const RobotModel& m, const GenCoords& q,
                                      const Vec7& qd) {
  Eigen::Matrix<double, 7, 1> x;
  x << q.x, q.z, q.pitch, qd[0], qd[1], qd[2], m.gravity;
  return x;
}

double mechanical_energy(const RobotModel& m, const Vec7& q, const Vec7& qd) {
  const double kinetic = 0.5 * qd.dot(mass_matrix(m, q) * qd);
  LinkList list(m, q, qd);
  double potential = 0.0;
  for (const auto& link : list.links) {
    potential += link.mass * m.gravity * link.kin.p.y();
  }
  return kinetic + potential;
}

}  // namespace stonehop

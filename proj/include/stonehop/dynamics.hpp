#pragma once

#include <stdexcept>

#include "stonehop/kinematics.hpp"
#include "stonehop/robot_model.hpp"
#include "stonehop/types.hpp"

namespace stonehop {

// Raised when the contact KKT system is numerically singular (e.g. a fully
// stretched leg makes the constraint Jacobian lose rank).
struct SingularDynamics : std::runtime_error {
  explicit SingularDynamics(double cond)
      : std::runtime_error("contact dynamics KKT system is singular (condition ~ " +
                           std::to_string(cond) + ")"),
        condition(cond) {}
  double condition;
};

// Joint-space mass matrix (7x7, symmetric positive definite).
Mat7 mass_matrix(const RobotModel& m, const Vec7& q);

// Coriolis/centrifugal plus gravity generalized forces: C(q,qd) qd + g(q).
// Equations of motion: M qdd + bias = S tau + S tau_f + Jc^T f.
Vec7 bias_forces(const RobotModel& m, const Vec7& q, const Vec7& qd);

// Viscous + smoothed Coulomb joint friction torque (zero with default parameters).
Vec4 joint_friction(const RobotModel& m, const Vec7& qd);

struct ContactDynamicsResult {
  Vec7 qdd;
  ContactWrench force;
};

// Forward dynamics under hard contact constraints: solves the KKT system
//   [ M   -Jc^T ] [qdd]   [ S tau + S tau_f - bias ]
//   [ -Jc   0   ] [ f ] = [ Jdot qd                ]
// so that contacting feet have zero acceleration. An empty contact set takes the
// unconstrained branch. Throws SingularDynamics when the KKT matrix condition
// estimate exceeds 1e12.
ContactDynamicsResult contact_dynamics(const RobotModel& m, const Vec7& q,
                                       const Vec7& qd, const Vec4& tau,
                                       ContactSet contacts);

// Forward dynamics with the contact forces given explicitly (used by the
// trajectory transcription, where forces are decision variables):
// qdd = M^-1 (S tau + S tau_f + Jc^T f - bias).
Vec7 forward_accel(const RobotModel& m, const Vec7& q, const Vec7& qd, const Vec4& tau,
                   const ContactWrench& f);

// Single-rigid-body view of the full state: [x, z, pitch, vx, vz, pitch rate, g].
// The trunk frame origin is constructed to coincide with the nominal whole-body
// COM, so position and pitch map through unchanged.
Eigen::Matrix<double, 7, 1> srb_state(const RobotModel& m, const GenCoords& q,
                                      const Vec7& qd);

// Kinetic plus gravitational potential energy (potential zero at z = 0).
double mechanical_energy(const RobotModel& m, const Vec7& q, const Vec7& qd);

}  // namespace stonehop

#pragma once
// Single-rigid-body model predictive controller for stance forces.
//
// The trunk is modeled as one rigid body with state [p, pitch, v, pitch rate,
// g]; gravity rides along as a constant state so the linear dynamics are
// exact for ballistic motion. Contact forces enter through time-varying input
// matrices built from the reference foot anchors. The horizon problem is
// condensed onto the stacked stance forces and solved as a small dense QP
// with friction-cone rows.

#include <vector>

#include "stonehop/qp.hpp"
#include "stonehop/robot_model.hpp"
#include "stonehop/terrain.hpp"
#include "stonehop/types.hpp"

namespace stonehop {

using SrbState = Eigen::Matrix<double, 7, 1>;  // [x, z, pitch, vx, vz, w, g]

struct MpcStep {
  // Contact mode over this interval; forces are decision variables only for
  // feet in this set.
  ContactSet mode;
  Vec2 front_anchor = Vec2::Zero();  // stance foot positions (same frame as x)
  Vec2 rear_anchor = Vec2::Zero();
  SrbState x_ref = SrbState::Zero();  // desired state at the END of the interval
  VecX f_ref;                         // reference forces (2 per stance foot)
};

struct MpcOptions {
  double dt = 0.034;
  Vec7 state_weights = (Vec7() << 50.0, 100.0, 150.0, 1.0, 1.0, 2.0, 0.0).finished();
  double terminal_scale = 10.0;
  double force_weight = 1e-3;
  double fz_max = 500.0;
  double mu = kFrictionCoefficient;
};

struct MpcSolution {
  ContactWrench wrench;      // first-interval forces (the ones applied)
  std::vector<VecX> forces;  // per interval
  QpStatus status = QpStatus::kOptimal;
  double objective = 0.0;
};

// Exact zero-order-hold discretization of the rigid-body dynamics (the
// continuous system matrix is nilpotent, so the series is finite).
Eigen::Matrix<double, 7, 7> srb_system_matrix(double dt);

// Discrete input matrix for one interval: columns (fx, fz) per stance foot,
// front first, with moment arms taken at the reference anchors relative to
// the reference body position.
MatX srb_input_matrix(const RobotModel& m, const MpcStep& step, double dt);

// Rigid-body pitch inertia used by the controller: the trunk's own inertia
// (plus any payload), leaving out the light, fast-moving legs.
double srb_pitch_inertia(const RobotModel& m);

// Solves the horizon problem from state x0. An all-swing horizon returns the
// reference forces (empty at step 0). A failed QP falls back to the reference
// forces with the failure status attached.
MpcSolution solve_srb_mpc(const RobotModel& m, const SrbState& x0,
                          const std::vector<MpcStep>& steps,
                          const MpcOptions& opts = {});

}  // namespace stonehop

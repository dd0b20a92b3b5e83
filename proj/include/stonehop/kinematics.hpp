#pragma once

#include <utility>

#include "stonehop/robot_model.hpp"
#include "stonehop/types.hpp"

namespace stonehop {

// Kinematics of one material point of the mechanism: world position, world
// velocity, 2x7 Jacobian, and the velocity-product acceleration Jdot * qdot
// (the acceleration the point would have with qddot = 0).
struct PointKin {
  Vec2 p = Vec2::Zero();
  Vec2 v = Vec2::Zero();
  Vec2 acc_bias = Vec2::Zero();
  Mat27 J = Mat27::Zero();
};

PointKin trunk_com_kin(const RobotModel& m, const Vec7& q, const Vec7& qd);
PointKin hip_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot);
PointKin knee_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot);
PointKin foot_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot);
PointKin thigh_com_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot);
PointKin shank_com_kin(const RobotModel& m, const Vec7& q, const Vec7& qd, Foot foot);

// World positions of (front, rear) feet.
std::pair<Vec2, Vec2> foot_positions(const RobotModel& m, const GenCoords& q);

// Stacked foot Jacobian for the contacting feet, front rows first, size 2k x 7.
// Throws std::invalid_argument for an empty contact set.
MatX contact_jacobian(const RobotModel& m, const GenCoords& q, ContactSet contacts);

// Stacked velocity-product acceleration Jdot * qdot of the contacting feet (2k).
VecX contact_jdot_qdot(const RobotModel& m, const Vec7& q, const Vec7& qd,
                       ContactSet contacts);

// Foot-position Jacobian with respect to that leg's two joints only (world frame).
Mat2 leg_jacobian(const RobotModel& m, const Vec7& q, Foot foot);

// Two-link inverse kinematics for one leg: returns (hip, knee) angles placing the
// foot at `foot_minus_hip` (world-frame offset from the hip) given trunk pitch.
// Always picks the knee-bent-backward branch (knee angle <= 0). Out-of-reach
// targets are clamped to the reachable annulus.
Vec2 leg_ik(const RobotModel& m, const Vec2& foot_minus_hip, double pitch);

// Reference crouch posture [front hip, front knee, rear hip, rear knee] shared
// by the gait optimizer, the controller's stand, and the rigid-body model.
Vec4 nominal_posture();

// Trunk height that puts the feet on the ground in the nominal posture (the
// feet sit directly below the hips there).
double standing_trunk_height(const RobotModel& m);

}  // namespace stonehop

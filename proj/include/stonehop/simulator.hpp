#pragma once

#include <optional>
#include <vector>

#include "stonehop/dynamics.hpp"
#include "stonehop/robot_model.hpp"
#include "stonehop/terrain.hpp"
#include "stonehop/types.hpp"

namespace stonehop {

enum class EventKind { kTouchdown, kLiftoff };

struct ContactEvent {
  double t = 0.0;
  Foot foot = Foot::kFront;
  EventKind kind = EventKind::kTouchdown;
  Vec2 location = Vec2::Zero();
};

struct SimState {
  double t = 0.0;
  Vec7 q = Vec7::Zero();
  Vec7 qd = Vec7::Zero();
  ContactSet contacts;
  Vec2 front_anchor = Vec2::Zero();  // pin position while the foot is in contact
  Vec2 rear_anchor = Vec2::Zero();
  bool crashed = false;
};

struct SimStepResult {
  SimState state;
  std::vector<ContactEvent> events;
  ContactWrench force;  // contact forces at the start of the step
};

// Builds a consistent state: anchors are set to the current foot positions for
// every contacting foot.
SimState make_sim_state(const RobotModel& m, const Vec7& q, const Vec7& qd,
                        ContactSet contacts, double t = 0.0);

// Inelastic impact: projects qd onto the constraint manifold of `contacts`
// (post-impact foot velocities are zero, kinetic energy never increases).
Vec7 impact_map(const RobotModel& m, const Vec7& q, const Vec7& qd,
                ContactSet contacts);

// Advances one fixed step with hard-pinned contacts (infinite friction; the
// friction cone is the controller's responsibility).
//
//  - torque is clamped to +-tau_max;
//  - a stance foot is released when its normal force is negative AND the
//    commanded contact set (when given) marks it swing: the commanded schedule is
//    authoritative during push-off, and the gate suppresses touchdown chatter;
//  - touchdown: height crossing located by linear interpolation inside the step,
//    the state re-integrated from the crossing, then the impact map applied;
//  - constraint drift removed by mass-weighted position/velocity projection;
//  - trunk below terrain (or a severe tumble) marks the state crashed, which is
//    terminal: stepping a crashed state returns it unchanged.
SimStepResult step(const RobotModel& m, const SimState& state, const Vec4& tau,
                   const Terrain& terrain, double dt,
                   std::optional<ContactSet> commanded = std::nullopt);

}  // namespace stonehop

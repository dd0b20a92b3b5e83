#pragma once
// Runtime controller for continuous jumping across a stone row.
//
// A phase machine runs one gait cycle per jump: the cycle clock resets on
// front touchdown, resynchronizes when both feet are down, and near the end
// of the cycle selects (by library interpolation) the gait for the next
// measured stone spacing. Stance legs track the gait feedforward torque plus
// a joint PD plus a force correction mapped from the rigid-body MPC; swing
// legs track gait joint angles with a PD; in the pre-landing window the legs
// switch to Cartesian foot control toward the next stone's landing points.
// After the last stone the controller settles into a stand.

#include <optional>

#include "stonehop/gait_library.hpp"
#include "stonehop/robot_model.hpp"
#include "stonehop/simulator.hpp"
#include "stonehop/srb_mpc.hpp"
#include "stonehop/terrain.hpp"

namespace stonehop {

enum class JumpPhase { kCycle, kSettle, kAborted };

struct ControllerGains {
  double stance_kp = 20.0;   // joint-space, stance legs
  double stance_kd = 1.0;
  double swing_kp = 300.0;   // joint-space, swing legs
  double swing_kd = 3.0;
  double landing_kp = 700.0;  // Cartesian, pre-landing foot placement
  double landing_kd = 10.0;
  double settle_kp = 60.0;   // joint-space, final stand
  double settle_kd = 4.0;
};

struct JumpControllerConfig {
  RobotModel model;  // controller-side model (payload-free)
  GaitLibrary library;
  Terrain terrain;
  ControllerGains gains;
  MpcOptions mpc;
  double tick_dt = 0.001;
  int mpc_interval_ticks = 34;  // one solve per interval, applied until the next
  int mpc_horizon = 10;
  bool use_mpc = true;         // off: stance legs run feedforward + PD only
  bool use_prelanding = true;  // off: swing legs keep the joint PD to the end
};

struct ControlOutput {
  Vec4 tau = Vec4::Zero();
  ContactSet commanded;
  JumpPhase phase = JumpPhase::kCycle;
  int stone_index = 0;
  double clock = 0.0;
  double gait_distance = 0.0;
  bool mpc_solved = false;          // this tick
  QpStatus mpc_status = QpStatus::kOptimal;
  ContactWrench mpc_wrench;         // latest solution (step-0 forces)
  bool singular_guard = false;      // a Cartesian/force mapping was scaled down
};

class JumpController {
 public:
  explicit JumpController(JumpControllerConfig cfg);

  // Start-of-scenario whole-body state: the double-stance posture of the
  // first gait placed on stone 0, at rest.
  Vec7 initial_q() const;
  Vec7 initial_qd() const { return Vec7::Zero(); }
  ContactSet initial_contacts() const { return {true, true}; }

  // One 1 kHz control step. Consumes the measured state, advances the phase
  // machine (contact-edge driven, so repeated identical states cause no
  // repeated transitions), and returns torques plus the commanded contacts.
  ControlOutput tick(const SimState& s);

  JumpPhase phase() const { return phase_; }
  int stone_index() const { return stone_index_; }
  double clock() const { return clock_; }
  Vec2 anchor() const { return anchor_; }
  const GaitTrajectory& current_gait() const { return gait_; }

 private:
  void advance_cycle(const SimState& s);
  void enter_settle();
  void select_next_gait();
  std::vector<MpcStep> build_cycle_steps(const SimState& s) const;
  std::vector<MpcStep> build_settle_steps(const SimState& s) const;
  void run_mpc(const SimState& s);
  // Maps a desired foot force through the leg Jacobian transpose, scaling it
  // down near kinematic singularities (straight leg).
  Vec2 mapped_leg_torque(const Vec7& q, Foot foot, const Vec2& force,
                         bool* guarded) const;
  void stance_torque(const SimState& s, Foot foot, ControlOutput& out) const;
  void swing_torque(const SimState& s, Foot foot, ControlOutput& out) const;
  void settle_torques(const SimState& s, ControlOutput& out) const;
  bool envelope_exceeded(const SimState& s) const;
  double next_stone_height_delta() const;  // gait-frame top of the next stone

  JumpControllerConfig cfg_;
  GaitTrajectory gait_;
  std::optional<GaitTrajectory> next_gait_;
  JumpPhase phase_ = JumpPhase::kCycle;
  int stone_index_ = 0;   // stone currently under the front feet
  Vec2 anchor_ = Vec2::Zero();  // world position of the gait-frame origin
  double clock_ = 0.0;
  long tick_count_ = 0;
  ContactSet prev_contacts_;
  bool resynced_ = false;
  bool prelanding_armed_ = false;
  bool mpc_due_ = true;
  ContactWrench mpc_wrench_;
  QpStatus mpc_status_ = QpStatus::kOptimal;
  Vec7 settle_q_ = Vec7::Zero();  // world-frame stand reference
};

}  // namespace stonehop

#pragma once
// Scenario runner: wires the controller to the physics loop, records
// per-tick logs and contact events, and scores the run.
//
// Each control tick consumes the measured state, then the returned torque is
// held over the tick while the physics integrates (optionally substepped). A
// run succeeds when the robot ends standing on the last stone: settle phase,
// both feet on that stone, small pitch, and velocities near rest.

#include <string>
#include <vector>

#include "stonehop/gait_library.hpp"
#include "stonehop/jump_controller.hpp"
#include "stonehop/scenario.hpp"
#include "stonehop/simulator.hpp"

namespace stonehop {

struct TickLog {
  double t = 0.0;
  Vec7 q = Vec7::Zero();
  Vec7 qd = Vec7::Zero();
  Vec4 tau = Vec4::Zero();
  Vec2 front_force = Vec2::Zero();  // contact force at the start of the tick
  Vec2 rear_force = Vec2::Zero();
  ContactSet contacts;
  ContactSet commanded;
  int stone_index = 0;
  JumpPhase phase = JumpPhase::kCycle;
  double clock = 0.0;
  bool mpc_solved = false;
  bool crashed = false;
};

struct LandingRecord {
  double t = 0.0;
  int stone = -1;         // stone containing the touchdown point (-1: missed)
  double error_x = 0.0;   // touchdown x minus the stone's front-foot target
};

struct RunMetrics {
  bool success = false;
  std::string failure;     // empty on success
  bool crashed = false;
  int jumps_completed = 0;  // stones advanced past the starting stone
  double max_abs_pitch = 0.0;
  double final_abs_pitch = 0.0;
  double max_abs_torque = 0.0;
  double max_joint_speed = 0.0;
  double max_landing_error = 0.0;  // over front-foot touchdowns
  std::vector<LandingRecord> landings;
  double simulated_time = 0.0;
};

struct RunResult {
  std::vector<TickLog> log;
  std::vector<ContactEvent> events;
  SimState final_state;
  JumpPhase final_phase = JumpPhase::kCycle;
  Terrain stones;  // the resolved row the run used
  RunMetrics metrics;
};

// Success thresholds.
inline constexpr double kSuccessPitch = 0.2;       // |pitch| at the end [rad]
inline constexpr double kSettleTrunkSpeed = 0.05;  // [m/s]
inline constexpr double kSettleJointSpeed = 0.5;   // [rad/s]

RunResult run_scenario(const Scenario& scenario, const RobotModel& base,
                       const GaitLibrary& library, unsigned seed);

// Scored purely from the recorded rows and events (no controller state), so a
// saved log can be re-scored offline.
RunMetrics compute_metrics(const std::vector<TickLog>& log,
                           const std::vector<ContactEvent>& events,
                           const Terrain& stones, const RobotModel& model);

// Per-tick rows as CSV (one header line; doubles round-trip exactly).
void save_tick_log(const std::vector<TickLog>& log, const std::string& path);
std::vector<TickLog> load_tick_log(const std::string& path);

void save_events(const std::vector<ContactEvent>& events, const std::string& path);
std::vector<ContactEvent> load_events(const std::string& path);

// Human-readable run summary (scenario echo, stone row, metrics, landings).
void save_report(const Scenario& scenario, unsigned seed, const RunResult& r,
                 const std::string& path);

}  // namespace stonehop

#include "stonehop/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "stonehop/kinematics.hpp"

namespace stonehop {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RobotModel& base,
                       const GaitLibrary& library, unsigned seed) {
  if (scenario.sim_substeps < 1 || !(scenario.control_dt > 0.0)) {
    throw std::invalid_argument("run_scenario: bad rate settings");
  }
  const ResolvedScenario rs = resolve_scenario(scenario, base, seed);

  JumpControllerConfig cc;
  cc.model = rs.ctrl_model;
  cc.library = library;
  cc.terrain = rs.stones;
  cc.tick_dt = scenario.control_dt;
  cc.use_mpc = scenario.use_mpc;
  cc.use_prelanding = scenario.use_prelanding;
  JumpController ctrl(cc);

  SimState state = make_sim_state(rs.sim_model, ctrl.initial_q(),
                                  ctrl.initial_qd(), ctrl.initial_contacts());

  RunResult r;
  r.stones = rs.stones;
  const int ticks =
      static_cast<int>(std::llround(scenario.duration / scenario.control_dt));
  const double sub_dt = scenario.control_dt / scenario.sim_substeps;
  r.log.reserve(ticks);

  for (int i = 0; i < ticks; ++i) {
    const ControlOutput out = ctrl.tick(state);

    TickLog row;
    row.t = state.t;
    row.q = state.q;
    row.qd = state.qd;
    row.tau = out.tau;
    row.contacts = state.contacts;
    row.commanded = out.commanded;
    row.stone_index = out.stone_index;
    row.phase = out.phase;
    row.clock = out.clock;
    row.mpc_solved = out.mpc_solved;
    row.crashed = state.crashed;

    for (int k = 0; k < scenario.sim_substeps; ++k) {
      SimStepResult sr =
          step(rs.sim_model, state, out.tau, rs.sim_terrain, sub_dt, out.commanded);
      state = sr.state;
      if (k == 0) {
        row.front_force = sr.force.front();
        row.rear_force = sr.force.rear();
      }
      for (const ContactEvent& e : sr.events) r.events.push_back(e);
      if (state.crashed) break;
    }
    r.log.push_back(row);
    if (state.crashed || out.phase == JumpPhase::kAborted) break;
  }

  r.final_state = state;
  r.final_phase = ctrl.phase();
  if (!r.log.empty()) {
    r.log.back().crashed = r.log.back().crashed || state.crashed;
  }
  r.metrics = compute_metrics(r.log, r.events, r.stones, rs.ctrl_model);
  return r;
}

RunMetrics compute_metrics(const std::vector<TickLog>& log,
                           const std::vector<ContactEvent>& events,
                           const Terrain& stones, const RobotModel& model) {
  RunMetrics m;
  if (log.empty()) {
    m.failure = "empty log";
    return m;
  }

  int max_stone = 0;
  for (const TickLog& row : log) {
    m.max_abs_pitch = std::max(m.max_abs_pitch, std::abs(row.q[2]));
    m.max_abs_torque =
        std::max(m.max_abs_torque, row.tau.cwiseAbs().maxCoeff());
    m.max_joint_speed =
        std::max(m.max_joint_speed, row.qd.tail<4>().cwiseAbs().maxCoeff());
    m.crashed = m.crashed || row.crashed;
    max_stone = std::max(max_stone, row.stone_index);
  }
  m.jumps_completed = max_stone;
  m.simulated_time = log.back().t;

  // Front-foot touchdown accuracy versus each stone's front landing target
  // (half a foot spacing ahead of the stone center).
  for (const ContactEvent& e : events) {
    if (e.kind != EventKind::kTouchdown || e.foot != Foot::kFront) continue;
    LandingRecord rec;
    rec.t = e.t;
    const auto idx = stones.stone_under(e.location);
    rec.stone = idx.value_or(-1);
    if (rec.stone >= 0) {
      const double target =
          stones.stones[rec.stone].center_x + 0.5 * model.foot_spacing;
      rec.error_x = e.location.x() - target;
      m.max_landing_error =
          std::max(m.max_landing_error, std::abs(rec.error_x));
    }
    m.landings.push_back(rec);
  }

  const TickLog& last = log.back();
  m.final_abs_pitch = std::abs(last.q[2]);
  const int goal = static_cast<int>(stones.stones.size()) - 1;

  auto fail = [&m](const std::string& why) {
    m.success = false;
    m.failure = why;
  };
  if (m.crashed) {
    fail("crashed");
  } else if (last.phase == JumpPhase::kAborted) {
    fail("controller aborted");
  } else if (last.stone_index != goal) {
    fail("stopped at stone " + std::to_string(last.stone_index) + " of " +
         std::to_string(goal));
  } else if (last.phase != JumpPhase::kSettle) {
    fail("never reached the settle phase");
  } else if (!(last.contacts.front && last.contacts.rear)) {
    fail("not standing on both feet at the end");
  } else if (m.final_abs_pitch > kSuccessPitch) {
    fail("final pitch " + fmt(m.final_abs_pitch) + " exceeds " +
         fmt(kSuccessPitch));
  } else if (last.qd.head<2>().cwiseAbs().maxCoeff() > kSettleTrunkSpeed ||
             last.qd.tail<4>().cwiseAbs().maxCoeff() > kSettleJointSpeed) {
    fail("not at rest at the end");
  } else {
    const auto [pf, pr] = foot_positions(model, GenCoords::from(last.q));
    const auto sf = stones.stone_under(pf);
    const auto sr = stones.stone_under(pr);
    if (!sf || *sf != goal || !sr || *sr != goal) {
      fail("feet not on the final stone");
    } else {
      m.success = true;
    }
  }
  return m;
}

void save_tick_log(const std::vector<TickLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write log file: " + path);
  out << "t";
  for (int i = 0; i < 7; ++i) out << ",q" << i;
  for (int i = 0; i < 7; ++i) out << ",qd" << i;
  for (int i = 0; i < 4; ++i) out << ",tau" << i;
  out << ",front_fx,front_fz,rear_fx,rear_fz"
      << ",contact_front,contact_rear,commanded_front,commanded_rear"
      << ",stone_index,phase,clock,mpc_solved,crashed\n";
  for (const TickLog& r : log) {
    out << fmt(r.t);
    for (int i = 0; i < 7; ++i) out << ',' << fmt(r.q[i]);
    for (int i = 0; i < 7; ++i) out << ',' << fmt(r.qd[i]);
    for (int i = 0; i < 4; ++i) out << ',' << fmt(r.tau[i]);
    out << ',' << fmt(r.front_force.x()) << ',' << fmt(r.front_force.y()) << ','
        << fmt(r.rear_force.x()) << ',' << fmt(r.rear_force.y());
    out << ',' << int(r.contacts.front) << ',' << int(r.contacts.rear) << ','
        << int(r.commanded.front) << ',' << int(r.commanded.rear);
    out << ',' << r.stone_index << ',' << static_cast<int>(r.phase) << ','
        << fmt(r.clock) << ',' << int(r.mpc_solved) << ',' << int(r.crashed)
        << '\n';
  }
}

std::vector<TickLog> load_tick_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open log file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty log file: " + path);

  std::vector<TickLog> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 32) {
      throw std::runtime_error("bad log row in " + path + ": " + line);
    }
    int c = 0;
    auto num = [&cells, &c]() { return std::stod(cells[c++]); };
    TickLog r;
    r.t = num();
    for (int i = 0; i < 7; ++i) r.q[i] = num();
    for (int i = 0; i < 7; ++i) r.qd[i] = num();
    for (int i = 0; i < 4; ++i) r.tau[i] = num();
    r.front_force.x() = num();
    r.front_force.y() = num();
    r.rear_force.x() = num();
    r.rear_force.y() = num();
    r.contacts.front = num() != 0.0;
    r.contacts.rear = num() != 0.0;
    r.commanded.front = num() != 0.0;
    r.commanded.rear = num() != 0.0;
    r.stone_index = static_cast<int>(num());
    r.phase = static_cast<JumpPhase>(static_cast<int>(num()));
    r.clock = num();
    r.mpc_solved = num() != 0.0;
    r.crashed = num() != 0.0;
    log.push_back(r);
  }
  return log;
}

void save_events(const std::vector<ContactEvent>& events,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write events file: " + path);
  out << "t,foot,kind,x,z\n";
  for (const ContactEvent& e : events) {
    out << fmt(e.t) << ',' << (e.foot == Foot::kFront ? "front" : "rear") << ','
        << (e.kind == EventKind::kTouchdown ? "touchdown" : "liftoff") << ','
        << fmt(e.location.x()) << ',' << fmt(e.location.y()) << '\n';
  }
}

std::vector<ContactEvent> load_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open events file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty events file: " + path);
  }
  std::vector<ContactEvent> events;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) {
      throw std::runtime_error("bad events row in " + path + ": " + line);
    }
    ContactEvent e;
    e.t = std::stod(cells[0]);
    e.foot = cells[1] == "front" ? Foot::kFront : Foot::kRear;
    e.kind = cells[2] == "touchdown" ? EventKind::kTouchdown : EventKind::kLiftoff;
    e.location.x() = std::stod(cells[3]);
    e.location.y() = std::stod(cells[4]);
    events.push_back(e);
  }
  return events;
}

void save_report(const Scenario& scenario, unsigned seed, const RunResult& r,
                 const std::string& path) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["scenario"] = scenario.name;
  j["seed"] = seed;

  ordered_json stones = ordered_json::array();
  for (const Stone& s : r.stones.stones) {
    stones.push_back({{"center_x", s.center_x},
                      {"top_z", s.top_z},
                      {"half_width", s.half_width}});
  }
  j["stones"] = stones;

  const RunMetrics& m = r.metrics;
  ordered_json jm;
  jm["success"] = m.success;
  if (!m.success) jm["failure"] = m.failure;
  jm["crashed"] = m.crashed;
  jm["jumps_completed"] = m.jumps_completed;
  jm["simulated_time"] = m.simulated_time;
  jm["max_abs_pitch"] = m.max_abs_pitch;
  jm["final_abs_pitch"] = m.final_abs_pitch;
  jm["max_abs_torque"] = m.max_abs_torque;
  jm["max_joint_speed"] = m.max_joint_speed;
  jm["max_landing_error"] = m.max_landing_error;
  ordered_json jl = ordered_json::array();
  for (const LandingRecord& rec : m.landings) {
    jl.push_back({{"t", rec.t}, {"stone", rec.stone}, {"error_x", rec.error_x}});
  }
  jm["landings"] = jl;
  j["metrics"] = jm;

  ordered_json je = ordered_json::array();
  for (const ContactEvent& e : r.events) {
    je.push_back({{"t", e.t},
                  {"foot", e.foot == Foot::kFront ? "front" : "rear"},
                  {"kind", e.kind == EventKind::kTouchdown ? "touchdown"
                                                           : "liftoff"},
                  {"x", e.location.x()},
                  {"z", e.location.y()}});
  }
  j["events"] = je;

  ordered_json jf;
  jf["t"] = r.final_state.t;
  jf["q"] = std::vector<double>(r.final_state.q.data(), r.final_state.q.data() + 7);
  jf["qd"] =
      std::vector<double>(r.final_state.qd.data(), r.final_state.qd.data() + 7);
  jf["crashed"] = r.final_state.crashed;
  j["final_state"] = jf;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace stonehop

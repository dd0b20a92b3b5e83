#pragma once
// A periodic jump gait: knot-point trajectories for the generalized
// coordinates, joint torques, and stance forces over one cycle, plus text
// serialization that round-trips doubles exactly.

#include <string>
#include <vector>

#include "stonehop/contact_schedule.hpp"
#include "stonehop/types.hpp"

namespace stonehop {

struct GaitTrajectory {
  // Forward displacement of the whole cycle: the trunk (and both landing
  // targets) advance by this much between consecutive landings.
  double jump_distance = 0.0;
  ContactSchedule schedule;
  std::vector<Vec7> q;    // one per knot
  std::vector<Vec7> qd;   // one per knot
  std::vector<Vec4> tau;  // joint torques, one per knot
  // Stacked stance forces per knot, front-first, 2 entries per stance foot;
  // size matches 2 * schedule.at_knot(k).count().
  std::vector<VecX> force;

  int num_knots() const { return static_cast<int>(q.size()); }
  bool consistent() const;

  // Knot-linear interpolation, t clamped to [0, period].
  Vec7 q_at(double t) const;
  Vec7 qd_at(double t) const;
  // Zero-order hold over the knot interval containing t.
  Vec4 tau_at(double t) const;
  ContactWrench force_at(double t) const;
};

void save_gait(const GaitTrajectory& g, const std::string& path);
GaitTrajectory load_gait(const std::string& path);

}  // namespace stonehop

#pragma once
// A set of jump gaits indexed by jump distance, with knot-wise convex
// interpolation between the two bracketing entries. Interpolation is exact at
// the entries and inherits every convex constraint family (variable bounds,
// friction cone, zero pre-landing joint rates) from its endpoints.

#include <string>
#include <vector>

#include "stonehop/gait.hpp"

namespace stonehop {

struct GaitLibrary {
  // Sorted by jump_distance, strictly increasing; all entries share one
  // contact schedule.
  std::vector<GaitTrajectory> gaits;

  int size() const { return static_cast<int>(gaits.size()); }
  double min_distance() const;
  double max_distance() const;

  // Inserts keeping the ordering. Throws on inconsistent trajectories,
  // mismatched schedules, or duplicate distances.
  void add(GaitTrajectory g);

  // Knot-wise convex blend of the bracketing entries; the requested distance
  // is clamped to the covered range. Throws when the library is empty.
  GaitTrajectory interpolate(double distance) const;
};

// Directory layout: an index file `library.txt` naming one gait file per
// entry in ascending distance order.
void save_gait_library(const GaitLibrary& lib, const std::string& dir);
GaitLibrary load_gait_library(const std::string& dir);

}  // namespace stonehop

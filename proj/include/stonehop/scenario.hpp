#pragma once
// Scenario description: the stone row, disturbances, and run settings for one
// crossing, loadable from a small JSON file.
//
// The terrain is either listed explicitly (per-jump distances and stone
// heights) or drawn uniformly from given ranges with the run seed.
// Disturbances live only on the simulation side: a trunk payload that the
// controller's model omits, and surface obstacles (extra blocks resting on
// stones) absent from the controller's terrain.

#include <string>
#include <vector>

#include "stonehop/robot_model.hpp"
#include "stonehop/terrain.hpp"

namespace stonehop {

struct TerrainSpec {
  // Explicit row (used when `distances` is non-empty).
  std::vector<double> distances;  // center-to-center, one per jump
  std::vector<double> heights;    // stone tops from stone 1 on; empty => flat
  // Random row: `random_jumps` jumps with distances and heights drawn
  // uniformly from the ranges below (used when `distances` is empty).
  int random_jumps = 0;
  double min_distance = 0.6;
  double max_distance = 0.9;
  double min_height = 0.0;
  double max_height = 0.0;
  double half_width = 0.2;
};

struct Scenario {
  std::string name;
  TerrainSpec terrain;
  std::vector<Stone> obstacles;  // simulation-only surface blocks
  double payload_mass = 0.0;     // simulation-only trunk payload [kg]
  std::string library_dir;       // gait library path (may be relative)
  double duration = 12.0;        // simulated run length [s]
  unsigned seed = 0;
  bool use_mpc = true;         // off: stance legs run open-loop gait + PD
  bool use_prelanding = true;  // off: swing PD all the way to touchdown
  double control_dt = 0.001;
  int sim_substeps = 1;  // physics steps per control tick
};

Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& s, const std::string& path);

// Terrain and model pair for one run: what the controller believes versus
// what the simulation integrates.
struct ResolvedScenario {
  Terrain stones;       // the stone row (controller's map)
  Terrain sim_terrain;  // stones plus obstacles
  RobotModel ctrl_model;
  RobotModel sim_model;  // payload attached
};

// Builds the terrain (drawing the random row from `seed` when the spec asks
// for one) and the model pair. Throws std::invalid_argument on a spec with
// neither explicit nor random stones, or bad ranges.
ResolvedScenario resolve_scenario(const Scenario& s, const RobotModel& base,
                                  unsigned seed);

}  // namespace stonehop

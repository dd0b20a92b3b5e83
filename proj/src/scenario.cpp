#include "stonehop/scenario.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace stonehop {
namespace {

using nlohmann::ordered_json;

constexpr const char* kFormatTag = "stonehop_scenario_v1";

TerrainSpec parse_terrain(const ordered_json& j) {
  TerrainSpec t;
  if (j.contains("distances")) {
    t.distances = j.at("distances").get<std::vector<double>>();
    t.heights = j.value("heights", std::vector<double>{});
  } else {
    const auto& r = j.at("random");
    t.random_jumps = r.at("jumps").get<int>();
    t.min_distance = r.at("min_distance").get<double>();
    t.max_distance = r.at("max_distance").get<double>();
    t.min_height = r.value("min_height", 0.0);
    t.max_height = r.value("max_height", 0.0);
  }
  t.half_width = j.value("half_width", 0.2);
  return t;
}

ordered_json dump_terrain(const TerrainSpec& t) {
  ordered_json j;
  if (!t.distances.empty()) {
    j["distances"] = t.distances;
    if (!t.heights.empty()) j["heights"] = t.heights;
  } else {
    j["random"] = {{"jumps", t.random_jumps},
                   {"min_distance", t.min_distance},
                   {"max_distance", t.max_distance},
                   {"min_height", t.min_height},
                   {"max_height", t.max_height}};
  }
  j["half_width"] = t.half_width;
  return j;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("scenario parse error in " + path + ": " + e.what());
  }
  if (j.value("format", "") != kFormatTag) {
    throw std::runtime_error("scenario file " + path + " has unknown format tag");
  }

  Scenario s;
  s.name = j.value("name", "");
  s.terrain = parse_terrain(j.at("terrain"));
  if (j.contains("obstacles")) {
    for (const auto& o : j.at("obstacles")) {
      Stone st;
      st.center_x = o.at("center_x").get<double>();
      st.top_z = o.at("top_z").get<double>();
      st.half_width = o.value("half_width", 0.06);
      s.obstacles.push_back(st);
    }
  }
  s.payload_mass = j.value("payload_mass", 0.0);
  s.library_dir = j.value("gait_library", "");
  s.duration = j.value("duration", 12.0);
  s.seed = j.value("seed", 0u);
  s.use_mpc = j.value("use_mpc", true);
  s.use_prelanding = j.value("use_prelanding", true);
  s.control_dt = j.value("control_dt", 0.001);
  s.sim_substeps = j.value("sim_substeps", 1);
  return s;
}

void save_scenario(const Scenario& s, const std::string& path) {
  ordered_json j;
  j["format"] = kFormatTag;
  j["name"] = s.name;
  j["terrain"] = dump_terrain(s.terrain);
  if (!s.obstacles.empty()) {
    ordered_json obs = ordered_json::array();
    for (const Stone& st : s.obstacles) {
      obs.push_back({{"center_x", st.center_x},
                     {"top_z", st.top_z},
                     {"half_width", st.half_width}});
    }
    j["obstacles"] = obs;
  }
  j["payload_mass"] = s.payload_mass;
  if (!s.library_dir.empty()) j["gait_library"] = s.library_dir;
  j["duration"] = s.duration;
  j["seed"] = s.seed;
  j["use_mpc"] = s.use_mpc;
  j["use_prelanding"] = s.use_prelanding;
  j["control_dt"] = s.control_dt;
  j["sim_substeps"] = s.sim_substeps;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  out << j.dump(2) << "\n";
}

ResolvedScenario resolve_scenario(const Scenario& s, const RobotModel& base,
                                  unsigned seed) {
  const TerrainSpec& t = s.terrain;
  std::vector<double> distances = t.distances;
  std::vector<double> heights = t.heights;

  if (distances.empty()) {
    if (t.random_jumps <= 0) {
      throw std::invalid_argument("scenario terrain lists no stones");
    }
    if (!(t.min_distance <= t.max_distance) || !(t.min_height <= t.max_height)) {
      throw std::invalid_argument("scenario terrain has inverted random ranges");
    }
    // One independent draw per quantity, distances first, so the row is a pure
    // function of the seed.
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist_d(t.min_distance, t.max_distance);
    std::uniform_real_distribution<double> dist_h(t.min_height, t.max_height);
    distances.resize(t.random_jumps);
    heights.resize(t.random_jumps);
    for (double& d : distances) d = dist_d(rng);
    for (double& h : heights) h = dist_h(rng);
  }

  ResolvedScenario r;
  r.stones = make_terrain(distances, heights, t.half_width);
  r.sim_terrain = r.stones;
  r.sim_terrain.stones.insert(r.sim_terrain.stones.end(), s.obstacles.begin(),
                              s.obstacles.end());
  r.ctrl_model = base;
  r.sim_model = s.payload_mass > 0.0 ? base.with_payload(s.payload_mass) : base;
  return r;
}

}  // namespace stonehop

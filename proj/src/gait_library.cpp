#include "stonehop/gait_library.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace stonehop {
namespace {

bool same_schedule(const ContactSchedule& a, const ContactSchedule& b) {
  return a.num_knots == b.num_knots && a.dt == b.dt &&
         a.rear_touchdown == b.rear_touchdown && a.front_liftoff == b.front_liftoff &&
         a.rear_liftoff == b.rear_liftoff;
}

}  // namespace

double GaitLibrary::min_distance() const {
  if (gaits.empty()) throw std::runtime_error("gait library is empty");
  return gaits.front().jump_distance;
}

double GaitLibrary::max_distance() const {
  if (gaits.empty()) throw std::runtime_error("gait library is empty");
  return gaits.back().jump_distance;
}

void GaitLibrary::add(GaitTrajectory g) {
  if (!g.consistent()) throw std::invalid_argument("gait library: inconsistent gait");
  if (!gaits.empty() && !same_schedule(g.schedule, gaits.front().schedule)) {
    throw std::invalid_argument("gait library: mismatched contact schedule");
  }
  for (const auto& e : gaits) {
    if (e.jump_distance == g.jump_distance) {
      throw std::invalid_argument("gait library: duplicate jump distance");
    }
  }
  const auto pos = std::lower_bound(
      gaits.begin(), gaits.end(), g.jump_distance,
      [](const GaitTrajectory& e, double d) { return e.jump_distance < d; });
  gaits.insert(pos, std::move(g));
}

GaitTrajectory GaitLibrary::interpolate(double distance) const {
  if (gaits.empty()) throw std::runtime_error("gait library is empty");
  if (gaits.size() == 1) return gaits.front();
  distance = std::clamp(distance, min_distance(), max_distance());
  int i = 0;
  while (i + 2 < static_cast<int>(gaits.size()) &&
         gaits[i + 1].jump_distance <= distance) {
    ++i;
  }
  const GaitTrajectory& a = gaits[i];
  const GaitTrajectory& b = gaits[i + 1];
  const double gamma =
      (distance - a.jump_distance) / (b.jump_distance - a.jump_distance);

  GaitTrajectory out;
  out.schedule = a.schedule;
  out.jump_distance = (1.0 - gamma) * a.jump_distance + gamma * b.jump_distance;
  const int n = a.num_knots();
  out.q.resize(n);
  out.qd.resize(n);
  out.tau.resize(n);
  out.force.resize(n);
  for (int k = 0; k < n; ++k) {
    out.q[k] = (1.0 - gamma) * a.q[k] + gamma * b.q[k];
    out.qd[k] = (1.0 - gamma) * a.qd[k] + gamma * b.qd[k];
    out.tau[k] = (1.0 - gamma) * a.tau[k] + gamma * b.tau[k];
    out.force[k] = (1.0 - gamma) * a.force[k] + gamma * b.force[k];
  }
  return out;
}

void save_gait_library(const GaitLibrary& lib, const std::string& dir) {
  if (lib.gaits.empty()) throw std::invalid_argument("save_gait_library: empty");
  std::filesystem::create_directories(dir);
  std::ofstream index(dir + "/library.txt");
  if (!index) throw std::runtime_error("save_gait_library: cannot open index in " + dir);
  index << "stonehop_gait_library_v1\n";
  index << "count = " << lib.size() << "\n";
  for (int i = 0; i < lib.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "gait_%03d.gait", i);
    save_gait(lib.gaits[i], dir + "/" + name);
    index << "gait = " << name << "\n";
  }
  if (!index) throw std::runtime_error("save_gait_library: write failed in " + dir);
}

GaitLibrary load_gait_library(const std::string& dir) {
  std::ifstream index(dir + "/library.txt");
  if (!index) throw std::runtime_error("load_gait_library: no index in " + dir);
  std::string line;
  if (!std::getline(index, line) || line != "stonehop_gait_library_v1") {
    throw std::runtime_error("load_gait_library: bad index header in " + dir);
  }
  if (!std::getline(index, line) || line.rfind("count = ", 0) != 0) {
    throw std::runtime_error("load_gait_library: missing count in " + dir);
  }
  const int count = std::stoi(line.substr(8));
  GaitLibrary lib;
  for (int i = 0; i < count; ++i) {
    if (!std::getline(index, line) || line.rfind("gait = ", 0) != 0) {
      throw std::runtime_error("load_gait_library: truncated index in " + dir);
    }
    lib.add(load_gait(dir + "/" + line.substr(7)));
  }
  return lib;
}

}  // namespace stonehop

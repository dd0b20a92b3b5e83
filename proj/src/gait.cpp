#include "stonehop/gait.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stonehop {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_row(const double* v, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i > 0) s += ' ';
    s += fmt(v[i]);
  }
  return s;
}

std::vector<double> parse_row(const std::string& line, const std::string& key,
                              const std::string& path) {
  const auto eq = line.find('=');
  if (eq == std::string::npos || line.substr(0, eq).find(key) == std::string::npos) {
    throw std::runtime_error(path + ": expected '" + key + " = ...', got '" + line +
                             "'");
  }
  std::istringstream is(line.substr(eq + 1));
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  return out;
}

}  // namespace

bool GaitTrajectory::consistent() const {
  const int n = num_knots();
  if (n != schedule.num_knots || !schedule.valid()) return false;
  if (static_cast<int>(qd.size()) != n || static_cast<int>(tau.size()) != n ||
      static_cast<int>(force.size()) != n) {
    return false;
  }
  for (int k = 0; k < n; ++k) {
    if (force[k].size() != 2 * schedule.at_knot(k).count()) return false;
  }
  return std::isfinite(jump_distance) && jump_distance >= 0.0;
}

Vec7 GaitTrajectory::q_at(double t) const {
  const double period = schedule.period();
  t = std::clamp(t, 0.0, period);
  const int k = std::min(schedule.knot_at_time(t), num_knots() - 2);
  const double a = (t - k * schedule.dt) / schedule.dt;
  return (1.0 - a) * q[k] + a * q[k + 1];
}

Vec7 GaitTrajectory::qd_at(double t) const {
  const double period = schedule.period();
  t = std::clamp(t, 0.0, period);
  const int k = std::min(schedule.knot_at_time(t), num_knots() - 2);
  const double a = (t - k * schedule.dt) / schedule.dt;
  return (1.0 - a) * qd[k] + a * qd[k + 1];
}

Vec4 GaitTrajectory::tau_at(double t) const { return tau[schedule.knot_at_time(t)]; }

ContactWrench GaitTrajectory::force_at(double t) const {
  const int k = schedule.knot_at_time(t);
  ContactWrench w;
  w.set = schedule.at_knot(k);
  w.f = force[k];
  return w;
}

void save_gait(const GaitTrajectory& g, const std::string& path) {
  if (!g.consistent()) throw std::runtime_error("save_gait: inconsistent trajectory");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_gait: cannot open " + path);
  os << "stonehop_gait_v1\n";
  os << "jump_distance = " << fmt(g.jump_distance) << "\n";
  os << "num_knots = " << g.schedule.num_knots << "\n";
  os << "dt = " << fmt(g.schedule.dt) << "\n";
  os << "rear_touchdown = " << g.schedule.rear_touchdown << "\n";
  os << "front_liftoff = " << g.schedule.front_liftoff << "\n";
  os << "rear_liftoff = " << g.schedule.rear_liftoff << "\n";
  for (int k = 0; k < g.num_knots(); ++k) {
    os << "knot " << k << "\n";
    os << "q = " << fmt_row(g.q[k].data(), 7) << "\n";
    os << "qd = " << fmt_row(g.qd[k].data(), 7) << "\n";
    os << "tau = " << fmt_row(g.tau[k].data(), 4) << "\n";
    os << "f = " << fmt_row(g.force[k].data(), static_cast<int>(g.force[k].size()))
       << "\n";
  }
  if (!os) throw std::runtime_error("save_gait: write failed for " + path);
}

GaitTrajectory load_gait(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_gait: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "stonehop_gait_v1") {
    throw std::runtime_error("load_gait: bad header in " + path);
  }
  GaitTrajectory g;
  auto scalar = [&](const std::string& key) {
    if (!std::getline(is, line)) {
      throw std::runtime_error("load_gait: truncated file " + path);
    }
    const auto row = parse_row(line, key, path);
    if (row.size() != 1) throw std::runtime_error("load_gait: bad " + key);
    return row[0];
  };
  g.jump_distance = scalar("jump_distance");
  g.schedule.num_knots = static_cast<int>(scalar("num_knots"));
  g.schedule.dt = scalar("dt");
  g.schedule.rear_touchdown = static_cast<int>(scalar("rear_touchdown"));
  g.schedule.front_liftoff = static_cast<int>(scalar("front_liftoff"));
  g.schedule.rear_liftoff = static_cast<int>(scalar("rear_liftoff"));
  if (!g.schedule.valid()) throw std::runtime_error("load_gait: bad schedule in " + path);

  const int n = g.schedule.num_knots;
  g.q.resize(n);
  g.qd.resize(n);
  g.tau.resize(n);
  g.force.resize(n);
  for (int k = 0; k < n; ++k) {
    if (!std::getline(is, line) || line != "knot " + std::to_string(k)) {
      throw std::runtime_error("load_gait: expected knot " + std::to_string(k));
    }
    auto row = [&](const std::string& key, int expect) {
      if (!std::getline(is, line)) {
        throw std::runtime_error("load_gait: truncated at knot " + std::to_string(k));
      }
      auto vals = parse_row(line, key, path);
      if (expect >= 0 && static_cast<int>(vals.size()) != expect) {
        throw std::runtime_error("load_gait: bad " + key + " at knot " +
                                 std::to_string(k));
      }
      return vals;
    };
    const auto qv = row("q", 7);
    const auto qdv = row("qd", 7);
    const auto tv = row("tau", 4);
    const auto fv = row("f", 2 * g.schedule.at_knot(k).count());
    for (int i = 0; i < 7; ++i) g.q[k][i] = qv[i];
    for (int i = 0; i < 7; ++i) g.qd[k][i] = qdv[i];
    for (int i = 0; i < 4; ++i) g.tau[k][i] = tv[i];
    g.force[k] = Eigen::Map<const VecX>(fv.data(), static_cast<int>(fv.size()));
  }
  if (!g.consistent()) throw std::runtime_error("load_gait: inconsistent data in " + path);
  return g;
}

}  // namespace stonehop

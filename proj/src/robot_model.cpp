#include "stonehop/robot_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace stonehop {
namespace {

constexpr int kFormatVersion = 1;

std::vector<double> parse_numbers(const std::string& text, const std::string& key) {
  std::istringstream ss(text);
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  std::string rest;
  if (ss.clear(), ss >> rest) {
    throw std::invalid_argument("model file: non-numeric value for key '" + key + "'");
  }
  if (out.empty()) {
    throw std::invalid_argument("model file: empty value for key '" + key + "'");
  }
  return out;
}

}  // namespace

RobotModel RobotModel::with_payload(double mass) const {
  if (mass < 0.0) throw std::invalid_argument("payload mass must be >= 0");
  RobotModel m = *this;
  m.payload_mass = mass;
  m.payload_inertia = mass * 0.002;
  return m;
}

void RobotModel::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("model: ") + name + " must be positive");
    }
  };
  positive(total_mass, "m");
  positive(tau_max, "tau_max");
  positive(qd_max, "qd_max");
  positive(trunk_length, "l");
  positive(trunk_inertia, "I_yy");
  positive(l1, "l1");
  positive(l2, "l2");
  positive(foot_spacing, "d");
  positive(gravity, "g");
  positive(m_trunk, "m_trunk");
  positive(m_thigh, "m_thigh");
  positive(m_shank, "m_shank");
  positive(I_thigh, "I_thigh");
  positive(I_shank, "I_shank");
  if (b_viscous < 0.0 || b_coulomb < 0.0) {
    throw std::invalid_argument("model: joint friction coefficients must be >= 0");
  }
  const double sum = m_trunk + 2.0 * m_thigh + 2.0 * m_shank;
  if (std::abs(sum - total_mass) > 1e-9) {
    throw std::invalid_argument("model: link masses do not sum to total mass m");
  }
  for (int i = 0; i < 4; ++i) {
    if (!(qj_min[i] < qj_max[i])) {
      throw std::invalid_argument("model: qj_min must be strictly below qj_max");
    }
  }
}

RobotModel RobotModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("model file not found: " + path);

  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("model file: line " + std::to_string(lineno) +
                                  " is not a key = value pair");
    }
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    const auto ke = key.find_last_not_of(" \t");
    key = key.substr(0, ke + 1);
    if (kv.count(key)) {
      throw std::invalid_argument("model file: duplicate key '" + key + "'");
    }
    kv[key] = val;
  }

  auto take = [&kv](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::invalid_argument("model file: missing key '" + key + "'");
    }
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_scalar = [&](const std::string& key) {
    auto nums = parse_numbers(take(key), key);
    if (nums.size() != 1) {
      throw std::invalid_argument("model file: key '" + key + "' expects one value");
    }
    return nums[0];
  };
  auto take_vec4 = [&](const std::string& key) {
    auto nums = parse_numbers(take(key), key);
    if (nums.size() != 4) {
      throw std::invalid_argument("model file: key '" + key + "' expects four values");
    }
    return Vec4(nums[0], nums[1], nums[2], nums[3]);
  };

  const double version = take_scalar("version");
  if (version != kFormatVersion) {
    throw std::invalid_argument("model file: unsupported version");
  }

  RobotModel m;
  m.total_mass = take_scalar("m");
  m.tau_max = take_scalar("tau_max");
  m.qd_max = take_scalar("qd_max");
  m.trunk_length = take_scalar("l");
  m.trunk_inertia = take_scalar("I_yy");
  m.l1 = take_scalar("l1");
  m.l2 = take_scalar("l2");
  m.foot_spacing = take_scalar("d");
  m.gravity = take_scalar("g");
  m.m_trunk = take_scalar("m_trunk");
  m.m_thigh = take_scalar("m_thigh");
  m.m_shank = take_scalar("m_shank");
  m.I_thigh = take_scalar("I_thigh");
  m.I_shank = take_scalar("I_shank");
  m.c_trunk.x() = take_scalar("c_trunk_x");
  m.c_trunk.y() = take_scalar("c_trunk_z");
  m.c_thigh = take_scalar("c_thigh");
  m.c_shank = take_scalar("c_shank");
  m.qj_min = take_vec4("qj_min");
  m.qj_max = take_vec4("qj_max");
  m.b_viscous = take_scalar("b_viscous");
  m.b_coulomb = take_scalar("b_coulomb");

  if (!kv.empty()) {
    throw std::invalid_argument("model file: unknown key '" + kv.begin()->first + "'");
  }
  m.validate();
  return m;
}

void RobotModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write model file: " + path);
  char buf[64];
  auto w = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << " = " << buf << "\n";
  };
  out << "# planar quadruped model parameters\n";
  out << "version = 1\n";
  w("m", total_mass);
  w("tau_max", tau_max);
  w("qd_max", qd_max);
  w("l", trunk_length);
  w("I_yy", trunk_inertia);
  w("l1", l1);
  w("l2", l2);
  w("d", foot_spacing);
  w("g", gravity);
  w("m_trunk", m_trunk);
  w("m_thigh", m_thigh);
  w("m_shank", m_shank);
  w("I_thigh", I_thigh);
  w("I_shank", I_shank);
  w("c_trunk_x", c_trunk.x());
  w("c_trunk_z", c_trunk.y());
  w("c_thigh", c_thigh);
  w("c_shank", c_shank);
  auto wv = [&](const char* key, const Vec4& v) {
    out << key << " =";
    for (int i = 0; i < 4; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      out << " " << buf;
    }
    out << "\n";
  };
  wv("qj_min", qj_min);
  wv("qj_max", qj_max);
  w("b_viscous", b_viscous);
  w("b_coulomb", b_coulomb);
}

}  // namespace stonehop

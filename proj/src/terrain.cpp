#include "stonehop/terrain.hpp"

#include <cmath>
#include <stdexcept>

namespace stonehop {

double Terrain::height_at(double x) const {
  bool found = false;
  double top = default_height;
  for (const auto& s : stones) {
    if (x >= s.left() && x <= s.right() && (!found || s.top_z > top)) {
      found = true;
      top = s.top_z;
    }
  }
  return top;
}

std::optional<int> Terrain::stone_under(const Vec2& p) const {
  for (int i = 0; i < static_cast<int>(stones.size()); ++i) {
    const auto& s = stones[i];
    if (p.x() >= s.left() && p.x() <= s.right() &&
        std::abs(p.y() - s.top_z) < kFootOnStoneTol) {
      return i;
    }
  }
  return std::nullopt;
}

Terrain make_terrain(const std::vector<double>& distances,
                     const std::vector<double>& heights, double half_width,
                     double default_height) {
  if (!(half_width > 0.0)) {
    throw std::invalid_argument("make_terrain: half_width must be positive");
  }
  if (!heights.empty() && heights.size() != distances.size()) {
    throw std::invalid_argument(
        "make_terrain: heights must be empty or match distances in length");
  }
  Terrain t;
  t.default_height = default_height;
  t.stones.push_back({0.0, 0.0, half_width});
  double x = 0.0;
  for (size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] >= 2.0 * half_width)) {
      throw std::invalid_argument(
          "make_terrain: stone spacing smaller than a stone width (overlap)");
    }
    x += distances[i];
    const double z = heights.empty() ? 0.0 : heights[i];
    t.stones.push_back({x, z, half_width});
  }
  return t;
}

std::optional<int> foot_on_stone(const Terrain& t, const Vec2& foot) {
  return t.stone_under(foot);
}

}  // namespace stonehop

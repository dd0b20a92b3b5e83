#pragma once

#include <optional>
#include <vector>

#include "stonehop/types.hpp"

namespace stonehop {

struct Stone {
  double center_x = 0.0;
  double top_z = 0.0;
  double half_width = 0.2;

  double left() const { return center_x - half_width; }
  double right() const { return center_x + half_width; }
};

// A row of stepping stones over a deep pit. Height queries use height-field
// semantics: the ground under x is the top of the highest stone containing x
// (so a small block resting on a stone raises the surface), or default_height
// in the gaps.
struct Terrain {
  std::vector<Stone> stones;
  double default_height = -1.0;

  double height_at(double x) const;
  // Index of the stone whose x-interval contains p.x and whose top is within
  // 5 mm of p.z; ties (shared edge) go to the lower index.
  std::optional<int> stone_under(const Vec2& p) const;
};

inline constexpr double kFootOnStoneTol = 0.005;  // 5 mm vertical tolerance

// Ground friction coefficient assumed by the gait optimizer and the wrench
// MPC (|fx| <= mu * fz per stance foot).
inline constexpr double kFrictionCoefficient = 0.6;

// Builds a stone row: stone 0 centered at x = 0 with top 0; stone i+1 is
// distances[i] ahead of stone i with top heights[i] (heights empty => all zero).
// Throws std::invalid_argument when a distance is smaller than 2*half_width
// (stones would overlap) or list lengths mismatch.
Terrain make_terrain(const std::vector<double>& distances,
                     const std::vector<double>& heights, double half_width = 0.2,
                     double default_height = -1.0);

std::optional<int> foot_on_stone(const Terrain& t, const Vec2& foot);

}  // namespace stonehop

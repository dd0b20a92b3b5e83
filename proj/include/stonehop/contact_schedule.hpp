#pragma once
// Stance/flight phasing for one jump cycle, shared by the trajectory
// optimizer, the wrench MPC, and the controller's phase machine.
//
// A cycle lands on the front feet at t = 0, picks up rear stance at
// rear_touchdown, releases the front feet at front_liftoff, pushes off the
// rear feet until rear_liftoff, and is airborne through the final knot. The
// final knot coincides with the next cycle's first knot (periodic wrap), so
// its contact set is empty here and becomes front-stance after wrap.

#include "stonehop/types.hpp"

namespace stonehop {

struct ContactSchedule {
  int num_knots = 100;
  double dt = 0.01;
  int rear_touchdown = 20;  // first knot with the rear feet in stance
  int front_liftoff = 40;   // first knot with the front feet in swing
  int rear_liftoff = 60;    // first fully airborne knot

  double period() const { return (num_knots - 1) * dt; }

  ContactSet at_knot(int k) const;
  // Clamped to [0, period]; times past the period report the airborne set.
  ContactSet at_time(double t) const;

  // Knot index whose interval [k*dt, (k+1)*dt) contains t, clamped.
  int knot_at_time(double t) const;

  bool valid() const;
};

// The schedule used by all gaits in this project: 100 knots at 10 ms.
ContactSchedule default_jump_schedule();

// Knots at the end of the cycle with joint rates pinned to zero so the legs
// arrive at touchdown holding the landing posture; the controller switches to
// Cartesian foot placement over the same window.
inline constexpr int kPrelandingKnots = 10;

}  // namespace stonehop

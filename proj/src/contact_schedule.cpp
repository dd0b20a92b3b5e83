#include "stonehop/contact_schedule.hpp"

#include <algorithm>
#include <cmath>

namespace stonehop {

ContactSet ContactSchedule::at_knot(int k) const {
  k = std::clamp(k, 0, num_knots - 1);
  ContactSet s;
  s.front = k < front_liftoff;
  s.rear = k >= rear_touchdown && k < rear_liftoff;
  return s;
}

ContactSet ContactSchedule::at_time(double t) const { return at_knot(knot_at_time(t)); }

int ContactSchedule::knot_at_time(double t) const {
  const int k = static_cast<int>(std::floor(t / dt));
  return std::clamp(k, 0, num_knots - 1);
}

bool ContactSchedule::valid() const {
  return num_knots >= 2 && dt > 0.0 && 0 < rear_touchdown &&
         rear_touchdown < front_liftoff && front_liftoff < rear_liftoff &&
         rear_liftoff < num_knots;
}

ContactSchedule default_jump_schedule() { return ContactSchedule{}; }

}  // namespace stonehop

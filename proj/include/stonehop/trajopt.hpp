#pragma once
// Whole-body trajectory optimization of one periodic jump cycle.
//
// The cycle is transcribed with trapezoidal collocation: decision variables
// are the generalized coordinates, velocities, joint torques, and stance
// forces at every knot. Equalities enforce the collocation defects, stance
// foot pins, cycle periodicity (shifted forward by the jump distance), and a
// zero-joint-rate pre-landing window; inequalities enforce the friction cone,
// trunk and knee clearances, and swing-foot ground clearance. The result is a
// GaitTrajectory ready for the gait library and the runtime controller.

#include <stdexcept>
#include <string>
#include <vector>

#include "stonehop/contact_schedule.hpp"
#include "stonehop/gait.hpp"
#include "stonehop/nlp.hpp"
#include "stonehop/robot_model.hpp"

namespace stonehop {

// Decision-variable layout. Per knot: [q(7), qd(7), tau(4), f(2*stance)].
// Knot blocks are interleaved from both ends of the cycle (0, N-1, 1, N-2,
// ...) so that interval couplings and the periodicity rows all stay within a
// narrow band, keeping the Gauss-Newton subproblems banded.
struct TrajoptLayout {
  ContactSchedule schedule;
  int n = 0;
  std::vector<int> knot_offset;

  int q_offset(int k) const { return knot_offset[k]; }
  int qd_offset(int k) const { return knot_offset[k] + 7; }
  int tau_offset(int k) const { return knot_offset[k] + 14; }
  int force_offset(int k) const { return knot_offset[k] + 18; }
  int force_dim(int k) const { return 2 * schedule.at_knot(k).count(); }
};

TrajoptLayout make_layout(const ContactSchedule& s);

// Variable bounds shared by the transcription and by gait validation.
struct KnotBounds {
  Vec7 q_min, q_max;
  Vec7 qd_min, qd_max;
  Vec4 tau_min, tau_max;
  Vec2 f_min, f_max;  // per stance foot (fx, fz)
};
KnotBounds jump_knot_bounds(const RobotModel& m);

// Minimum trunk height during stance and minimum knee height everywhere.
inline constexpr double kTrunkMinHeight = 0.12;
inline constexpr double kKneeMinHeight = 0.03;
// Mid-swing foot clearance, relaxed to zero near liftoff and touchdown.
inline constexpr double kSwingClearance = 0.03;
inline constexpr int kSwingClearanceSkirt = 3;  // knots next to a stance boundary

NlpProblem transcribe_jump(const RobotModel& m, double jump_distance,
                           const TrajoptLayout& layout);

VecX pack_gait(const TrajoptLayout& layout, const GaitTrajectory& g);
GaitTrajectory unpack_gait(const TrajoptLayout& layout, const VecX& x,
                           double jump_distance);

// Standing stance knots plus a ballistic flight arc, with statically
// consistent force and torque guesses.
VecX initial_guess(const RobotModel& m, double jump_distance,
                   const TrajoptLayout& layout);

// Tightens an optimized gait so independent audits pass at machine-level
// tolerances: clips torques and boxes, projects forces into the friction
// cone, and zeroes the pre-landing joint rates exactly.
void polish_gait(const RobotModel& m, GaitTrajectory& g);

struct GaitValidation {
  bool ok = false;
  double max_box = 0.0;          // bound violation, tolerance 1e-6
  double max_friction = 0.0;     // |fx| - mu*fz, tolerance 1e-6
  double max_prelanding = 0.0;   // |joint rate| in the landing window, 1e-6
  double max_defect = 0.0;       // collocation residual, tolerance 1e-3
  double max_pin = 0.0;          // stance foot drift, tolerance 1e-3
  double max_periodicity = 0.0;  // cycle wrap mismatch, tolerance 1e-3
  double max_clearance = 0.0;    // trunk/knee/swing margins, tolerance 1e-3
  std::string describe() const;
};

// Re-audits a gait from scratch (independent of the optimizer's internal
// residuals). Intended for optimizer output; interpolated gaits satisfy the
// convex families (boxes, friction, pre-landing) but not the defect audit.
GaitValidation validate_gait(const RobotModel& m, const GaitTrajectory& g);

struct GaitOptimizationError : std::runtime_error {
  GaitOptimizationError(const std::string& msg, NlpReport r, GaitValidation v)
      : std::runtime_error(msg), report(std::move(r)), validation(std::move(v)) {}
  NlpReport report;
  GaitValidation validation;
};

struct TrajoptOptions {
  NlpOptions nlp;
  bool verbose = false;
  TrajoptOptions() {
    // Half the 1e-3 audit tolerance: the solver stops with a 2x margin under
    // every nonconvex audit family (defects, pins, periodicity, clearance).
    nlp.constraint_tolerance = 5e-4;
    nlp.stationarity_tolerance = 1e-3;
    nlp.max_outer_iterations = 80;
    // The late-stage subproblems hit their conditioning floor within a few
    // dozen steps; longer sweeps only burn time in the damping limit cycle.
    nlp.max_inner_iterations = 60;
    nlp.initial_penalty = 1e3;
    nlp.penalty_growth = 10.0;
    // The multiplier updates carry feasibility; the penalty only needs to
    // dominate the local curvature. Past ~1e7 the Gauss-Newton subproblems
    // lose more digits to conditioning than the extra penalty buys.
    nlp.max_penalty = 1e7;
  }
};

// Full pipeline: transcribe, solve, polish, validate. Throws
// GaitOptimizationError when the solver fails to converge or the polished
// gait fails its audit.
GaitTrajectory optimize_gait(const RobotModel& m, double jump_distance,
                             const TrajoptOptions& opts = {});

}  // namespace stonehop

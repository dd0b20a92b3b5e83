#include "stonehop/simulator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace stonehop {
namespace {

constexpr double kCrashClearance = 0.06;  // trunk origin height above ground
constexpr double kCrashPitch = 1.3;

Vec2 anchor_of(const SimState& s, Foot f) {
  return f == Foot::kFront ? s.front_anchor : s.rear_anchor;
}

void set_anchor(SimState& s, Foot f, const Vec2& a) {
  (f == Foot::kFront ? s.front_anchor : s.rear_anchor) = a;
}

// Mass-weighted projection of qd onto the null space of the contact Jacobian.
Vec7 project_velocity(const RobotModel& m, const Vec7& q, const Vec7& qd,
                      ContactSet contacts) {
  if (!contacts.any()) return qd;
  const Mat7 M = mass_matrix(m, q);
  const Eigen::LLT<Mat7> llt(M);
  GenCoords qc = GenCoords::from(q);
  const MatX J = contact_jacobian(m, qc, contacts);
  const MatX MiJt = llt.solve(J.transpose());
  const MatX S = J * MiJt;  // 2k x 2k
  const VecX lam = Eigen::FullPivLU<MatX>(S).solve(J * qd);
  return qd - MiJt * lam;
}

// Moves q minimally (in the mass metric) so pinned feet sit on their anchors.
void project_position(const RobotModel& m, SimState& s) {
  if (!s.contacts.any()) return;
  const Vec7 zero = Vec7::Zero();
  for (int iter = 0; iter < 3; ++iter) {
    VecX phi(2 * s.contacts.count());
    int row = 0;
    if (s.contacts.front) {
      phi.segment<2>(row) = foot_kin(m, s.q, zero, Foot::kFront).p - s.front_anchor;
      row += 2;
    }
    if (s.contacts.rear) {
      phi.segment<2>(row) = foot_kin(m, s.q, zero, Foot::kRear).p - s.rear_anchor;
    }
    if (phi.lpNorm<Eigen::Infinity>() < 1e-12) return;
    const Mat7 M = mass_matrix(m, s.q);
    const Eigen::LLT<Mat7> llt(M);
    GenCoords qc = GenCoords::from(s.q);
    const MatX J = contact_jacobian(m, qc, s.contacts);
    const MatX MiJt = llt.solve(J.transpose());
    const MatX S = J * MiJt;
    const VecX lam = Eigen::FullPivLU<MatX>(S).solve(phi);
    s.q -= MiJt * lam;
  }
}

// Velocity-Verlet step (kick-drift-kick with a velocity predictor for the
// velocity-dependent bias forces); symplectic and exact for ballistic flight.
void integrate(const RobotModel& m, Vec7& q, Vec7& qd, const Vec4& tau,
               ContactSet contacts, double dt) {
  const Vec7 a0 = contact_dynamics(m, q, qd, tau, contacts).qdd;
  const Vec7 q1 = q + qd * dt + 0.5 * a0 * dt * dt;
  const Vec7 v_pred = qd + a0 * dt;
  const Vec7 a1 = contact_dynamics(m, q1, v_pred, tau, contacts).qdd;
  q = q1;
  qd = qd + 0.5 * (a0 + a1) * dt;
}

double foot_gap(const RobotModel& m, const Terrain& terrain, const Vec7& q, Foot f) {
  const Vec7 zero = Vec7::Zero();
  const Vec2 p = foot_kin(m, q, zero, f).p;
  return p.y() - terrain.height_at(p.x());
}

}  // namespace

SimState make_sim_state(const RobotModel& m, const Vec7& q, const Vec7& qd,
                        ContactSet contacts, double t) {
  SimState s;
  s.t = t;
  s.q = q;
  s.qd = contacts.any() ? project_velocity(m, q, qd, contacts) : qd;
  s.contacts = contacts;
  const Vec7 zero = Vec7::Zero();
  if (contacts.front) s.front_anchor = foot_kin(m, q, zero, Foot::kFront).p;
  if (contacts.rear) s.rear_anchor = foot_kin(m, q, zero, Foot::kRear).p;
  return s;
}

Vec7 impact_map(const RobotModel& m, const Vec7& q, const Vec7& qd,
                ContactSet contacts) {
  return project_velocity(m, q, qd, contacts);
}

SimStepResult step(const RobotModel& m, const SimState& state, const Vec4& tau_in,
                   const Terrain& terrain, double dt,
                   std::optional<ContactSet> commanded) {
  SimStepResult out;
  out.state = state;
  out.force = ContactWrench::zero(state.contacts);
  if (state.crashed) return out;

  const Vec4 tau = tau_in.cwiseMax(-m.tau_max).cwiseMin(m.tau_max);
  SimState& s = out.state;
  bool first_solve = true;

  double remaining = dt;
  int guard = 0;
  while (remaining > 1e-12 && guard++ < 8) {
    // Contact forces for the current mode; release adhesive feet the schedule no
    // longer commands.
    for (int pass = 0; pass < 3; ++pass) {
      const ContactDynamicsResult dyn = contact_dynamics(m, s.q, s.qd, tau, s.contacts);
      if (first_solve) {
        out.force = dyn.force;
        first_solve = false;
      }
      auto adhesive = [&](Foot f, double fz) {
        const bool commanded_stance = commanded.has_value() && commanded->has(f);
        return fz < 0.0 && !commanded_stance;
      };
      bool released = false;
      if (s.contacts.front && adhesive(Foot::kFront, dyn.force.front().y())) {
        s.contacts.front = false;
        out.events.push_back({s.t, Foot::kFront, EventKind::kLiftoff, s.front_anchor});
        released = true;
      } else if (s.contacts.rear && adhesive(Foot::kRear, dyn.force.rear().y())) {
        s.contacts.rear = false;
        out.events.push_back({s.t, Foot::kRear, EventKind::kLiftoff, s.rear_anchor});
        released = true;
      }
      if (!released) break;
    }

    // Trial integration over the remaining time, then look for the earliest
    // touchdown crossing inside it.
    const Vec7 q_pre = s.q;
    const Vec7 v_pre = s.qd;
    integrate(m, s.q, s.qd, tau, s.contacts, remaining);

    double s_min = 1.0;
    std::optional<Foot> hit;
    for (Foot f : {Foot::kFront, Foot::kRear}) {
      if (s.contacts.has(f)) continue;
      const double g_pre = foot_gap(m, terrain, q_pre, f);
      const double g_post = foot_gap(m, terrain, s.q, f);
      if (g_post < 0.0 && g_pre >= 0.0 && g_post < g_pre) {
        const double frac = g_pre / (g_pre - g_post);
        if (frac < s_min) {
          s_min = frac;
          hit = f;
        }
      } else if (g_pre < -1e-9 && g_post < g_pre) {
        // Already penetrating and still descending: pin immediately.
        s_min = 0.0;
        hit = f;
      }
    }

    if (!hit) {
      s.t += remaining;
      remaining = 0.0;
      break;
    }

    // Re-integrate up to the crossing, apply the inelastic impact, continue with
    // the foot pinned.
    const double h = s_min * remaining;
    s.q = q_pre;
    s.qd = v_pre;
    if (h > 1e-12) integrate(m, s.q, s.qd, tau, s.contacts, h);
    s.t += h;
    remaining -= h;

    ContactSet after = s.contacts;
    (hit == Foot::kFront ? after.front : after.rear) = true;
    const Vec7 zero = Vec7::Zero();
    const Vec2 location = foot_kin(m, s.q, zero, *hit).p;
    s.qd = impact_map(m, s.q, s.qd, after);
    s.contacts = after;
    set_anchor(s, *hit, location);
    out.events.push_back({s.t, *hit, EventKind::kTouchdown, location});
  }

  s.t = state.t + dt;  // exact step clock regardless of sub-step roundoff
  project_position(m, s);
  s.qd = project_velocity(m, s.q, s.qd, s.contacts);

  const double ground = terrain.height_at(s.q[0]);
  if (s.q[1] < ground + kCrashClearance || std::abs(s.q[2]) > kCrashPitch) {
    s.crashed = true;
  }
  return out;
}

}  // namespace stonehop

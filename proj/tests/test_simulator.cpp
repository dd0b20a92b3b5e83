#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "stonehop/dynamics.hpp"
#include "stonehop/kinematics.hpp"
#include "stonehop/simulator.hpp"
#include "stonehop/terrain.hpp"

using namespace stonehop;

namespace {

Terrain flat_ground() {
  Terrain t;
  t.stones.push_back(Stone{0.0, 0.0, 100.0});
  t.default_height = -1.0;
  return t;
}

// Standing start: trunk at the nominal height, feet on the ground.
SimState standing_state(const RobotModel& m) {
  Vec7 q = Vec7::Zero();
  q[1] = standing_trunk_height(m);
  q.segment<4>(3) = nominal_posture();
  return make_sim_state(m, q, Vec7::Zero(), ContactSet{true, true});
}

// Gravity-compensating joint torque for a pinned double stance. With qdd = 0
// and qd = 0 the equations of motion read S tau + Jc^T f = bias; the three
// unactuated rows determine a consistent force distribution (min-norm), the
// actuated rows then give the torque.
Vec4 standing_torque(const RobotModel& m, const SimState& s) {
  const Vec7 bias = bias_forces(m, s.q, Vec7::Zero());
  const MatX Jc = contact_jacobian(m, GenCoords::from(s.q), ContactSet{true, true});
  const MatX B = Jc.transpose().topRows(3);  // unactuated rows, 3 x 4
  const VecX f = B.transpose() * (B * B.transpose()).ldlt().solve(bias.head<3>());
  const Vec7 resid = bias - Jc.transpose() * f;
  return resid.segment<4>(3);
}

}  // namespace

TEST_CASE("ballistic flight matches the closed-form parabola") {
  RobotModel m;
  Vec7 q = Vec7::Zero();
  q[1] = 1.0;
  q.segment<4>(3) = nominal_posture();
  Vec7 qd = Vec7::Zero();
  qd[0] = 0.8;
  qd[1] = 0.5;
  SimState s = make_sim_state(m, q, qd, ContactSet{false, false});
  const Terrain terrain = flat_ground();

  const double dt = 1e-3;
  double E0 = mechanical_energy(m, s.q, s.qd);
  for (int i = 0; i < 100; ++i) {
    const SimStepResult r = step(m, s, Vec4::Zero(), terrain, dt);
    REQUIRE(r.events.empty());
    s = r.state;
  }
  const double T = 0.1;
  // With zero joint rates and zero torque the legs stay frozen relative to the
  // trunk and the base follows the ballistic arc exactly.
  CHECK(s.t == doctest::Approx(T));
  CHECK(s.q[0] == doctest::Approx(0.8 * T).epsilon(1e-9));
  CHECK(s.q[1] == doctest::Approx(1.0 + 0.5 * T - 0.5 * m.gravity * T * T).epsilon(1e-6));
  CHECK(s.qd[1] == doctest::Approx(0.5 - m.gravity * T).epsilon(1e-6));
  CHECK(s.qd[0] == doctest::Approx(0.8).epsilon(1e-9));
  // Zero-torque flight conserves mechanical energy.
  CHECK(mechanical_energy(m, s.q, s.qd) == doctest::Approx(E0).epsilon(1e-5));
}

TEST_CASE("standing on both feet under gravity compensation stays put") {
  RobotModel m;
  SimState s = standing_state(m);
  const Terrain terrain = flat_ground();
  const Vec4 tau = standing_torque(m, s);
  const Vec7 q0 = s.q;

  for (int i = 0; i < 200; ++i) {
    const SimStepResult r = step(m, s, tau, terrain, 1e-3, ContactSet{true, true});
    s = r.state;
    REQUIRE(!s.crashed);
    REQUIRE(s.contacts == ContactSet{true, true});
    // Stance forces stay compressive.
    CHECK(r.force.front().y() > 0.0);
    CHECK(r.force.rear().y() > 0.0);
  }
  CHECK((s.q - q0).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(s.qd.lpNorm<Eigen::Infinity>() < 1e-5);

  // The quasi-static force distribution supports the full weight.
  const SimStepResult r = step(m, s, tau, terrain, 1e-3, ContactSet{true, true});
  CHECK(r.force.front().y() + r.force.rear().y() ==
        doctest::Approx(m.mass_with_payload() * m.gravity).epsilon(1e-3));
}

TEST_CASE("pinned feet do not drift") {
  RobotModel m;
  SimState s = standing_state(m);
  const Terrain terrain = flat_ground();
  const Vec2 front0 = foot_kin(m, s.q, s.qd, Foot::kFront).p;

  // Arbitrary bounded torque wiggling the trunk around; the pins must hold.
  for (int i = 0; i < 500; ++i) {
    Vec4 tau = standing_torque(m, s);
    tau[0] += 8.0 * std::sin(0.02 * i);
    tau[2] -= 6.0 * std::cos(0.03 * i);
    const SimStepResult r = step(m, s, tau, terrain, 1e-3, ContactSet{true, true});
    s = r.state;
    if (s.crashed || !s.contacts.front || !s.contacts.rear) break;
    const Vec2 front = foot_kin(m, s.q, s.qd, Foot::kFront).p;
    CHECK((front - front0).norm() < 1e-7);
    CHECK(foot_kin(m, s.q, s.qd, Foot::kFront).v.norm() < 1e-7);
  }
}

TEST_CASE("impact map zeroes foot velocity and never adds kinetic energy") {
  RobotModel m;
  std::mt19937 rng(307);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Vec7 q = Vec7::Zero();
    q[1] = 0.35 + 0.1 * U(rng);
    q[2] = 0.3 * U(rng);
    for (int j = 0; j < 4; ++j) {
      const double lo = m.qj_min[j], hi = m.qj_max[j];
      q[3 + j] = lo + (0.5 + 0.4 * U(rng)) * (hi - lo);
    }
    Vec7 qd;
    for (int i = 0; i < 7; ++i) qd[i] = 2.0 * U(rng);

    for (ContactSet s : {ContactSet{true, false}, ContactSet{true, true}}) {
      const Vec7 qd_post = impact_map(m, q, qd, s);
      const MatX Jc = contact_jacobian(m, GenCoords::from(q), s);
      CHECK((Jc * qd_post).lpNorm<Eigen::Infinity>() < 1e-9);
      const Mat7 M = mass_matrix(m, q);
      const double ke_pre = 0.5 * qd.dot(M * qd);
      const double ke_post = 0.5 * qd_post.dot(M * qd_post);
      CHECK(ke_post <= ke_pre + 1e-12);
      // The impulse acts only through the contact: momentum change lies in the
      // range of Jc^T.
      const Vec7 dm = M * (qd_post - qd);
      const Eigen::FullPivLU<MatX> lu(Jc.transpose());
      CHECK((dm - Jc.transpose() * lu.solve(dm)).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }
}

TEST_CASE("touchdown is located inside the step and the foot lands on the surface") {
  RobotModel m;
  // Drop from a small height with stance-like posture; the front and rear feet
  // touch the flat ground at the same instant.
  Vec7 q = Vec7::Zero();
  q[1] = standing_trunk_height(m) + 0.05;
  q.segment<4>(3) = nominal_posture();
  Vec7 qd = Vec7::Zero();
  SimState s = make_sim_state(m, q, qd, ContactSet{false, false});
  const Terrain terrain = flat_ground();

  // Fall time for 5 cm: sqrt(2h/g) ~ 0.101 s.
  bool touched = false;
  double t_touch = 0.0;
  for (int i = 0; i < 300 && !touched; ++i) {
    const SimStepResult r = step(m, s, Vec4::Zero(), terrain, 1e-3);
    for (const ContactEvent& e : r.events) {
      if (e.kind == EventKind::kTouchdown) {
        touched = true;
        t_touch = e.t;
        // The crossing is located by linear interpolation inside a step whose
        // gap is quadratic in time, so the landing height is accurate to
        // O(g dt^2 / 8), not machine precision.
        CHECK(std::abs(e.location.y()) < 1e-4);
        // Event time sits inside the step that produced it.
        CHECK(e.t >= s.t);
        CHECK(e.t <= s.t + 1e-3 + 1e-12);
      }
    }
    s = r.state;
  }
  REQUIRE(touched);
  CHECK(t_touch == doctest::Approx(std::sqrt(2.0 * 0.05 / m.gravity)).epsilon(0.02));
  CHECK(s.contacts.any());
  // Feet rest on the surface (at the interpolated crossing height) afterward.
  const Vec2 pf = foot_kin(m, s.q, s.qd, Foot::kFront).p;
  CHECK(std::abs(pf.y()) < 1e-4);
}

TEST_CASE("liftoff requires both negative normal force and a commanded release") {
  RobotModel m;
  SimState s = standing_state(m);
  const Terrain terrain = flat_ground();

  // A strong knee-folding torque retracts the front leg: the pin must pull
  // down on the foot (negative normal force), and once released the foot
  // accelerates up and away from the ground.
  Vec4 tau_hold = standing_torque(m, s);
  Vec4 tau_pull = tau_hold;
  tau_pull[1] = -40.0;

  SimState held = s;
  for (int i = 0; i < 50; ++i) {
    const SimStepResult r = step(m, held, tau_pull, terrain, 1e-3, ContactSet{true, true});
    held = r.state;
  }
  CHECK(held.contacts.front);

  // The same torque with the front commanded swing releases it.
  SimState released = s;
  bool liftoff_seen = false;
  for (int i = 0; i < 50 && !liftoff_seen; ++i) {
    const SimStepResult r =
        step(m, released, tau_pull, terrain, 1e-3, ContactSet{false, true});
    released = r.state;
    for (const ContactEvent& e : r.events) {
      liftoff_seen |= (e.kind == EventKind::kLiftoff && e.foot == Foot::kFront);
    }
  }
  CHECK(liftoff_seen);
  CHECK(!released.contacts.front);
  CHECK(released.contacts.rear);
}

TEST_CASE("torque saturates at the actuator limit") {
  RobotModel m;
  SimState s = standing_state(m);
  const Terrain terrain = flat_ground();
  Vec4 huge = Vec4::Constant(1e4);

  // One step with absurd torque must behave exactly like tau_max.
  const SimStepResult a = step(m, s, huge, terrain, 1e-3, ContactSet{true, true});
  const SimStepResult b =
      step(m, s, Vec4::Constant(m.tau_max), terrain, 1e-3, ContactSet{true, true});
  CHECK((a.state.q - b.state.q).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.state.qd - b.state.qd).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("a trunk driven below the terrain is marked crashed and stays terminal") {
  RobotModel m;
  Vec7 q = Vec7::Zero();
  q[1] = 0.6;
  q.segment<4>(3) = nominal_posture();
  Vec7 qd = Vec7::Zero();
  qd[1] = -6.0;  // slamming down, feet tucked
  q[3] = 1.3;
  q[5] = 1.3;
  SimState s = make_sim_state(m, q, qd, ContactSet{false, false});
  Terrain pit;  // no stones anywhere: everything is the deep default
  pit.default_height = -0.2;

  bool crashed = false;
  for (int i = 0; i < 400 && !crashed; ++i) {
    const SimStepResult r = step(m, s, Vec4::Zero(), pit, 1e-3);
    s = r.state;
    crashed = s.crashed;
  }
  CHECK(crashed);
  // Stepping a crashed state is a no-op.
  const Vec7 q_before = s.q;
  const SimStepResult r = step(m, s, Vec4::Constant(5.0), pit, 1e-3);
  CHECK(r.state.crashed);
  CHECK((r.state.q - q_before).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(r.events.empty());
}

TEST_CASE("simulation is deterministic") {
  RobotModel m;
  const Terrain terrain = flat_ground();
  auto run = [&]() {
    SimState s = standing_state(m);
    for (int i = 0; i < 300; ++i) {
      Vec4 tau = standing_torque(m, s);
      tau[0] += 10.0 * std::sin(0.05 * i);
      const SimStepResult r = step(m, s, tau, terrain, 1e-3, ContactSet{true, true});
      s = r.state;
    }
    return s;
  };
  const SimState a = run();
  const SimState b = run();
  CHECK((a.q - b.q).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.qd - b.qd).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(a.t == b.t);
}

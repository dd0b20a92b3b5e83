#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>

#include "stonehop/gait_library.hpp"

using namespace stonehop;

namespace {

// Synthetic but structurally consistent gait: knot arrays sized to the default
// schedule, forces sized per contact set, values parameterized by the distance
// so interpolation checks can verify exact affine blending.
GaitTrajectory synthetic_gait(double distance, unsigned seed = 0) {
  GaitTrajectory g;
  g.jump_distance = distance;
  g.schedule = default_jump_schedule();
  const int N = g.schedule.num_knots;
  std::mt19937 rng(seed == 0 ? 1000 + static_cast<unsigned>(distance * 1000) : seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  g.q.resize(N);
  g.qd.resize(N);
  g.tau.resize(N);
  g.force.resize(N);
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < 7; ++i) {
      // Affine in the distance plus a knot-dependent shape.
      g.q[k][i] = 0.1 * k / N + distance * (0.3 + 0.01 * i) + 0.05 * std::sin(0.1 * k + i);
      g.qd[k][i] = distance * 0.2 - 0.03 * i + 0.02 * std::cos(0.2 * k);
    }
    for (int i = 0; i < 4; ++i) g.tau[k][i] = distance * 10.0 + k * 0.1 + i;
    const int c = g.schedule.at_knot(k).count();
    g.force[k] = VecX::Zero(2 * c);
    for (int i = 0; i < 2 * c; ++i) g.force[k][i] = distance * 50.0 + i + 0.5 * k;
  }
  return g;
}

struct TempDir {
  std::string path;
  explicit TempDir(const char* tag)
      : path(std::string("/tmp/stonehop_gaitlib_") + tag) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("interpolation is exact at entries and affine between them") {
  GaitLibrary lib;
  lib.add(synthetic_gait(0.6));
  lib.add(synthetic_gait(0.9));
  lib.add(synthetic_gait(0.7));  // out-of-order insert must sort itself
  REQUIRE(lib.size() == 3);
  CHECK(lib.min_distance() == doctest::Approx(0.6));
  CHECK(lib.max_distance() == doctest::Approx(0.9));
  CHECK(lib.gaits[1].jump_distance == doctest::Approx(0.7));

  // Exact at an entry.
  const GaitTrajectory at = lib.interpolate(0.7);
  const GaitTrajectory ref = synthetic_gait(0.7);
  for (int k = 0; k < at.num_knots(); ++k) {
    CHECK((at.q[k] - ref.q[k]).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((at.qd[k] - ref.qd[k]).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((at.tau[k] - ref.tau[k]).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((at.force[k] - ref.force[k]).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  // Between entries: the blend weights are (1-s, s) with s from the distances.
  const double d = 0.78;
  const double s = (d - 0.7) / (0.9 - 0.7);
  const GaitTrajectory mid = lib.interpolate(d);
  CHECK(mid.jump_distance == doctest::Approx(d));
  const GaitTrajectory a = synthetic_gait(0.7);
  const GaitTrajectory b = synthetic_gait(0.9);
  for (int k = 0; k < mid.num_knots(); ++k) {
    const Vec7 expect_q = (1.0 - s) * a.q[k] + s * b.q[k];
    const Vec7 expect_qd = (1.0 - s) * a.qd[k] + s * b.qd[k];
    const Vec4 expect_tau = (1.0 - s) * a.tau[k] + s * b.tau[k];
    CHECK((mid.q[k] - expect_q).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((mid.qd[k] - expect_qd).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((mid.tau[k] - expect_tau).lpNorm<Eigen::Infinity>() < 1e-12);
    const VecX expect_f = (1.0 - s) * a.force[k] + s * b.force[k];
    CHECK((mid.force[k] - expect_f).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("out-of-range requests clamp to the nearest entry") {
  GaitLibrary lib;
  lib.add(synthetic_gait(0.6));
  lib.add(synthetic_gait(0.9));
  const GaitTrajectory low = lib.interpolate(0.3);
  const GaitTrajectory high = lib.interpolate(1.5);
  const GaitTrajectory lo_ref = synthetic_gait(0.6);
  const GaitTrajectory hi_ref = synthetic_gait(0.9);
  CHECK((low.q[50] - lo_ref.q[50]).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((high.q[50] - hi_ref.q[50]).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(low.jump_distance == doctest::Approx(0.6));
  CHECK(high.jump_distance == doctest::Approx(0.9));
}

TEST_CASE("library rejects inconsistent input") {
  GaitLibrary lib;
  lib.add(synthetic_gait(0.6));

  SUBCASE("duplicate distance") {
    CHECK_THROWS_AS(lib.add(synthetic_gait(0.6)), std::invalid_argument);
  }
  SUBCASE("mismatched schedule") {
    GaitTrajectory g = synthetic_gait(0.8);
    g.schedule.rear_touchdown = 25;
    CHECK_THROWS_AS(lib.add(g), std::invalid_argument);
  }
  SUBCASE("inconsistent arrays") {
    GaitTrajectory g = synthetic_gait(0.8);
    g.qd.pop_back();
    CHECK_THROWS_AS(lib.add(g), std::invalid_argument);
  }
  SUBCASE("wrong force rows for the contact set") {
    GaitTrajectory g = synthetic_gait(0.8);
    g.force[0] = VecX::Zero(4);  // knot 0 is front stance only: must be 2
    CHECK_THROWS_AS(lib.add(g), std::invalid_argument);
  }
  SUBCASE("empty library cannot interpolate") {
    GaitLibrary empty;
    CHECK_THROWS_AS(empty.interpolate(0.7), std::runtime_error);
  }
}

TEST_CASE("gait serialization round-trips bit-exactly") {
  const GaitTrajectory g = synthetic_gait(0.7321);
  const std::string path = "/tmp/stonehop_gait_roundtrip.txt";
  save_gait(g, path);
  const GaitTrajectory r = load_gait(path);
  std::remove(path.c_str());

  CHECK(r.jump_distance == g.jump_distance);
  CHECK(r.schedule.num_knots == g.schedule.num_knots);
  CHECK(r.schedule.dt == g.schedule.dt);
  CHECK(r.schedule.rear_touchdown == g.schedule.rear_touchdown);
  CHECK(r.schedule.front_liftoff == g.schedule.front_liftoff);
  CHECK(r.schedule.rear_liftoff == g.schedule.rear_liftoff);
  REQUIRE(r.num_knots() == g.num_knots());
  for (int k = 0; k < g.num_knots(); ++k) {
    CHECK((r.q[k] - g.q[k]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((r.qd[k] - g.qd[k]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((r.tau[k] - g.tau[k]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((r.force[k] - g.force[k]).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("library save/load round-trips through a directory") {
  TempDir dir("roundtrip");
  GaitLibrary lib;
  lib.add(synthetic_gait(0.6));
  lib.add(synthetic_gait(0.7));
  lib.add(synthetic_gait(0.8));
  lib.add(synthetic_gait(0.9));
  save_gait_library(lib, dir.path);

  const GaitLibrary r = load_gait_library(dir.path);
  REQUIRE(r.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(r.gaits[i].jump_distance == lib.gaits[i].jump_distance);
    for (int k = 0; k < r.gaits[i].num_knots(); ++k) {
      CHECK((r.gaits[i].q[k] - lib.gaits[i].q[k]).lpNorm<Eigen::Infinity>() == 0.0);
      CHECK((r.gaits[i].force[k] - lib.gaits[i].force[k]).lpNorm<Eigen::Infinity>() ==
            0.0);
    }
  }
  CHECK_THROWS_AS(load_gait_library("/tmp/definitely_missing_gaitlib_dir"),
                  std::runtime_error);
}

TEST_CASE("time accessors interpolate knots and hold torques") {
  const GaitTrajectory g = synthetic_gait(0.7);
  const double dt = g.schedule.dt;

  // Exactly at a knot.
  CHECK((g.q_at(10 * dt) - g.q[10]).lpNorm<Eigen::Infinity>() < 1e-12);
  // Halfway between knots: linear average.
  const Vec7 half = 0.5 * (g.q[10] + g.q[11]);
  CHECK((g.q_at(10.5 * dt) - half).lpNorm<Eigen::Infinity>() < 1e-12);
  const Vec7 half_qd = 0.5 * (g.qd[10] + g.qd[11]);
  CHECK((g.qd_at(10.5 * dt) - half_qd).lpNorm<Eigen::Infinity>() < 1e-12);
  // Zero-order hold for torque over the containing interval.
  CHECK((g.tau_at(10.5 * dt) - g.tau[10]).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((g.tau_at(10.99 * dt) - g.tau[10]).lpNorm<Eigen::Infinity>() == 0.0);
  // Clamping at both ends.
  CHECK((g.q_at(-1.0) - g.q[0]).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((g.q_at(1e9) - g.q[g.num_knots() - 1]).lpNorm<Eigen::Infinity>() < 1e-12);
  // Contact wrench follows the schedule at the queried time.
  const ContactWrench w = g.force_at(30 * dt);  // double stance window
  CHECK(w.set.count() == 2);
  CHECK(w.f.size() == 4);
}

#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "stonehop/qp.hpp"

using namespace stonehop;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent oracle for small problems: enumerate every candidate active
// set, solve the resulting equality-constrained KKT system, and keep the
// feasible candidate with correct multiplier signs.
struct OracleResult {
  bool found = false;
  VecX x;
  double objective = 0.0;
};

OracleResult enumerate_qp(const QpProblem& p) {
  const int n = static_cast<int>(p.H.rows());
  const int m = static_cast<int>(p.C.rows());
  OracleResult best;

  // Activity code per row: 0 inactive, 1 at c_min, 2 at c_max.
  std::vector<int> code(m, 0);
  const int total = static_cast<int>(std::pow(3, m));
  for (int mask = 0; mask < total; ++mask) {
    int v = mask;
    bool valid = true;
    int na = 0;
    for (int i = 0; i < m; ++i) {
      code[i] = v % 3;
      v /= 3;
      if (code[i] == 1 && !std::isfinite(p.c_min[i])) valid = false;
      if (code[i] == 2 && !std::isfinite(p.c_max[i])) valid = false;
      if (code[i] != 0) ++na;
    }
    if (!valid) continue;

    MatX K = MatX::Zero(n + na, n + na);
    VecX rhs = VecX::Zero(n + na);
    K.topLeftCorner(n, n) = p.H;
    rhs.head(n) = -p.b;
    int r = 0;
    for (int i = 0; i < m; ++i) {
      if (code[i] == 0) continue;
      K.block(n + r, 0, 1, n) = p.C.row(i);
      K.block(0, n + r, n, 1) = p.C.row(i).transpose();
      rhs[n + r] = code[i] == 1 ? p.c_min[i] : p.c_max[i];
      ++r;
    }
    Eigen::FullPivLU<MatX> lu(K);
    if (!lu.isInvertible()) continue;
    const VecX sol = lu.solve(rhs);
    const VecX x = sol.head(n);
    const VecX lam = sol.tail(na);

    // Feasibility of inactive rows and multiplier signs of active rows.
    bool ok = true;
    const VecX cx = p.C * x;
    r = 0;
    for (int i = 0; i < m && ok; ++i) {
      if (code[i] == 0) {
        if (cx[i] < p.c_min[i] - 1e-9 || cx[i] > p.c_max[i] + 1e-9) ok = false;
      } else {
        // KKT row written as C^T lambda added to the gradient: lambda
        // negative presses on c_min, positive on c_max.
        const double l = lam[r++];
        const bool eq_row = p.c_min[i] == p.c_max[i];
        if (!eq_row && code[i] == 1 && l > 1e-9) ok = false;
        if (!eq_row && code[i] == 2 && l < -1e-9) ok = false;
      }
    }
    if (!ok) continue;
    const double obj = 0.5 * x.dot(p.H * x) + p.b.dot(x);
    if (!best.found || obj < best.objective - 1e-12) {
      best.found = true;
      best.x = x;
      best.objective = obj;
    }
  }
  return best;
}

// Stationarity + feasibility + complementarity audit, independent of the
// solver's own residual bookkeeping.
double kkt_audit(const QpProblem& p, const QpSolution& s) {
  double err = (p.H * s.x + p.b + p.C.transpose() * s.duals).lpNorm<Eigen::Infinity>();
  const VecX cx = p.C * s.x;
  for (int i = 0; i < cx.size(); ++i) {
    err = std::max(err, cx[i] - p.c_max[i]);
    err = std::max(err, p.c_min[i] - cx[i]);
    if (p.c_min[i] != p.c_max[i]) {
      if (s.duals[i] > 0.0 && std::isfinite(p.c_max[i])) {
        err = std::max(err, s.duals[i] * std::abs(cx[i] - p.c_max[i]));
      }
      if (s.duals[i] < 0.0 && std::isfinite(p.c_min[i])) {
        err = std::max(err, -s.duals[i] * std::abs(cx[i] - p.c_min[i]));
      }
    }
  }
  return err;
}

MatX random_spd(std::mt19937& rng, int n, double cond = 10.0) {
  std::normal_distribution<double> N(0.0, 1.0);
  MatX A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = N(rng);
  const MatX Q = Eigen::HouseholderQR<MatX>(A).householderQ();
  VecX d(n);
  for (int i = 0; i < n; ++i) d[i] = std::pow(cond, double(i) / std::max(1, n - 1));
  return Q * d.asDiagonal() * Q.transpose();
}

}  // namespace

TEST_CASE("unconstrained minimum is the linear-solve answer") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 5;
    QpProblem p;
    p.H = random_spd(rng, n);
    p.b = VecX::NullaryExpr(n, [&](int) { return std::normal_distribution<double>()(rng); });
    p.C = MatX::Zero(0, n);
    p.c_min.resize(0);
    p.c_max.resize(0);
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::kOptimal);
    const VecX expect = p.H.llt().solve(-p.b);
    CHECK((s.x - expect).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("random inequality QPs match active-set enumeration") {
  std::mt19937 rng(17);
  std::normal_distribution<double> N(0.0, 1.0);
  int solved = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 3;
    const int m = 1 + trial % 4;
    QpProblem p;
    p.H = random_spd(rng, n, 30.0);
    p.b = VecX::NullaryExpr(n, [&](int) { return N(rng); });
    p.C = MatX::NullaryExpr(m, n, [&](int, int) { return N(rng); });
    p.c_min = VecX::Constant(m, -kInf);
    p.c_max.resize(m);
    for (int i = 0; i < m; ++i) p.c_max[i] = 0.5 * std::abs(N(rng));
    const OracleResult oracle = enumerate_qp(p);
    REQUIRE(oracle.found);  // x = 0 is always feasible here
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::kOptimal);
    CHECK((s.x - oracle.x).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(s.objective == doctest::Approx(oracle.objective).epsilon(1e-6));
    CHECK(kkt_audit(p, s) < 1e-6);
    ++solved;
  }
  CHECK(solved == 60);
}

TEST_CASE("two-sided and equality rows match enumeration") {
  std::mt19937 rng(23);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 3;
    QpProblem p;
    p.H = random_spd(rng, n, 10.0);
    p.b = VecX::NullaryExpr(n, [&](int) { return N(rng); });
    const int m = 2;
    p.C = MatX::NullaryExpr(m, n, [&](int, int) { return N(rng); });
    p.c_min.resize(m);
    p.c_max.resize(m);
    // Row 0: two-sided band around zero. Row 1: equality through a feasible
    // point of row 0.
    p.c_min[0] = -0.3 - std::abs(N(rng));
    p.c_max[0] = 0.3 + std::abs(N(rng));
    p.c_min[1] = p.c_max[1] = 0.1 * N(rng);
    const OracleResult oracle = enumerate_qp(p);
    if (!oracle.found) continue;
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::kOptimal);
    CHECK((s.x - oracle.x).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(kkt_audit(p, s) < 1e-6);
  }
}

TEST_CASE("box QP solutions satisfy an independent KKT audit at n = 160") {
  // Pure box constraints on a banded Hessian select the banded elimination
  // path; the audit plus the loose-box comparison cover it against the dense
  // reference.
  std::mt19937 rng(31);
  std::normal_distribution<double> N(0.0, 1.0);
  const int n = 160;
  const int bw = 6;
  MatX H = MatX::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(0, i - bw); j <= std::min(n - 1, i + bw); ++j) {
      if (j < i) H(i, j) = H(j, i);
      else if (i == j) H(i, i) = 2.0 * bw + 2.0;
      else H(i, j) = N(rng) * 0.5;
    }
  }
  VecX b = VecX::NullaryExpr(n, [&](int) { return N(rng); });

  QpProblem p;
  p.H = H;
  p.b = b;
  p.C = MatX::Identity(n, n);

  SUBCASE("loose boxes reproduce the unconstrained solution") {
    p.c_min = VecX::Constant(n, -1e4);
    p.c_max = VecX::Constant(n, 1e4);
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::kOptimal);
    const VecX expect = H.llt().solve(-b);
    CHECK((s.x - expect).lpNorm<Eigen::Infinity>() < 1e-7);
  }
  SUBCASE("tight boxes pass the KKT audit") {
    p.c_min = VecX::Constant(n, -0.05);
    p.c_max = VecX::Constant(n, 0.05);
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::kOptimal);
    CHECK(kkt_audit(p, s) < 1e-6);
    CHECK((p.C * s.x).minCoeff() >= -0.05 - 1e-8);
    CHECK((p.C * s.x).maxCoeff() <= 0.05 + 1e-8);
  }
  SUBCASE("heavily scaled Hessian still solves") {
    p.H = 1e8 * H;
    p.b = 1e8 * b;
    p.c_min = VecX::Constant(n, -0.05);
    p.c_max = VecX::Constant(n, 0.05);
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::kOptimal);
    CHECK(kkt_audit(p, s) / 1e8 < 1e-6);
  }
}

TEST_CASE("warm start does not change the answer") {
  std::mt19937 rng(41);
  std::normal_distribution<double> N(0.0, 1.0);
  const int n = 6;
  QpProblem p;
  p.H = random_spd(rng, n, 50.0);
  p.b = VecX::NullaryExpr(n, [&](int) { return N(rng); });
  p.C = MatX::Identity(n, n);
  p.c_min = VecX::Constant(n, -0.4);
  p.c_max = VecX::Constant(n, 0.4);

  const QpSolution cold = solve_qp(p);
  REQUIRE(cold.status == QpStatus::kOptimal);
  VecX ws = cold.x;
  const QpSolution warm = solve_qp(p, &ws);
  REQUIRE(warm.status == QpStatus::kOptimal);
  CHECK((cold.x - warm.x).lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK(warm.iterations <= cold.iterations);

  VecX far = VecX::Constant(n, 10.0);  // outside the box: must be absorbed
  const QpSolution off = solve_qp(p, &far);
  REQUIRE(off.status == QpStatus::kOptimal);
  CHECK((cold.x - off.x).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("infeasible rows are reported") {
  QpProblem p;
  p.H = MatX::Identity(2, 2);
  p.b = VecX::Zero(2);
  p.C = MatX::Zero(2, 2);
  p.C << 1.0, 0.0, 1.0, 0.0;  // x0 <= -1 and x0 >= 1 simultaneously
  p.c_min.resize(2);
  p.c_max.resize(2);
  p.c_min << -kInf, 1.0;
  p.c_max << -1.0, kInf;
  const QpSolution s = solve_qp(p);
  CHECK(s.status == QpStatus::kInfeasible);
}

TEST_CASE("input validation") {
  QpProblem p;
  p.H = MatX::Identity(2, 2);
  p.b = VecX::Zero(3);  // wrong size
  p.C = MatX::Zero(0, 2);
  p.c_min.resize(0);
  p.c_max.resize(0);
  CHECK_THROWS_AS(solve_qp(p), std::invalid_argument);

  p.b = VecX::Zero(2);
  p.H << 1.0, 0.0, 0.0, -1.0;  // indefinite
  CHECK_THROWS_AS(solve_qp(p), std::invalid_argument);

  p.H = MatX::Identity(2, 2);
  p.C = MatX::Identity(2, 2);
  p.c_min = VecX::Constant(2, 1.0);
  p.c_max = VecX::Constant(2, -1.0);  // crossed bounds
  CHECK_THROWS_AS(solve_qp(p), std::invalid_argument);
}

TEST_CASE("determinism: identical inputs give identical iterates") {
  std::mt19937 rng(53);
  std::normal_distribution<double> N(0.0, 1.0);
  QpProblem p;
  p.H = random_spd(rng, 5, 100.0);
  p.b = VecX::NullaryExpr(5, [&](int) { return N(rng); });
  p.C = MatX::Identity(5, 5);
  p.c_min = VecX::Constant(5, -0.3);
  p.c_max = VecX::Constant(5, 0.3);
  const QpSolution a = solve_qp(p);
  const QpSolution b = solve_qp(p);
  CHECK(a.iterations == b.iterations);
  CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(a.objective == b.objective);
}

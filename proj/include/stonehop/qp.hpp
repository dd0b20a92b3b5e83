#pragma once

#include <Eigen/SparseCore>

#include "stonehop/types.hpp"

namespace stonehop {

// Convex quadratic program
//   minimize    0.5 x^T H x + b^T x
//   subject to  c_min <= C x <= c_max
// Bound entries may be +-infinity; rows with c_min == c_max are equalities.
struct QpProblem {
  MatX H;
  VecX b;
  MatX C;      // m x n (m may be zero)
  VecX c_min;  // m
  VecX c_max;  // m
};

enum class QpStatus { kOptimal, kMaxIterations, kInfeasible };

struct QpSolution {
  VecX x;
  double objective = 0.0;
  QpStatus status = QpStatus::kMaxIterations;
  // max of stationarity, constraint violation and complementarity at the returned
  // point (absolute).
  double kkt_residual = 0.0;
  // Net multiplier per row: positive presses against c_max, negative against
  // c_min; equality rows carry the free equality multiplier. Stationarity reads
  // H x + b + C^T duals = 0.
  VecX duals;
  int iterations = 0;
};

struct QpOptions {
  int max_iterations = 60;
  double tolerance = 1e-9;
  // Reject H whose minimum eigenvalue is below -1e-9 (checked exactly up to this
  // dimension; larger problems rely on the factorization's regularization).
  int convexity_check_dim = 256;
  bool verbose = false;
};

// Primal-dual interior point (Mehrotra predictor-corrector) with dense storage.
// Deterministic: identical inputs produce identical iterates. A warm start can
// only shorten the path, never change the optimum beyond tolerance.
QpSolution solve_qp(const QpProblem& p, const VecX* warm_start = nullptr,
                    const QpOptions& opts = {});

}  // namespace stonehop

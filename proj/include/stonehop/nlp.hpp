#pragma once
// Nonlinear program description with callback-based derivatives, plus an
// augmented-Lagrangian solver that minimizes each subproblem with damped
// Gauss-Newton steps over box-constrained quadratic models (solved by the
// interior-point QP in qp.hpp).

#include <Eigen/Sparse>
#include <functional>

#include "stonehop/types.hpp"

namespace stonehop {

using SpMat = Eigen::SparseMatrix<double>;

// min f(x)  subject to  c_eq(x) = 0,  c_ineq(x) <= 0,  x_lower <= x <= x_upper.
//
// Derivative callbacks are optional. Missing gradients/Jacobians fall back to
// central finite differences (step NlpOptions::fd_step); a missing cost
// Hessian falls back to the identity, which still converges via damping but
// slowly -- supply one for anything beyond toy problems.
struct NlpProblem {
  int n = 0;        // number of decision variables
  int num_eq = 0;   // rows of c_eq
  int num_ineq = 0; // rows of c_ineq

  std::function<double(const VecX&)> cost;
  std::function<VecX(const VecX&)> cost_gradient;          // optional
  std::function<MatX(const VecX&)> cost_hessian;           // optional
  std::function<VecX(const VecX&)> eq;                     // required if num_eq > 0
  std::function<VecX(const VecX&)> ineq;                   // required if num_ineq > 0
  std::function<SpMat(const VecX&)> eq_jacobian;           // optional
  std::function<SpMat(const VecX&)> ineq_jacobian;         // optional

  VecX x_lower;  // may hold -inf entries; empty means unbounded
  VecX x_upper;  // may hold +inf entries; empty means unbounded
  VecX x0;
};

struct NlpOptions {
  int max_outer_iterations = 30;
  int max_inner_iterations = 80;
  double constraint_tolerance = 1e-4;  // unscaled max violation
  double stationarity_tolerance = 1e-3;  // scaled projected-gradient norm
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  double max_penalty = 1e9;
  // Fallback exit once the penalty is capped: with the violation inside
  // tolerance for this many consecutive sweeps and the subproblem gradient
  // stuck at its conditioning floor (below acceptable_stationarity), the
  // iterate is declared converged even though the strict stationarity test
  // cannot be met in double precision.
  double acceptable_stationarity = 0.05;
  int acceptable_streak = 3;
  // Gauss-Newton feasibility-restoration sweeps (see below).
  int restoration_iterations = 30;
  double fd_step = 1e-6;
  bool verbose = false;
};

struct NlpReport {
  VecX x;
  double cost = 0.0;
  // Fresh re-evaluation at the returned x: max over |c_eq|, max(0, c_ineq),
  // and box violation. Unscaled.
  double constraint_violation = 0.0;
  double stationarity = 0.0;  // scaled projected gradient of the Lagrangian
  int outer_iterations = 0;
  int inner_iterations = 0;  // total Gauss-Newton steps across all subproblems
  bool converged = false;
};

// Augmented Lagrangian with shifted inequality penalties: first-order
// multiplier updates after each inner minimization, penalty growth whenever
// the violation fails to contract below 0.7x the previous sweep. When a sweep
// ends infeasible but stationary -- or stagnant at the penalty cap -- a damped
// Gauss-Newton pass on the squared constraint residual chases feasibility
// directly before the multipliers update. Strict convergence requires the
// violation below constraint_tolerance and the scaled projected gradient
// below stationarity_tolerance; the acceptable_* options provide a capped-
// penalty fallback exit for problems whose subproblem conditioning puts the
// strict test out of reach.
NlpReport solve_augmented_lagrangian(const NlpProblem& p, const NlpOptions& opts = {});

}  // namespace stonehop

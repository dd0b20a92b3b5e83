#include "stonehop/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

#include "stonehop/qp.hpp"

namespace stonehop {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VecX fd_gradient(const std::function<double(const VecX&)>& f, const VecX& x,
                 double h) {
  VecX g(x.size());
  VecX xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

SpMat fd_jacobian(const std::function<VecX(const VecX&)>& c, const VecX& x, int m,
                  double h) {
  std::vector<Eigen::Triplet<double>> trips;
  VecX xp = x;
  for (int j = 0; j < x.size(); ++j) {
    const double xj = x[j];
    xp[j] = xj + h;
    const VecX cp = c(xp);
    xp[j] = xj - h;
    const VecX cm = c(xp);
    xp[j] = xj;
    for (int i = 0; i < m; ++i) {
      const double v = (cp[i] - cm[i]) / (2.0 * h);
      if (v != 0.0) trips.emplace_back(i, j, v);
    }
  }
  SpMat J(m, x.size());
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

}  // namespace

NlpReport solve_augmented_lagrangian(const NlpProblem& p, const NlpOptions& opts) {
  const int n = p.n;
  if (n <= 0 || !p.cost) {
    throw std::invalid_argument("nlp: n and a cost callback are required");
  }
  if (p.num_eq > 0 && !p.eq) throw std::invalid_argument("nlp: eq callback missing");
  if (p.num_ineq > 0 && !p.ineq) {
    throw std::invalid_argument("nlp: ineq callback missing");
  }
  const VecX lo = p.x_lower.size() == n ? p.x_lower : VecX::Constant(n, -kInf);
  const VecX hi = p.x_upper.size() == n ? p.x_upper : VecX::Constant(n, kInf);
  for (int i = 0; i < n; ++i) {
    if (lo[i] > hi[i]) throw std::invalid_argument("nlp: empty box");
  }

  VecX x = p.x0.size() == n ? p.x0 : VecX::Zero(n);
  x = x.cwiseMax(lo).cwiseMin(hi);

  auto eval_eq = [&](const VecX& v) { return p.num_eq > 0 ? p.eq(v) : VecX(0); };
  auto eval_ineq = [&](const VecX& v) {
    return p.num_ineq > 0 ? p.ineq(v) : VecX(0);
  };
  auto grad = [&](const VecX& v) {
    return p.cost_gradient ? p.cost_gradient(v) : fd_gradient(p.cost, v, opts.fd_step);
  };
  auto jac_eq = [&](const VecX& v) {
    if (p.num_eq == 0) return SpMat(0, n);
    return p.eq_jacobian ? p.eq_jacobian(v) : fd_jacobian(p.eq, v, p.num_eq, opts.fd_step);
  };
  auto jac_ineq = [&](const VecX& v) {
    if (p.num_ineq == 0) return SpMat(0, n);
    return p.ineq_jacobian ? p.ineq_jacobian(v)
                           : fd_jacobian(p.ineq, v, p.num_ineq, opts.fd_step);
  };

  VecX lambda = VecX::Zero(p.num_eq);
  VecX mu = VecX::Zero(p.num_ineq);
  double rho = opts.initial_penalty;

  // Shifted-penalty augmented Lagrangian. Inequality term is quadratic only
  // while mu_i + rho*c_i > 0; below the shift it flattens to -mu_i^2/(2 rho).
  auto merit = [&](double f, const VecX& ce, const VecX& ci) {
    double L = f;
    if (ce.size() > 0) L += lambda.dot(ce) + 0.5 * rho * ce.squaredNorm();
    for (int i = 0; i < ci.size(); ++i) {
      if (mu[i] + rho * ci[i] > 0.0) {
        L += mu[i] * ci[i] + 0.5 * rho * ci[i] * ci[i];
      } else {
        L += -0.5 * mu[i] * mu[i] / rho;
      }
    }
    return L;
  };

  QpProblem qp;
  qp.C = MatX::Identity(n, n);
  qp.c_min.resize(n);
  qp.c_max.resize(n);
  QpOptions qp_opts;
  qp_opts.tolerance = 1e-10;

  NlpReport rep;
  double spg_scaled = kInf;
  int total_inner = 0;
  double viol_prev = kInf;
  int frozen = 0;
  int feasible_streak = 0;

  for (int outer = 0; outer < opts.max_outer_iterations; ++outer) {
    rep.outer_iterations = outer + 1;
    double delta = 0.0;
    double spg_floor = kInf;
    int stall = 0;

    for (int inner = 0; inner < opts.max_inner_iterations; ++inner) {
      const double f = p.cost(x);
      const VecX ce = eval_eq(x);
      const VecX ci = eval_ineq(x);
      VecX lam_hat = lambda;
      if (ce.size() > 0) lam_hat += rho * ce;
      VecX w(p.num_ineq);
      for (int i = 0; i < p.num_ineq; ++i) w[i] = std::max(0.0, mu[i] + rho * ci[i]);

      const SpMat Je = jac_eq(x);
      const SpMat Ji = jac_ineq(x);
      VecX gL = grad(x);
      const double gf_scale = 1.0 + gL.lpNorm<Eigen::Infinity>();
      if (p.num_eq > 0) gL.noalias() += Je.transpose() * lam_hat;
      if (p.num_ineq > 0) gL.noalias() += Ji.transpose() * w;

      double pg = 0.0;
      for (int i = 0; i < n; ++i) {
        pg = std::max(pg, std::abs(x[i] - std::clamp(x[i] - gL[i], lo[i], hi[i])));
      }
      // Relative to the plain cost gradient: a multiplier- or rho-dependent
      // scale would let the subproblem declare victory while the augmented
      // gradient still towers over the objective's own.
      spg_scaled = pg / gf_scale;
      spg_floor = std::min(spg_floor, spg_scaled);
      if (spg_scaled <= opts.stationarity_tolerance) break;

      MatX Hgn = p.cost_hessian ? p.cost_hessian(x) : MatX::Identity(n, n);
      if (p.num_eq > 0) Hgn += rho * MatX(SpMat(Je.transpose() * Je));
      if (p.num_ineq > 0) {
        // Gauss-Newton curvature only from rows inside the penalty's
        // quadratic region.
        std::vector<Eigen::Triplet<double>> trips;
        std::vector<int> rowmap(p.num_ineq, -1);
        int na = 0;
        for (int i = 0; i < p.num_ineq; ++i) {
          if (mu[i] + rho * ci[i] > 0.0) rowmap[i] = na++;
        }
        if (na > 0) {
          for (int k = 0; k < Ji.outerSize(); ++k) {
            for (SpMat::InnerIterator it(Ji, k); it; ++it) {
              const int r = rowmap[it.row()];
              if (r >= 0) trips.emplace_back(r, static_cast<int>(it.col()), it.value());
            }
          }
          SpMat Ja(na, n);
          Ja.setFromTriplets(trips.begin(), trips.end());
          Hgn += rho * MatX(SpMat(Ja.transpose() * Ja));
        }
      }

      const double dscale = 1.0 + Hgn.diagonal().cwiseAbs().maxCoeff();
      bool stepped = false;
      for (int attempt = 0; attempt < 14 && !stepped; ++attempt) {
        qp.H = Hgn;
        if (delta > 0.0) qp.H.diagonal().array() += delta;
        qp.b = gL;
        qp.c_min = lo - x;
        qp.c_max = hi - x;
        QpSolution qs;
        try {
          qs = solve_qp(qp, nullptr, qp_opts);
        } catch (const std::exception& e) {
          if (opts.verbose) {
            std::printf("  inner %2d  qp threw (%s)  delta %.1e\n", inner, e.what(),
                        delta);
          }
          delta = delta == 0.0 ? 1e-8 * dscale : delta * 10.0;
          continue;
        }
        if (qs.status == QpStatus::kInfeasible) break;
        const VecX d = qs.x;
        const double gd = gL.dot(d);
        if (!(gd < 0.0)) {
          if (opts.verbose) {
            std::printf("  inner %2d  non-descent (gd %.1e)  delta %.1e\n", inner, gd,
                        delta);
          }
          delta = delta == 0.0 ? 1e-8 * dscale : delta * 10.0;
          continue;
        }
        const double L0 = merit(f, ce, ci);
        double t = 1.0;
        bool ok = false;
        for (int ls = 0; ls < 30; ++ls) {
          const VecX xt = x + t * d;
          const double Lt = merit(p.cost(xt), eval_eq(xt), eval_ineq(xt));
          if (std::isfinite(Lt) && Lt <= L0 + 1e-4 * t * gd) {
            x = xt;
            ok = true;
            break;
          }
          t *= 0.5;
        }
        if (ok) {
          stepped = true;
          if (opts.verbose && inner % 10 == 0) {
            std::printf("  inner %2d  f %.6e  spg %.2e  t %.1e  |d| %.2e  delta %.1e\n",
                        inner, f, spg_scaled, t, d.lpNorm<Eigen::Infinity>(), delta);
          }
          // Levenberg-style radius control from the accepted fraction: a
          // heavily cut step means the quadratic model overreached. Growth
          // outpaces shrinkage so the damping locks onto the productive side
          // instead of oscillating across it.
          if (t == 1.0) {
            delta *= 0.4;
            if (delta < 1e-12 * dscale) delta = 0.0;
          } else if (t <= 0.125) {
            delta = std::max(1e-8 * dscale, delta * 6.0);
          }
          if ((t * d).lpNorm<Eigen::Infinity>() <=
              1e-14 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
            ++stall;
          } else {
            stall = 0;
          }
        } else {
          if (opts.verbose) {
            std::printf("  inner %2d  line search failed (gd %.1e |d| %.2e) delta %.1e\n",
                        inner, gd, d.lpNorm<Eigen::Infinity>(), delta);
          }
          delta = delta == 0.0 ? 1e-8 * dscale : delta * 10.0;
        }
      }
      ++total_inner;
      if (!stepped || stall >= 2) break;
    }

    VecX ce = eval_eq(x);
    VecX ci = eval_ineq(x);
    double viol = ce.size() > 0 ? ce.lpNorm<Eigen::Infinity>() : 0.0;
    for (int i = 0; i < ci.size(); ++i) viol = std::max(viol, ci[i]);
    if (opts.verbose) {
      std::printf("al outer %2d  rho %8.1e  viol %9.2e  spg %9.2e\n", outer, rho, viol,
                  spg_scaled);
    }
    // Stationary (or stagnating at the penalty cap) but infeasible: the
    // penalty surface has flattened along a badly scaled constraint fold.
    // Chase feasibility directly with damped Gauss-Newton on the squared
    // residual inside the box, then resume; the multiplier update below then
    // happens at the restored, near-feasible point.
    bool restored = false;
    const bool capped_stall = rho >= opts.max_penalty && viol > 0.7 * viol_prev;
    if (viol > opts.constraint_tolerance &&
        (spg_scaled <= opts.stationarity_tolerance || capped_stall)) {
      double lm = 1e-6;
      for (int it = 0; it < opts.restoration_iterations &&
                       viol > 0.5 * opts.constraint_tolerance;
           ++it) {
        VecX r(p.num_eq + p.num_ineq);
        if (p.num_eq > 0) r.head(p.num_eq) = ce;
        for (int i = 0; i < p.num_ineq; ++i) {
          r[p.num_eq + i] = std::max(0.0, ci[i]);
        }
        const SpMat Je = jac_eq(x);
        const SpMat Ji = jac_ineq(x);
        VecX g = VecX::Zero(n);
        MatX H = MatX::Zero(n, n);
        if (p.num_eq > 0) {
          g.noalias() += Je.transpose() * r.head(p.num_eq);
          H += MatX(SpMat(Je.transpose() * Je));
        }
        if (p.num_ineq > 0) {
          std::vector<Eigen::Triplet<double>> trips;
          for (int k = 0; k < Ji.outerSize(); ++k) {
            for (SpMat::InnerIterator it2(Ji, k); it2; ++it2) {
              if (r[p.num_eq + it2.row()] > 0.0) {
                trips.emplace_back(static_cast<int>(it2.row()),
                                   static_cast<int>(it2.col()), it2.value());
              }
            }
          }
          SpMat Ja(p.num_ineq, n);
          Ja.setFromTriplets(trips.begin(), trips.end());
          g.noalias() += Ja.transpose() * r.tail(p.num_ineq);
          H += MatX(SpMat(Ja.transpose() * Ja));
        }
        const double r2 = 0.5 * r.squaredNorm();
        bool accepted = false;
        for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
          qp.H = H;
          qp.H.diagonal().array() += lm;
          qp.b = g;
          qp.c_min = lo - x;
          qp.c_max = hi - x;
          QpSolution qs;
          try {
            qs = solve_qp(qp, nullptr, qp_opts);
          } catch (const std::exception&) {
            lm *= 10.0;
            continue;
          }
          const VecX xt = (x + qs.x).cwiseMax(lo).cwiseMin(hi);
          const VecX cet = eval_eq(xt);
          const VecX cit = eval_ineq(xt);
          double t2 = cet.size() > 0 ? 0.5 * cet.squaredNorm() : 0.0;
          for (int i = 0; i < cit.size(); ++i) {
            const double v = std::max(0.0, cit[i]);
            t2 += 0.5 * v * v;
          }
          if (t2 < r2) {
            x = xt;
            ce = cet;
            ci = cit;
            lm = std::max(1e-8, lm / 3.0);
            accepted = true;
            restored = true;
          } else {
            lm *= 10.0;
          }
        }
        if (!accepted) break;
        viol = ce.size() > 0 ? ce.lpNorm<Eigen::Infinity>() : 0.0;
        for (int i = 0; i < ci.size(); ++i) viol = std::max(viol, ci[i]);
      }
      if (opts.verbose) {
        std::printf("al outer %2d  restore       viol %9.2e\n", outer, viol);
      }
    }
    // A restored iterate invalidates the stationarity measure; the next sweep
    // re-evaluates it (cheaply, if the point is already optimal) before the
    // test can pass.
    if (!restored && viol <= opts.constraint_tolerance &&
        spg_scaled <= opts.stationarity_tolerance) {
      rep.converged = true;
      break;
    }
    // Acceptable exit: the penalty is capped, the violation has stayed inside
    // tolerance across consecutive sweeps, and the subproblem gradient has
    // bottomed out at its conditioning floor rather than at the strict test.
    feasible_streak = viol <= opts.constraint_tolerance ? feasible_streak + 1 : 0;
    if (rho >= opts.max_penalty && feasible_streak >= opts.acceptable_streak &&
        spg_floor <= opts.acceptable_stationarity) {
      rep.converged = true;
      break;
    }
    // Bail out once the iterate stops moving at the penalty cap; further
    // outer sweeps would replay the same subproblem.
    frozen = (viol == viol_prev && rho >= opts.max_penalty) ? frozen + 1 : 0;
    if (frozen >= 3) break;
    // First-order multiplier update every sweep: the multipliers, not the
    // penalty, should carry the constraints, or rho must grow until the
    // subproblem turns hopelessly ill-conditioned. The penalty only steps in
    // when feasibility stagnates.
    if (ce.size() > 0) {
      lambda += rho * ce;
      lambda = lambda.cwiseMax(-1e12).cwiseMin(1e12);
    }
    for (int i = 0; i < p.num_ineq; ++i) {
      mu[i] = std::clamp(mu[i] + rho * ci[i], 0.0, 1e12);
    }
    if (viol > 0.7 * viol_prev) {
      rho = std::min(rho * opts.penalty_growth, opts.max_penalty);
    }
    viol_prev = viol;
  }

  rep.x = x;
  rep.cost = p.cost(x);
  rep.inner_iterations = total_inner;
  rep.stationarity = spg_scaled;
  const VecX ce = eval_eq(x);
  const VecX ci = eval_ineq(x);
  double viol = ce.size() > 0 ? ce.lpNorm<Eigen::Infinity>() : 0.0;
  for (int i = 0; i < ci.size(); ++i) viol = std::max(viol, ci[i]);
  for (int i = 0; i < n; ++i) {
    viol = std::max({viol, lo[i] - x[i], x[i] - hi[i]});
  }
  rep.constraint_violation = std::max(viol, 0.0);
  return rep;
}

}  // namespace stonehop

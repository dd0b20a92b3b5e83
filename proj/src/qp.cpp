#include "stonehop/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace stonehop {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One inequality side: side = +1 keeps C x <= rhs, side = -1 keeps C x >= rhs.
struct Bound {
  int row;
  double side;
  double rhs;
};

// Lower-band Cholesky on dense storage, packed (bw+1) x n: B(r, j) = L(j+r, j).
// Returns false when a pivot drops below zero (needs regularization).
bool banded_llt(const MatX& G, int bw, MatX& B) {
  const int n = static_cast<int>(G.rows());
  B.setZero(bw + 1, n);
  for (int j = 0; j < n; ++j) {
    double d = G(j, j);
    const int k0 = std::max(0, j - bw);
    for (int k = k0; k < j; ++k) {
      const double l = B(j - k, k);
      d -= l * l;
    }
    if (!(d > 0.0)) return false;
    const double djj = std::sqrt(d);
    B(0, j) = djj;
    const int imax = std::min(n - 1, j + bw);
    for (int i = j + 1; i <= imax; ++i) {
      double v = G(i, j);
      const int kk0 = std::max({0, i - bw, j - bw});
      for (int k = kk0; k < j; ++k) v -= B(i - k, k) * B(j - k, k);
      B(i - j, j) = v / djj;
    }
  }
  return true;
}

void banded_solve(const MatX& B, int bw, VecX& x) {
  const int n = static_cast<int>(B.cols());
  for (int j = 0; j < n; ++j) {  // forward
    x[j] /= B(0, j);
    const int imax = std::min(n - 1, j + bw);
    for (int i = j + 1; i <= imax; ++i) x[i] -= B(i - j, j) * x[j];
  }
  for (int j = n - 1; j >= 0; --j) {  // backward
    const int imax = std::min(n - 1, j + bw);
    for (int i = j + 1; i <= imax; ++i) x[j] -= B(i - j, j) * x[i];
    x[j] /= B(0, j);
  }
}

// Shared factorization wrapper: banded Cholesky when the pattern is narrow,
// otherwise dense LLT; with equality rows, an unsymmetric-pivoting dense LU on
// the full KKT matrix.
struct Solver {
  int n = 0, ne = 0, bw = 0;
  bool banded = false;
  MatX band;
  Eigen::LLT<MatX> llt;
  Eigen::PartialPivLU<MatX> lu;
  MatX kkt;

  bool factor(const MatX& G, const MatX& Ae) {
    n = static_cast<int>(G.rows());
    ne = static_cast<int>(Ae.rows());
    if (ne == 0) {
      if (banded) return banded_llt(G, bw, band);
      llt.compute(G);
      return llt.info() == Eigen::Success;
    }
    kkt.setZero(n + ne, n + ne);
    kkt.topLeftCorner(n, n) = G;
    kkt.topRightCorner(n, ne) = Ae.transpose();
    kkt.bottomLeftCorner(ne, n) = Ae;
    kkt.bottomRightCorner(ne, ne).diagonal().setConstant(-1e-12);
    lu.compute(kkt);
    const auto& d = lu.matrixLU().diagonal();
    for (int i = 0; i < d.size(); ++i) {
      if (!(std::abs(d[i]) > 1e-14 * (1.0 + std::abs(d[0])))) return false;
    }
    return true;
  }

  void solve(VecX& rx, VecX& ry) const {
    if (ne == 0) {
      if (banded) {
        banded_solve(band, bw, rx);
      } else {
        rx = llt.solve(rx);
      }
      return;
    }
    VecX r(n + ne);
    r.head(n) = rx;
    r.tail(ne) = ry;
    const VecX sol = lu.solve(r);
    rx = sol.head(n);
    ry = sol.tail(ne);
  }
};

}  // namespace

QpSolution solve_qp(const QpProblem& p, const VecX* warm_start, const QpOptions& opts) {
  const int n = static_cast<int>(p.H.rows());
  const int m = static_cast<int>(p.C.rows());
  if (p.H.cols() != n || p.b.size() != n || (m > 0 && p.C.cols() != n) ||
      p.c_min.size() != m || p.c_max.size() != m) {
    throw std::invalid_argument("solve_qp: inconsistent dimensions");
  }
  for (int i = 0; i < m; ++i) {
    if (p.c_min[i] > p.c_max[i]) {
      throw std::invalid_argument("solve_qp: c_min exceeds c_max on row " +
                                  std::to_string(i));
    }
  }

  QpSolution sol;
  if (n == 0) {
    sol.status = QpStatus::kOptimal;
    sol.x = VecX();
    sol.duals = VecX::Zero(m);
    return sol;
  }

  const MatX H = 0.5 * (p.H + p.H.transpose());
  if (n <= opts.convexity_check_dim) {
    Eigen::SelfAdjointEigenSolver<MatX> es(H, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
      throw std::invalid_argument("solve_qp: H is not positive semidefinite");
    }
  }

  // Row classification. Equality rows keep a free multiplier; finite inequality
  // sides get slack/dual pairs.
  std::vector<int> eq_rows;
  std::vector<Bound> bounds;
  for (int i = 0; i < m; ++i) {
    const bool lo = std::isfinite(p.c_min[i]);
    const bool hi = std::isfinite(p.c_max[i]);
    if (lo && hi && p.c_min[i] == p.c_max[i]) {
      eq_rows.push_back(i);
      continue;
    }
    if (hi) bounds.push_back({i, +1.0, p.c_max[i]});
    if (lo) bounds.push_back({i, -1.0, p.c_min[i]});
  }
  const int ne = static_cast<int>(eq_rows.size());
  const int nb = static_cast<int>(bounds.size());

  Eigen::SparseMatrix<double, Eigen::RowMajor> C(m, n);
  if (m > 0) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        if (p.C(i, j) != 0.0) trips.emplace_back(i, j, p.C(i, j));
      }
    }
    C.setFromTriplets(trips.begin(), trips.end());
  }
  MatX Ae(ne, n);
  VecX de(ne);
  for (int k = 0; k < ne; ++k) {
    Ae.row(k) = p.C.row(eq_rows[k]);
    de[k] = p.c_min[eq_rows[k]];
  }

  // Structural bandwidth of H + C^T D C (D diagonal) for the banded fast path.
  Solver solver;
  {
    int bw = 0;
    for (int i = 0; i < n && bw < n - 1; ++i) {
      for (int j = 0; j < i; ++j) {
        if (H(i, j) != 0.0) bw = std::max(bw, i - j);
      }
    }
    for (int i = 0; i < m; ++i) {
      int lo = n, hi = -1;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(C, i); it;
           ++it) {
        lo = std::min(lo, static_cast<int>(it.col()));
        hi = std::max(hi, static_cast<int>(it.col()));
      }
      if (hi >= lo) bw = std::max(bw, hi - lo);
    }
    solver.bw = bw;
    solver.banded = ne == 0 && n >= 128 && bw + 1 <= n / 4;
  }

  // Interior start.
  VecX x = warm_start && warm_start->size() == n ? *warm_start : VecX::Zero(n);
  VecX y = VecX::Zero(ne);
  VecX s(nb), z(nb);
  {
    const VecX cx = C * x;
    for (int j = 0; j < nb; ++j) {
      const double slack = bounds[j].side * (bounds[j].rhs - cx[bounds[j].row]);
      s[j] = std::max(slack, 1.0);
      z[j] = 1.0;
    }
  }

  const double bscale = 1.0 + p.b.lpNorm<Eigen::Infinity>();
  double cscale = 1.0;
  for (int j = 0; j < nb; ++j) cscale = std::max(cscale, std::abs(bounds[j].rhs));
  for (int k = 0; k < ne; ++k) cscale = std::max(cscale, std::abs(de[k]));
  const double eps_p = opts.tolerance * cscale;
  const double eps_d = opts.tolerance * bscale;
  const double eps_mu = opts.tolerance * std::max(bscale, cscale);

  VecX rd(n), cx(m), rb(nb), re(ne);
  double mu = 1.0, comp_max = kInf, feas_p = kInf, feas_d = kInf;
  double reg = 0.0;

  auto residuals = [&]() {
    cx = C * x;
    rd = H * x + p.b;
    if (ne > 0) rd.noalias() += Ae.transpose() * y;
    for (int j = 0; j < nb; ++j) {
      const double w = bounds[j].side * z[j];
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
               C, bounds[j].row);
           it; ++it) {
        rd[it.col()] += w * it.value();
      }
    }
    for (int j = 0; j < nb; ++j) {
      // side*(cx - rhs) + s = 0 at feasibility
      rb[j] = bounds[j].side * (cx[bounds[j].row] - bounds[j].rhs) + s[j];
    }
    for (int k = 0; k < ne; ++k) re[k] = cx[eq_rows[k]] - de[k];
    mu = nb > 0 ? s.dot(z) / nb : 0.0;
    comp_max = 0.0;
    for (int j = 0; j < nb; ++j) comp_max = std::max(comp_max, s[j] * z[j]);
    feas_p = 0.0;
    for (int j = 0; j < nb; ++j) {
      feas_p = std::max(feas_p, bounds[j].side * (cx[bounds[j].row] - bounds[j].rhs));
    }
    feas_p = std::max(feas_p, ne > 0 ? re.lpNorm<Eigen::Infinity>() : 0.0);
    feas_d = rd.lpNorm<Eigen::Infinity>();
  };

  // rd/rb/re must be fresh when called.
  auto build_and_factor = [&]() {
    MatX G = H;
    for (int j = 0; j < nb; ++j) {
      const double w = z[j] / s[j];
      // rank-1 update restricted to the row support
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
               C, bounds[j].row);
           it; ++it) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator jt(
                 C, bounds[j].row);
             jt; ++jt) {
          G(it.col(), jt.col()) += w * it.value() * jt.value();
        }
      }
    }
    if (reg > 0.0) G.diagonal().array() += reg;
    while (!solver.factor(G, Ae)) {
      reg = reg == 0.0 ? 1e-10 * (1.0 + H.diagonal().cwiseAbs().maxCoeff()) : reg * 100.0;
      if (reg > 1e6) throw std::runtime_error("solve_qp: factorization failed");
      G.diagonal().array() += reg;
    }
  };

  // Solves the Newton system for given complementarity target rc (= s.*z - sigma*mu
  // or the corrector form); returns (dx, dy, ds, dz).
  VecX dx(n), dy(ne), ds(nb), dz(nb);
  auto newton = [&](const VecX& rc) {
    VecX rhs = -rd;
    for (int j = 0; j < nb; ++j) {
      const double w = (rc[j] - z[j] * rb[j]) / s[j];
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
               C, bounds[j].row);
           it; ++it) {
        rhs[it.col()] += bounds[j].side * w * it.value();
      }
    }
    dx = rhs;
    dy = -re;
    solver.solve(dx, dy);
    const VecX cdx = C * dx;
    for (int j = 0; j < nb; ++j) {
      ds[j] = -rb[j] - bounds[j].side * cdx[bounds[j].row];
      dz[j] = -(rc[j] + z[j] * ds[j]) / s[j];
    }
  };

  auto max_step = [&](const VecX& v, const VecX& dv) {
    double a = 1.0;
    for (int j = 0; j < static_cast<int>(v.size()); ++j) {
      if (dv[j] < 0.0) a = std::min(a, -v[j] / dv[j]);
    }
    return a;
  };

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    residuals();
    if (opts.verbose) {
      std::printf("qp it %2d  mu %9.2e  feas_p %9.2e  feas_d %9.2e\n", it, mu, feas_p,
                  feas_d);
    }
    if (feas_p <= eps_p && feas_d <= eps_d && comp_max <= eps_mu) {
      sol.status = QpStatus::kOptimal;
      break;
    }
    if (nb == 0 && ne == 0) {
      // Unconstrained: single Newton solve.
      build_and_factor();
      VecX rhs = -rd, none(0);
      solver.solve(rhs, none);
      x += rhs;
      continue;
    }

    build_and_factor();

    // Predictor.
    VecX rc(nb);
    for (int j = 0; j < nb; ++j) rc[j] = s[j] * z[j];
    newton(rc);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    double mu_aff = 0.0;
    for (int j = 0; j < nb; ++j) {
      mu_aff += (s[j] + a_aff * ds[j]) * (z[j] + a_aff * dz[j]);
    }
    mu_aff = nb > 0 ? mu_aff / nb : 0.0;
    const double sigma =
        mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0) : 0.0;

    // Corrector.
    for (int j = 0; j < nb; ++j) rc[j] = s[j] * z[j] + ds[j] * dz[j] - sigma * mu;
    newton(rc);
    const double a = 0.995 * std::min(max_step(s, ds), max_step(z, dz));
    const double step = std::min(1.0, a);
    x += step * dx;
    y += step * dy;
    s += step * ds;
    z += step * dz;

    if (z.size() > 0 && z.lpNorm<Eigen::Infinity>() > 1e14) break;
  }

  residuals();
  if (sol.status != QpStatus::kOptimal) {
    sol.status = feas_p > std::max(1e-6, eps_p * 10.0) ? QpStatus::kInfeasible
                                                       : QpStatus::kMaxIterations;
    if (feas_p <= eps_p * 10.0 && feas_d <= eps_d * 10.0 &&
        comp_max <= eps_mu * 10.0) {
      sol.status = QpStatus::kOptimal;  // grazing convergence on the last step
    }
  }
  sol.x = x;
  sol.objective = 0.5 * x.dot(H * x) + p.b.dot(x);
  sol.iterations = it;
  sol.duals = VecX::Zero(m);
  for (int j = 0; j < nb; ++j) sol.duals[bounds[j].row] += bounds[j].side * z[j];
  for (int k = 0; k < ne; ++k) sol.duals[eq_rows[k]] += y[k];
  double comp = 0.0;
  for (int j = 0; j < nb; ++j) comp = std::max(comp, std::abs(s[j] * z[j]));
  sol.kkt_residual = std::max({feas_d, std::max(feas_p, 0.0), comp});
  return sol;
}

}  // namespace stonehop

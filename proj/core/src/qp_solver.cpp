#include "nnrep/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/SparseCholesky>

#include "nnrep/error.hpp"

namespace nnrep {
namespace {

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqFactor = 1e3;

enum class RowType { Inequality, Equality, Free };

double clamp_norm(double v) {
  if (v < kMinScaling) return 1.0;
  return std::min(v, kMaxScaling);
}

double inf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

Vector col_inf_norms(const SparseMatrix& M) {
  Vector out = Vector::Zero(M.cols());
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
      out(it.col()) = std::max(out(it.col()), std::abs(it.value()));
    }
  }
  return out;
}

Vector row_inf_norms(const SparseMatrix& M) {
  Vector out = Vector::Zero(M.rows());
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
      out(it.row()) = std::max(out(it.row()), std::abs(it.value()));
    }
  }
  return out;
}

Vector clamp_vec(const Vector& v, const Vector& lo, const Vector& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

std::string to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Solved: return "solved";
    case QpStatus::PrimalInfeasible: return "primal_infeasible";
    case QpStatus::DualInfeasible: return "dual_infeasible";
    case QpStatus::IterationLimit: return "iteration_limit";
    case QpStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

struct QpSolver::Impl {
  QpSettings s;
  int n = 0;
  int m = 0;

  // Original data.
  SparseMatrix P0;
  Vector q0;
  SparseMatrix A0;

  // Scaled data: P = c D P0 D, q = c D q0, A = E A0 D.
  SparseMatrix P;
  Vector q;
  SparseMatrix A;
  SparseMatrix At;
  Vector D;
  Vector E;
  Vector Dinv;
  Vector Einv;
  double c = 1.0;

  std::vector<RowType> row_type;
  double rho = 0.1;
  Vector rho_vec;
  Vector rho_inv;

  SparseMatrix kkt;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt;
  bool analyzed = false;
  std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max();

  // Singleton rows of A0: (variable, coefficient) or variable -1.
  std::vector<std::pair<int, double>> singleton;

  void scale();
  void set_rho_vector();
  bool factorize();
  QpResult run(const Vector& l, const Vector& u, const Vector& warm_x, const Vector& warm_y);
  QpResult run_admm(const Vector& l, const Vector& u, const Vector& warm_x, const Vector& warm_y);
  QpResult run_ipm(const Vector& l, const Vector& u, const Vector& warm_x);

  struct Residuals {
    double prim = 0.0;
    double dual = 0.0;
    double eps_prim = 0.0;
    double eps_dual = 0.0;
    // Scaled quantities for step-size adaptation.
    double prim_scaled_rel = 0.0;
    double dual_scaled_rel = 0.0;
    double prim_scale = 0.0;
    double dual_scale = 0.0;
  };
  Residuals residuals(const Vector& x, const Vector& z, const Vector& y) const;
  bool primal_infeasible(const Vector& dy, const Vector& l, const Vector& u, bool& certified) const;
  bool dual_infeasible(const Vector& dx, const Vector& l, const Vector& u) const;
  bool certify_infeasible(const Vector& dy_unscaled, const Vector& l, const Vector& u) const;
  bool polish(const Vector& x, const Vector& z, const Vector& y, const Vector& l, const Vector& u,
              QpResult& out) const;
  void finish(QpResult& r, const Vector& xs, const Vector& ys) const;
};

void QpSolver::Impl::scale() {
  D = Vector::Ones(n);
  E = Vector::Ones(m);
  c = 1.0;
  P = P0;
  q = q0;
  A = A0;
  for (int it = 0; it < s.scaling_iters; ++it) {
    const Vector pcol = col_inf_norms(P);
    const Vector acol = col_inf_norms(A);
    Vector dt(n);
    for (int j = 0; j < n; ++j) dt(j) = 1.0 / std::sqrt(clamp_norm(std::max(pcol(j), acol(j))));
    Vector et(m);
    const Vector arow = row_inf_norms(A);
    for (int i = 0; i < m; ++i) et(i) = 1.0 / std::sqrt(clamp_norm(arow(i)));

    P = dt.asDiagonal() * P * dt.asDiagonal();
    A = et.asDiagonal() * A * dt.asDiagonal();
    q = dt.cwiseProduct(q);
    D = D.cwiseProduct(dt);
    E = E.cwiseProduct(et);

    const Vector pc = col_inf_norms(P);
    const double mean_col = n > 0 ? pc.mean() : 0.0;
    double ct = std::max(mean_col, inf_norm(q));
    ct = 1.0 / clamp_norm(ct);
    P *= ct;
    q *= ct;
    c *= ct;
  }
  Dinv = D.cwiseInverse();
  Einv = E.cwiseInverse();
  At = A.transpose();
}

void QpSolver::Impl::set_rho_vector() {
  rho_vec.resize(m);
  for (int i = 0; i < m; ++i) {
    switch (row_type[static_cast<std::size_t>(i)]) {
      case RowType::Inequality: rho_vec(i) = rho; break;
      case RowType::Equality: rho_vec(i) = kRhoEqFactor * rho; break;
      case RowType::Free: rho_vec(i) = kRhoMin; break;
    }
  }
  rho_inv = rho_vec.cwiseInverse();
}

bool QpSolver::Impl::factorize() {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(P.nonZeros() + A.nonZeros() + n + m));
  for (int k = 0; k < P.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(P, k); it; ++it) {
      if (it.row() >= it.col()) trip.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int j = 0; j < n; ++j) trip.emplace_back(j, j, s.sigma);
  for (int k = 0; k < A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      trip.emplace_back(n + it.row(), it.col(), it.value());
    }
  }
  for (int i = 0; i < m; ++i) trip.emplace_back(n + i, n + i, -rho_inv(i));
  kkt.resize(n + m, n + m);
  kkt.setFromTriplets(trip.begin(), trip.end());
  if (!analyzed) {
    ldlt.analyzePattern(kkt);
    analyzed = true;
  }
  ldlt.factorize(kkt);
  return ldlt.info() == Eigen::Success;
}

QpSolver::Impl::Residuals QpSolver::Impl::residuals(const Vector& x, const Vector& z, const Vector& y) const {
  Residuals r;
  const Vector Ax = A * x;
  const Vector Px = P * x;
  const Vector Aty = At * y;
  const Vector Ax_u = Einv.cwiseProduct(Ax);
  const Vector z_u = Einv.cwiseProduct(z);
  r.prim = m > 0 ? inf_norm(Ax_u - z_u) : 0.0;
  const Vector Px_u = Dinv.cwiseProduct(Px) / c;
  const Vector Aty_u = Dinv.cwiseProduct(Aty) / c;
  const Vector q_u = Dinv.cwiseProduct(q) / c;
  r.dual = inf_norm(Px_u + q_u + Aty_u);
  r.prim_scale = std::max(inf_norm(Ax_u), inf_norm(z_u));
  r.dual_scale = std::max({inf_norm(Px_u), inf_norm(Aty_u), inf_norm(q_u)});
  r.eps_prim = s.eps_abs + s.eps_rel * r.prim_scale;
  r.eps_dual = s.eps_abs + s.eps_rel * r.dual_scale;

  const double prim_s = m > 0 ? inf_norm(Ax - z) : 0.0;
  const double dual_s = inf_norm(Px + q + Aty);
  r.prim_scaled_rel = prim_s / (std::max(inf_norm(Ax), inf_norm(z)) + 1e-30);
  r.dual_scaled_rel = dual_s / (std::max({inf_norm(Px), inf_norm(Aty), inf_norm(q)}) + 1e-30);
  return r;
}

bool QpSolver::Impl::certify_infeasible(const Vector& dy, const Vector& l, const Vector& u) const {
  // Box implied by singleton rows.
  Vector lo = Vector::Constant(n, -std::numeric_limits<double>::infinity());
  Vector hi = Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (int i = 0; i < m; ++i) {
    const auto [var, a] = singleton[static_cast<std::size_t>(i)];
    if (var < 0) continue;
    if (a > 0) {
      lo(var) = std::max(lo(var), l(i) / a);
      hi(var) = std::min(hi(var), u(i) / a);
    } else {
      lo(var) = std::max(lo(var), u(i) / a);
      hi(var) = std::min(hi(var), l(i) / a);
    }
  }
  for (int j = 0; j < n; ++j) {
    if (lo(j) > hi(j)) return true;
  }
  // Every feasible x has Ax in [l,u], so (A'dy)'x <= sup_{z in [l,u]} dy'z.
  // Infeasible when the left side is bounded below by more than that.
  double support = 0.0;
  double mag = 0.0;
  for (int i = 0; i < m; ++i) {
    if (dy(i) > 0) {
      if (std::isinf(u(i))) return false;
      support += dy(i) * u(i);
      mag += std::abs(dy(i) * u(i));
    } else if (dy(i) < 0) {
      if (std::isinf(l(i))) return false;
      support += dy(i) * l(i);
      mag += std::abs(dy(i) * l(i));
    }
  }
  const Vector r = A0.transpose() * dy;
  double floor_val = 0.0;
  for (int j = 0; j < n; ++j) {
    if (r(j) == 0.0) continue;
    const double bound = r(j) > 0 ? lo(j) : hi(j);
    if (std::isinf(bound)) return false;
    floor_val += r(j) * bound;
    mag += std::abs(r(j) * bound);
  }
  const double margin = 1e-12 * mag + 1e-14 * inf_norm(dy);
  return support < floor_val - margin;
}

bool QpSolver::Impl::primal_infeasible(const Vector& dy_s, const Vector& l, const Vector& u,
                                       bool& certified) const {
  certified = false;
  Vector dy = E.cwiseProduct(dy_s);
  for (int i = 0; i < m; ++i) {
    if (std::isinf(u(i))) dy(i) = std::min(dy(i), 0.0);
    if (std::isinf(l(i))) dy(i) = std::max(dy(i), 0.0);
  }
  const double norm = inf_norm(dy);
  if (norm < 1e-30) return false;
  const Vector Atdy = A0.transpose() * dy;
  if (inf_norm(Atdy) > s.eps_prim_inf * norm) return false;
  double support = 0.0;
  for (int i = 0; i < m; ++i) {
    if (dy(i) > 0) support += dy(i) * u(i);
    if (dy(i) < 0) support += dy(i) * l(i);
  }
  if (!(support < -s.eps_prim_inf * norm)) return false;
  certified = certify_infeasible(dy, l, u);
  return true;
}

bool QpSolver::Impl::dual_infeasible(const Vector& dx_s, const Vector& l, const Vector& u) const {
  const Vector dx = D.cwiseProduct(dx_s);
  const double norm = inf_norm(dx);
  if (norm < 1e-30) return false;
  const Vector Pdx = Dinv.cwiseProduct(P * dx_s) / c;
  if (inf_norm(Pdx) > s.eps_dual_inf * norm) return false;
  const double qdx = q.dot(dx_s) / c;
  if (!(qdx < -s.eps_dual_inf * norm)) return false;
  const Vector Adx = Einv.cwiseProduct(A * dx_s);
  for (int i = 0; i < m; ++i) {
    const bool upper = !std::isinf(u(i));
    const bool lower = !std::isinf(l(i));
    if (upper && Adx(i) > s.eps_dual_inf * norm) return false;
    if (lower && Adx(i) < -s.eps_dual_inf * norm) return false;
  }
  return true;
}

void QpSolver::Impl::finish(QpResult& r, const Vector& xs, const Vector& ys) const {
  r.x = D.cwiseProduct(xs);
  r.y = E.cwiseProduct(ys) / c;
  r.objective = 0.5 * r.x.dot(P0 * r.x) + q0.dot(r.x);
}

bool QpSolver::Impl::polish(const Vector& x, const Vector& z, const Vector& y, const Vector& l,
                            const Vector& u, QpResult& out) const {
  // Active set guess: -1 lower, +1 upper, 2 equality, 0 inactive.
  std::vector<int> act(static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i) {
    if (l(i) == u(i)) {
      act[static_cast<std::size_t>(i)] = 2;
    } else if (z(i) - l(i) < -y(i)) {
      act[static_cast<std::size_t>(i)] = -1;
    } else if (u(i) - z(i) < y(i)) {
      act[static_cast<std::size_t>(i)] = 1;
    }
  }
  const Residuals start = residuals(x, z, y);

  SparseMatrix Pl(n, n);
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (int col = 0; col < P.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(P, col); it; ++it) {
        if (it.row() >= it.col()) trip.emplace_back(it.row(), it.col(), it.value());
      }
    }
    Pl.setFromTriplets(trip.begin(), trip.end());
  }

  Vector xp;
  Vector yp;
  bool settled = false;
  // A few primal-dual active-set corrections starting from the ADMM guess.
  for (int round = 0; round < 4; ++round) {
    std::vector<int> rows;
    std::vector<int> pos(static_cast<std::size_t>(m), -1);
    for (int i = 0; i < m; ++i) {
      if (act[static_cast<std::size_t>(i)] != 0) {
        pos[static_cast<std::size_t>(i)] = static_cast<int>(rows.size());
        rows.push_back(i);
      }
    }
    const int k = static_cast<int>(rows.size());
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<Eigen::Triplet<double>> ared_trip;
    for (int col = 0; col < Pl.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(Pl, col); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    }
    for (int j = 0; j < n; ++j) trip.emplace_back(j, j, s.polish_delta);
    for (int col = 0; col < A.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
        const int r = pos[static_cast<std::size_t>(it.row())];
        if (r < 0) continue;
        trip.emplace_back(n + r, it.col(), it.value());
        ared_trip.emplace_back(r, it.col(), it.value());
      }
    }
    for (int r = 0; r < k; ++r) trip.emplace_back(n + r, n + r, -s.polish_delta);
    SparseMatrix K(n + k, n + k);
    K.setFromTriplets(trip.begin(), trip.end());
    SparseMatrix Ared(k, n);
    Ared.setFromTriplets(ared_trip.begin(), ared_trip.end());
    const SparseMatrix AredT = Ared.transpose();

    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> solver;
    solver.compute(K);
    if (solver.info() != Eigen::Success) return false;

    Vector rhs(n + k);
    rhs.head(n) = -q;
    for (int r = 0; r < k; ++r) {
      const int row = rows[static_cast<std::size_t>(r)];
      rhs(n + r) = act[static_cast<std::size_t>(row)] > 0 ? u(row) : l(row);
    }
    Vector sol = solver.solve(rhs);
    for (int it = 0; it < s.polish_refine_iters; ++it) {
      Vector Ksol(n + k);
      Ksol.head(n) = P * sol.head(n) + AredT * sol.tail(k);
      Ksol.tail(k) = Ared * sol.head(n);
      const Vector res = rhs - Ksol;
      if (inf_norm(res) < 1e-15) break;
      sol += solver.solve(res);
    }
    if (!sol.allFinite()) return false;

    xp = sol.head(n);
    yp = Vector::Zero(m);
    for (int r = 0; r < k; ++r) yp(rows[static_cast<std::size_t>(r)]) = sol(n + r);

    const Vector Ax = A * xp;
    bool changed = false;
    for (int i = 0; i < m; ++i) {
      int& a = act[static_cast<std::size_t>(i)];
      const double scale = Einv(i);
      if (a == 0) {
        if ((l(i) - Ax(i)) * scale > start.eps_prim) {
          a = -1;
          changed = true;
        } else if ((Ax(i) - u(i)) * scale > start.eps_prim) {
          a = 1;
          changed = true;
        }
      } else if (a != 2) {
        const double yu = E(i) * yp(i) / c;
        if ((a < 0 && yu > start.eps_dual) || (a > 0 && yu < -start.eps_dual)) {
          a = 0;
          changed = true;
        }
      }
    }
    if (!changed) {
      settled = true;
      break;
    }
  }
  // xp/yp belong to the last solved set; a set that still moved is no answer.
  if (!settled) return false;

  const Vector zp = clamp_vec(A * xp, l, u);
  const Residuals res = residuals(xp, zp, yp);
  for (int i = 0; i < m; ++i) {
    const int a = act[static_cast<std::size_t>(i)];
    const double yu = E(i) * yp(i) / c;
    if (a < 0 && yu > res.eps_dual) return false;
    if (a > 0 && yu < -res.eps_dual) return false;
  }
  if (!(res.prim <= res.eps_prim && res.dual <= res.eps_dual)) return false;

  out.status = QpStatus::Solved;
  out.polished = true;
  out.prim_res = res.prim;
  out.dual_res = res.dual;
  finish(out, xp, yp);
  return true;
}

namespace {
constexpr double kWiden = 1e-8;
}

QpResult QpSolver::Impl::run(const Vector& l_in, const Vector& u_in, const Vector& warm_x,
                             const Vector& warm_y) {
  if (l_in.size() != m || u_in.size() != m) throw DimensionError("QP bound vectors have wrong length");
  for (int i = 0; i < m; ++i) {
    if (l_in(i) > u_in(i)) {
      QpResult result;
      result.status = QpStatus::PrimalInfeasible;
      result.certified_infeasible = true;
      result.x = Vector::Zero(n);
      result.y = Vector::Zero(m);
      return result;
    }
  }
  auto definitive = [](const QpResult& r) {
    return r.status == QpStatus::Solved || r.status == QpStatus::PrimalInfeasible ||
           r.status == QpStatus::DualInfeasible;
  };
  if (s.method == QpMethod::InteriorPoint) {
    QpResult r = run_ipm(l_in, u_in, warm_x);
    if (definitive(r) || std::chrono::steady_clock::now() >= deadline) return r;
    {
      // Typically a feasible set without interior (touching activation
      // regions). Widening every row keeps any answer valid: its optimum is a
      // lower bound and its infeasibility implies infeasibility here.
      Vector lw = l_in;
      Vector uw = u_in;
      for (int i = 0; i < m; ++i) {
        if (std::isfinite(lw(i))) lw(i) -= kWiden * (1.0 + std::abs(lw(i)));
        if (std::isfinite(uw(i))) uw(i) += kWiden * (1.0 + std::abs(uw(i)));
      }
      QpResult w = run_ipm(lw, uw, warm_x);
      w.iterations += r.iterations;
      if (definitive(w)) return w;
    }
    if (std::chrono::steady_clock::now() >= deadline) return r;
    // Operator splitting as the last resort; it also detects unboundedness,
    // which the interior point method does not certify.
  }
  if (!analyzed) {
    set_rho_vector();
    if (!factorize()) {
      QpResult r;
      r.status = QpStatus::NumericalError;
      finish(r, Vector::Zero(n), Vector::Zero(m));
      return r;
    }
  }
  return run_admm(l_in, u_in, warm_x, warm_y);
}

QpResult QpSolver::Impl::run_admm(const Vector& l_in, const Vector& u_in, const Vector& warm_x,
                                  const Vector& warm_y) {
  QpResult result;
  const Vector l = E.cwiseProduct(l_in);
  const Vector u = E.cwiseProduct(u_in);

  Vector x = Vector::Zero(n);
  Vector y = Vector::Zero(m);
  if (warm_x.size() == n) x = Dinv.cwiseProduct(warm_x);
  if (warm_y.size() == m) y = Einv.cwiseProduct(warm_y) * c;
  Vector z = clamp_vec(A * x, l, u);

  Vector rhs(n + m);
  Vector x_prev = x;
  Vector y_prev = y;
  bool pending_infeasible = false;
  std::vector<char> last_active;
  const double polish_gate = 1e-3;

  for (int iter = 1; iter <= s.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;
    rhs.head(n) = s.sigma * x - q;
    rhs.tail(m) = z - rho_inv.cwiseProduct(y);
    const Vector sol = ldlt.solve(rhs);
    const Vector xt = sol.head(n);
    const Vector zt = z + rho_inv.cwiseProduct(sol.tail(m) - y);
    x = s.alpha * xt + (1.0 - s.alpha) * x;
    const Vector zrel = s.alpha * zt + (1.0 - s.alpha) * z;
    z = clamp_vec(zrel + rho_inv.cwiseProduct(y), l, u);
    y = y + rho_vec.cwiseProduct(zrel - z);

    if (iter % s.check_every != 0 && iter != s.max_iter) continue;
    result.iterations = iter;
    if (!x.allFinite() || !y.allFinite()) {
      result.status = QpStatus::NumericalError;
      finish(result, Vector::Zero(n), Vector::Zero(m));
      return result;
    }
    if (std::chrono::steady_clock::now() > deadline) break;
    const Residuals res = residuals(x, z, y);
    result.prim_res = res.prim;
    result.dual_res = res.dual;

    if (s.polish && res.prim <= polish_gate * (1.0 + res.prim_scale) &&
        res.dual <= polish_gate * (1.0 + res.dual_scale)) {
      std::vector<char> active(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) {
        active[static_cast<std::size_t>(i)] =
            static_cast<char>((z(i) - l(i) < -y(i)) ? 1 : (u(i) - z(i) < y(i)) ? 2 : 0);
      }
      if (active != last_active) {
        last_active = std::move(active);
        if (polish(x, z, y, l, u, result)) {
          result.iterations = iter;
          return result;
        }
      }
    }

    if (res.prim <= res.eps_prim && res.dual <= res.eps_dual) {
      result.status = QpStatus::Solved;
      finish(result, x, y);
      return result;
    }

    bool certified = false;
    if (primal_infeasible(y - y_prev, l_in, u_in, certified)) {
      pending_infeasible = true;
      if (certified) {
        result.status = QpStatus::PrimalInfeasible;
        result.certified_infeasible = true;
        finish(result, x, y - y_prev);
        return result;
      }
    }
    if (dual_infeasible(x - x_prev, l_in, u_in)) {
      result.status = QpStatus::DualInfeasible;
      finish(result, x - x_prev, y);
      return result;
    }

    if (s.adaptive_rho && iter % s.adaptive_rho_every == 0) {
      double ratio = std::sqrt(res.prim_scaled_rel / std::max(res.dual_scaled_rel, 1e-30));
      double new_rho = std::clamp(rho * ratio, kRhoMin, kRhoMax);
      if (new_rho > 5.0 * rho || new_rho < 0.2 * rho) {
        rho = new_rho;
        set_rho_vector();
        if (!factorize()) {
          result.status = QpStatus::NumericalError;
          finish(result, x, y);
          return result;
        }
      }
    }
  }
  result.status = pending_infeasible ? QpStatus::PrimalInfeasible : QpStatus::IterationLimit;
  finish(result, x, y);
  return result;
}

namespace {

struct IpmOutcome {
  enum class Kind { Converged, Diverged, IterationLimit, Numerical, Deadline };
  Kind kind = Kind::IterationLimit;
  Vector x;
  Vector y;  // row multipliers, positive at upper bounds
  double comp = 0.0;
  int iterations = 0;
  // Latest iterate that met the loose test, kept for runs that stall later.
  std::optional<std::pair<Vector, Vector>> loose;
};

// Mehrotra predictor-corrector for  min 1/2 x'Px + q'x  s.t.  l <= Ax <= u.
// Rows with l == u are equalities; rows without finite bounds are ignored.
// `converged(x, y, comp)` returns 2 to terminate, 1 when only a loose
// tolerance is met and 0 otherwise.
template <class Converged>
IpmOutcome ipm_core(const SparseMatrix& P, const Vector& q, const SparseMatrix& A, const Vector& l,
                    const Vector& u, const Vector& x0, int max_iter,
                    std::chrono::steady_clock::time_point deadline, Converged&& converged) {
  IpmOutcome out;
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(A.rows());
  std::vector<int> eq;
  std::vector<int> in;
  std::vector<int> pos(static_cast<std::size_t>(m), -1);
  for (int i = 0; i < m; ++i) {
    if (std::isinf(l(i)) && std::isinf(u(i))) continue;
    if (l(i) == u(i)) {
      pos[static_cast<std::size_t>(i)] = static_cast<int>(eq.size());
      eq.push_back(i);
    } else {
      pos[static_cast<std::size_t>(i)] = static_cast<int>(in.size());
      in.push_back(i);
    }
  }
  const int ne = static_cast<int>(eq.size());
  const int ni = static_cast<int>(in.size());

  SparseMatrix AE(ne, n);
  SparseMatrix AI(ni, n);
  {
    std::vector<Eigen::Triplet<double>> te;
    std::vector<Eigen::Triplet<double>> ti;
    for (int col = 0; col < A.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
        const int r = pos[static_cast<std::size_t>(it.row())];
        if (r < 0) continue;
        (l(it.row()) == u(it.row()) ? te : ti).emplace_back(r, it.col(), it.value());
      }
    }
    AE.setFromTriplets(te.begin(), te.end());
    AI.setFromTriplets(ti.begin(), ti.end());
  }
  const SparseMatrix AEt = AE.transpose();
  const SparseMatrix AIt = AI.transpose();
  Vector bE(ne);
  for (int k = 0; k < ne; ++k) bE(k) = l(eq[static_cast<std::size_t>(k)]);
  Vector lI = Vector::Zero(ni);
  Vector uI = Vector::Zero(ni);
  Vector hasl = Vector::Zero(ni);
  Vector hasu = Vector::Zero(ni);
  for (int k = 0; k < ni; ++k) {
    const int i = in[static_cast<std::size_t>(k)];
    if (!std::isinf(l(i))) {
      hasl(k) = 1.0;
      lI(k) = l(i);
    }
    if (!std::isinf(u(i))) {
      hasu(k) = 1.0;
      uI(k) = u(i);
    }
  }
  const double ncomp = std::max(1.0, hasl.sum() + hasu.sum());

  Vector x = x0.size() == n ? x0 : Vector(Vector::Zero(n));
  Vector y = Vector::Zero(ne);
  Vector sl = Vector::Zero(ni);
  Vector su = Vector::Zero(ni);
  Vector zl = Vector::Zero(ni);
  Vector zu = Vector::Zero(ni);
  {
    const Vector v = AI * x;
    for (int k = 0; k < ni; ++k) {
      if (hasl(k) > 0) {
        sl(k) = std::max(v(k) - lI(k), 1.0);
        zl(k) = 1.0;
      }
      if (hasu(k) > 0) {
        su(k) = std::max(uI(k) - v(k), 1.0);
        zu(k) = 1.0;
      }
    }
  }

  auto y_full = [&]() {
    Vector r = Vector::Zero(m);
    for (int k = 0; k < ne; ++k) r(eq[static_cast<std::size_t>(k)]) = -y(k);
    for (int k = 0; k < ni; ++k) r(in[static_cast<std::size_t>(k)]) = zu(k) - zl(k);
    return r;
  };
  auto finish = [&](IpmOutcome::Kind kind) {
    out.kind = kind;
    out.x = x;
    out.y = y_full();
    out.comp = sl.dot(zl) + su.dot(zu);
    return out;
  };

  // Quasi-definite KKT in (dx, -dlambda, -dy); only the diagonal changes
  // between iterations.
  const int N = n + ni + ne;
  std::vector<Eigen::Triplet<double>> base;
  for (int col = 0; col < P.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(P, col); it; ++it) {
      if (it.row() >= it.col()) base.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int col = 0; col < AI.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(AI, col); it; ++it) base.emplace_back(n + it.row(), it.col(), it.value());
  }
  for (int col = 0; col < AE.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(AE, col); it; ++it) {
      base.emplace_back(n + ni + it.row(), it.col(), it.value());
    }
  }
  constexpr double kReg = 1e-9;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt;
  bool pattern_ready = false;
  Vector dinv(ni);

  auto kkt_apply = [&](const Vector& v) {
    Vector r(N);
    r.head(n) = P * v.head(n) + AIt * v.segment(n, ni) + AEt * v.tail(ne);
    r.segment(n, ni) = AI * v.head(n) - dinv.cwiseProduct(v.segment(n, ni));
    r.tail(ne) = AE * v.head(n);
    return r;
  };

  struct Dir {
    Vector dx, dy, dsl, dsu, dzl, dzu;
  };
  Vector rd;
  Vector re;
  Vector rl;
  Vector ru;
  auto direction = [&](double target, const Vector& cl, const Vector& cu, Dir& d) {
    const Vector tl = (Vector::Constant(ni, target) - sl.cwiseProduct(zl) - cl).cwiseProduct(hasl);
    const Vector tu = (Vector::Constant(ni, target) - su.cwiseProduct(zu) - cu).cwiseProduct(hasu);
    Vector g(ni);
    for (int k = 0; k < ni; ++k) {
      double gk = 0.0;
      if (hasl(k) > 0) gk += (tl(k) - zl(k) * rl(k)) / sl(k);
      if (hasu(k) > 0) gk -= (tu(k) + zu(k) * ru(k)) / su(k);
      g(k) = gk;
    }
    Vector rhs(N);
    rhs.head(n) = -rd;
    rhs.segment(n, ni) = dinv.cwiseProduct(g);
    rhs.tail(ne) = -re;
    Vector sol = ldlt.solve(rhs);
    for (int it = 0; it < 3; ++it) sol += ldlt.solve(rhs - kkt_apply(sol));
    d.dx = sol.head(n);
    d.dy = -sol.tail(ne);
    const Vector AIdx = AI * d.dx;
    d.dsl = (AIdx + rl).cwiseProduct(hasl);
    d.dsu = (-AIdx - ru).cwiseProduct(hasu);
    d.dzl = Vector::Zero(ni);
    d.dzu = Vector::Zero(ni);
    for (int k = 0; k < ni; ++k) {
      if (hasl(k) > 0) d.dzl(k) = (tl(k) - zl(k) * d.dsl(k)) / sl(k);
      if (hasu(k) > 0) d.dzu(k) = (tu(k) - zu(k) * d.dsu(k)) / su(k);
    }
    return sol.allFinite();
  };
  auto max_step = [&](const Dir& d) {
    double a = 1.0;
    for (int k = 0; k < ni; ++k) {
      if (hasl(k) > 0) {
        if (d.dsl(k) < 0) a = std::min(a, -sl(k) / d.dsl(k));
        if (d.dzl(k) < 0) a = std::min(a, -zl(k) / d.dzl(k));
      }
      if (hasu(k) > 0) {
        if (d.dsu(k) < 0) a = std::min(a, -su(k) / d.dsu(k));
        if (d.dzu(k) < 0) a = std::min(a, -zu(k) / d.dzu(k));
      }
    }
    return a;
  };

  for (int iter = 1; iter <= max_iter; ++iter) {
    out.iterations = iter;
    if (std::chrono::steady_clock::now() > deadline) return finish(IpmOutcome::Kind::Deadline);
    const Vector AIx = AI * x;
    rd = P * x + q - AEt * y - AIt * (zl - zu);
    re = AE * x - bE;
    rl = (AIx - sl - lI).cwiseProduct(hasl);
    ru = (AIx + su - uI).cwiseProduct(hasu);
    const double comp = sl.dot(zl) + su.dot(zu);
    const double mu = comp / ncomp;
    const Vector yf = y_full();
    const int verdict = converged(x, yf, comp);
    if (verdict == 2) return finish(IpmOutcome::Kind::Converged);
    if (verdict == 1) out.loose.emplace(x, yf);
    const double dual_mag = std::max({inf_norm(y), inf_norm(zl), inf_norm(zu)});
    if (iter > 5 && (dual_mag > 1e10 || inf_norm(x) > 1e10)) return finish(IpmOutcome::Kind::Diverged);

    for (int k = 0; k < ni; ++k) {
      double dk = 0.0;
      if (hasl(k) > 0) dk += zl(k) / sl(k);
      if (hasu(k) > 0) dk += zu(k) / su(k);
      dinv(k) = 1.0 / std::max(dk, 1e-300);
    }
    std::vector<Eigen::Triplet<double>> trip = base;
    for (int j = 0; j < n; ++j) trip.emplace_back(j, j, kReg);
    for (int k = 0; k < ni; ++k) trip.emplace_back(n + k, n + k, -dinv(k) - kReg);
    for (int k = 0; k < ne; ++k) trip.emplace_back(n + ni + k, n + ni + k, -kReg);
    SparseMatrix K(N, N);
    K.setFromTriplets(trip.begin(), trip.end());
    if (!pattern_ready) {
      ldlt.analyzePattern(K);
      pattern_ready = true;
    }
    ldlt.factorize(K);
    if (ldlt.info() != Eigen::Success) return finish(IpmOutcome::Kind::Numerical);

    Dir aff;
    const Vector zero = Vector::Zero(ni);
    if (!direction(0.0, zero, zero, aff)) return finish(IpmOutcome::Kind::Numerical);
    const double a_aff = max_step(aff);
    const double mu_aff = ((sl + a_aff * aff.dsl).dot(zl + a_aff * aff.dzl) +
                           (su + a_aff * aff.dsu).dot(zu + a_aff * aff.dzu)) /
                          ncomp;
    const double sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);
    Dir d;
    if (!direction(sigma * mu, aff.dsl.cwiseProduct(aff.dzl), aff.dsu.cwiseProduct(aff.dzu), d)) {
      return finish(IpmOutcome::Kind::Numerical);
    }
    const double a = std::min(1.0, 0.995 * max_step(d));
    x += a * d.dx;
    y += a * d.dy;
    sl = (sl + a * d.dsl).cwiseMax(1e-300).cwiseProduct(hasl);
    su = (su + a * d.dsu).cwiseMax(1e-300).cwiseProduct(hasu);
    zl = (zl + a * d.dzl).cwiseMax(1e-300).cwiseProduct(hasl);
    zu = (zu + a * d.dzu).cwiseMax(1e-300).cwiseProduct(hasu);
    if (!x.allFinite() || !y.allFinite()) return finish(IpmOutcome::Kind::Numerical);
  }
  return finish(IpmOutcome::Kind::IterationLimit);
}

}  // namespace

QpResult QpSolver::Impl::run_ipm(const Vector& l_in, const Vector& u_in, const Vector& warm_x) {
  QpResult result;
  // Contradicting singleton rows need no iterations.
  if (certify_infeasible(Vector::Zero(m), l_in, u_in)) {
    result.status = QpStatus::PrimalInfeasible;
    result.certified_infeasible = true;
    finish(result, Vector::Zero(n), Vector::Zero(m));
    return result;
  }
  const Vector l = E.cwiseProduct(l_in);
  const Vector u = E.cwiseProduct(u_in);
  const Vector x0 = warm_x.size() == n ? Vector(Dinv.cwiseProduct(warm_x)) : Vector();

  auto main_converged = [&](const Vector& x, const Vector& y, double comp) {
    const Residuals res = residuals(x, clamp_vec(A * x, l, u), y);
    const double obj = (0.5 * x.dot(P * x) + q.dot(x)) / c;
    if (res.prim > res.eps_prim || res.dual > res.eps_dual) return 0;
    const double gap = comp / c / (1.0 + std::abs(obj));
    return gap <= s.ipm_gap_tol ? 2 : gap <= s.ipm_loose_gap_tol ? 1 : 0;
  };
  const IpmOutcome run = ipm_core(P, q, A, l, u, x0, s.ipm_max_iter, deadline, main_converged);
  result.iterations = run.iterations;
  {
    const Residuals res = residuals(run.x, clamp_vec(A * run.x, l, u), run.y);
    result.prim_res = res.prim;
    result.dual_res = res.dual;
  }
  switch (run.kind) {
    case IpmOutcome::Kind::Converged: {
      const Vector z = clamp_vec(A * run.x, l, u);
      if (s.polish && polish(run.x, z, run.y, l, u, result)) return result;
      result.status = QpStatus::Solved;
      finish(result, run.x, run.y);
      return result;
    }
    case IpmOutcome::Kind::Numerical:
      result.status = QpStatus::NumericalError;
      finish(result, run.x, run.y);
      return result;
    case IpmOutcome::Kind::Deadline:
      result.status = QpStatus::IterationLimit;
      finish(result, run.x, run.y);
      return result;
    case IpmOutcome::Kind::Diverged:
    case IpmOutcome::Kind::IterationLimit:
      break;
  }
  if (run.loose) {
    // Stalled near the optimum, usually because the feasible set has no
    // interior. Polish from the last good iterate or accept it as is.
    const auto& [lx, ly] = *run.loose;
    const Vector z = clamp_vec(A * lx, l, u);
    if (s.polish && polish(lx, z, ly, l, u, result)) return result;
    const Residuals res = residuals(lx, z, ly);
    result.prim_res = res.prim;
    result.dual_res = res.dual;
    result.status = QpStatus::Solved;
    finish(result, lx, ly);
    return result;
  }
  if (inf_norm(run.x) > 1e8 && dual_infeasible(run.x, l_in, u_in)) {
    result.status = QpStatus::DualInfeasible;
    finish(result, run.x, run.y);
    return result;
  }

  // Phase one: minimize the total violation of the non-singleton rows with
  // elastic variables. Its row multipliers form a Farkas certificate when the
  // optimum is positive.
  std::vector<int> elastic;
  for (int i = 0; i < m; ++i) {
    if (singleton[static_cast<std::size_t>(i)].first >= 0) continue;
    if (std::isinf(l(i)) && std::isinf(u(i))) continue;
    elastic.push_back(i);
  }
  const int ne = static_cast<int>(elastic.size());
  const int n1 = n + 2 * ne;
  std::vector<Eigen::Triplet<double>> trip;
  for (int col = 0; col < A.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(A, col); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  }
  Vector q1 = Vector::Zero(n1);
  Vector l1(m + 2 * ne);
  Vector u1(m + 2 * ne);
  l1.head(m) = l;
  u1.head(m) = u;
  for (int k = 0; k < ne; ++k) {
    const int i = elastic[static_cast<std::size_t>(k)];
    trip.emplace_back(i, n + 2 * k, 1.0);
    trip.emplace_back(i, n + 2 * k + 1, -1.0);
    trip.emplace_back(m + 2 * k, n + 2 * k, 1.0);
    trip.emplace_back(m + 2 * k + 1, n + 2 * k + 1, 1.0);
    l1(m + 2 * k) = 0.0;
    l1(m + 2 * k + 1) = 0.0;
    u1(m + 2 * k) = std::numeric_limits<double>::infinity();
    u1(m + 2 * k + 1) = std::numeric_limits<double>::infinity();
    q1(n + 2 * k) = 1.0;
    q1(n + 2 * k + 1) = 1.0;
  }
  SparseMatrix A1(m + 2 * ne, n1);
  A1.setFromTriplets(trip.begin(), trip.end());
  const SparseMatrix P1(n1, n1);
  const SparseMatrix A1t = A1.transpose();
  auto phase1_converged = [&](const Vector& x, const Vector& y, double comp) {
    const Vector z = clamp_vec(A1 * x, l1, u1);
    const double prim = inf_norm(A1 * x - z);
    const double dual = inf_norm(q1 + A1t * y);
    const double obj = q1.dot(x);
    return prim <= 1e-10 * (1.0 + inf_norm(z)) && dual <= 1e-10 && comp <= 1e-10 * (1.0 + std::abs(obj)) ? 2 : 0;
  };
  const IpmOutcome p1 = ipm_core(P1, q1, A1, l1, u1, Vector(), s.ipm_max_iter, deadline, phase1_converged);
  result.iterations += p1.iterations;
  if (p1.kind == IpmOutcome::Kind::Converged) {
    Vector dy = E.cwiseProduct(p1.y.head(m));
    for (int i = 0; i < m; ++i) {
      if (std::isinf(u_in(i))) dy(i) = std::min(dy(i), 0.0);
      if (std::isinf(l_in(i))) dy(i) = std::max(dy(i), 0.0);
    }
    const double violation = q1.dot(p1.x);
    if (certify_infeasible(dy, l_in, u_in)) {
      result.status = QpStatus::PrimalInfeasible;
      result.certified_infeasible = true;
      finish(result, run.x, p1.y.head(m));
      return result;
    }
    if (violation > 1e-7) {
      result.status = QpStatus::PrimalInfeasible;
      finish(result, run.x, p1.y.head(m));
      return result;
    }
  }
  result.status = QpStatus::IterationLimit;
  finish(result, run.x, run.y);
  return result;
}

QpSolver::QpSolver(const SparseMatrix& P, const Vector& q, const SparseMatrix& A, const Vector& base_l,
                   const Vector& base_u, QpSettings settings)
    : impl_(std::make_unique<Impl>()) {
  auto& im = *impl_;
  im.s = settings;
  im.n = static_cast<int>(q.size());
  im.m = static_cast<int>(A.rows());
  if (P.rows() != im.n || P.cols() != im.n || A.cols() != im.n) {
    throw DimensionError("QP data has inconsistent dimensions");
  }
  if (base_l.size() != im.m || base_u.size() != im.m) throw DimensionError("QP bounds have wrong length");
  im.P0 = P;
  im.P0.makeCompressed();
  im.q0 = q;
  im.A0 = A;
  im.A0.makeCompressed();
  im.row_type.resize(static_cast<std::size_t>(im.m));
  for (int i = 0; i < im.m; ++i) {
    const bool lo_inf = std::isinf(base_l(i));
    const bool hi_inf = std::isinf(base_u(i));
    if (lo_inf && hi_inf) {
      im.row_type[static_cast<std::size_t>(i)] = RowType::Free;
    } else if (base_l(i) == base_u(i)) {
      im.row_type[static_cast<std::size_t>(i)] = RowType::Equality;
    } else {
      im.row_type[static_cast<std::size_t>(i)] = RowType::Inequality;
    }
  }
  im.singleton.assign(static_cast<std::size_t>(im.m), {-1, 0.0});
  std::vector<int> count(static_cast<std::size_t>(im.m), 0);
  for (int k = 0; k < im.A0.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(im.A0, k); it; ++it) {
      if (it.value() == 0.0) continue;
      auto& cnt = count[static_cast<std::size_t>(it.row())];
      ++cnt;
      im.singleton[static_cast<std::size_t>(it.row())] = {static_cast<int>(it.col()), it.value()};
    }
  }
  for (int i = 0; i < im.m; ++i) {
    if (count[static_cast<std::size_t>(i)] != 1) im.singleton[static_cast<std::size_t>(i)] = {-1, 0.0};
  }
  im.scale();
  im.rho = settings.rho;
  if (settings.method == QpMethod::Admm) {
    im.set_rho_vector();
    if (!im.factorize()) throw Error("QP KKT factorization failed");
  }
}

QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

QpResult QpSolver::solve(const Vector& l, const Vector& u, const Vector& warm_x, const Vector& warm_y) {
  return impl_->run(l, u, warm_x, warm_y);
}

void QpSolver::set_deadline(std::chrono::steady_clock::time_point deadline) {
  impl_->deadline = deadline;
}

int QpSolver::num_vars() const { return impl_->n; }
int QpSolver::num_rows() const { return impl_->m; }
const QpSettings& QpSolver::settings() const { return impl_->s; }

QpResult solve_qp(const SparseMatrix& P, const Vector& q, const SparseMatrix& A, const Vector& l,
                  const Vector& u, QpSettings settings) {
  QpSolver solver(P, q, A, l, u, settings);
  return solver.solve(l, u);
}

}  // namespace nnrep

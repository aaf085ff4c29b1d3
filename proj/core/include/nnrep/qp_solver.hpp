#pragma once

#include <chrono>
#include <memory>
#include <string>

#include <Eigen/Sparse>

#include "nnrep/network.hpp"

namespace nnrep {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class QpMethod { InteriorPoint, Admm };

// Tolerances are absolute/relative on the unscaled primal and dual residuals.
struct QpSettings {
  QpMethod method = QpMethod::InteriorPoint;
  // Operator splitting.
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  double eps_prim_inf = 1e-6;
  double eps_dual_inf = 1e-6;
  int max_iter = 20000;
  int check_every = 25;
  int scaling_iters = 10;
  bool adaptive_rho = true;
  int adaptive_rho_every = 100;
  // Interior point.
  int ipm_max_iter = 100;
  double ipm_gap_tol = 1e-9;
  // Accepted when the method stalls after reaching it.
  double ipm_loose_gap_tol = 1e-6;
  // Active-set polish through the reduced KKT system.
  bool polish = true;
  int polish_refine_iters = 5;
  double polish_delta = 1e-7;
};

enum class QpStatus { Solved, PrimalInfeasible, DualInfeasible, IterationLimit, NumericalError };

std::string to_string(QpStatus s);

struct QpResult {
  QpStatus status = QpStatus::NumericalError;
  Vector x;  // primal point
  Vector y;  // row multipliers (y > 0 pushes against upper bounds)
  double objective = 0.0;
  double prim_res = 0.0;
  double dual_res = 0.0;
  int iterations = 0;
  bool polished = false;
  // Primal infeasibility was confirmed by an exact Farkas-type check over the
  // box implied by singleton rows.
  bool certified_infeasible = false;
};

// Solves   min 1/2 x'Px + q'x   s.t.  l <= Ax <= u
// for a fixed (P, q, A) and a sequence of bound vectors. Scaling and the KKT
// factorization are reused between calls, which is what branch-and-bound
// needs: nodes only move bounds.
class QpSolver {
 public:
  // P must be symmetric (both triangles stored). `base_l`/`base_u` decide
  // which rows are treated as equalities when choosing step sizes.
  QpSolver(const SparseMatrix& P, const Vector& q, const SparseMatrix& A, const Vector& base_l,
           const Vector& base_u, QpSettings settings = {});
  ~QpSolver();
  QpSolver(const QpSolver&) = delete;
  QpSolver& operator=(const QpSolver&) = delete;
  QpSolver(QpSolver&&) noexcept;
  QpSolver& operator=(QpSolver&&) noexcept;

  // Warm start values are unscaled and optional (empty vectors are ignored).
  QpResult solve(const Vector& l, const Vector& u, const Vector& warm_x = {}, const Vector& warm_y = {});

  // Solves stop with IterationLimit once this time has passed.
  void set_deadline(std::chrono::steady_clock::time_point deadline);

  int num_vars() const;
  int num_rows() const;
  const QpSettings& settings() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper.
QpResult solve_qp(const SparseMatrix& P, const Vector& q, const SparseMatrix& A, const Vector& l,
                  const Vector& u, QpSettings settings = {});

}  // namespace nnrep

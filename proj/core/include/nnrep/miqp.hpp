#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "nnrep/miqp_model.hpp"
#include "nnrep/qp_solver.hpp"

namespace nnrep {

struct SolveParams {
  double rel_gap_tol = 1e-4;
  double abs_gap_tol = 1e-6;
  double integrality_tol = 1e-6;
  // Incumbents must satisfy every row and bound to this tolerance.
  double feasibility_tol = 1e-6;
  double time_limit_s = std::numeric_limits<double>::infinity();
  std::int64_t node_limit = std::numeric_limits<std::int64_t>::max();
  std::uint64_t seed = 0;
  int threads = 1;
  // Only prune on infeasibility that passed the exact Farkas check; other
  // infeasibility reports leave the node unresolved.
  bool require_certified_infeasibility = false;
  // Stop as soon as any incumbent exists (pure feasibility questions).
  bool stop_at_first_incumbent = false;
  // Progress line every `log_every` nodes; 0 disables.
  std::int64_t log_every = 0;
  std::ostream* log = nullptr;
  QpSettings qp;
};

enum class SolveStatus { Optimal, FeasibleLimit, Infeasible, Unbounded, LimitNoSolution };

std::string to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::LimitNoSolution;
  std::vector<double> x;
  double objective = std::numeric_limits<double>::infinity();
  double lower_bound = -std::numeric_limits<double>::infinity();
  std::int64_t nodes = 0;
  std::int64_t qp_solves = 0;
  double wall_time_s = 0.0;
  std::string diagnostic;

  bool has_solution() const { return !x.empty(); }
  double gap() const;
};

// Binary fixing per variable: -1 free, 0 or 1 fixed. Continuous variables
// ignore their entry.
using Fixings = std::vector<std::int8_t>;

enum class RelaxationStatus { Optimal, Infeasible, Unbounded, Unknown };

struct RelaxationResult {
  RelaxationStatus status = RelaxationStatus::Unknown;
  // -inf when the status is Unknown.
  double lower_bound = -std::numeric_limits<double>::infinity();
  std::vector<double> x;
  bool certified = false;
  int iterations = 0;
};

// Convex relaxation of a MiqpModel (binaries in [0,1]) under partial fixings.
class RelaxationSolver {
 public:
  RelaxationSolver(const MiqpModel& model, const QpSettings& settings);
  ~RelaxationSolver();
  RelaxationSolver(RelaxationSolver&&) noexcept;
  RelaxationSolver& operator=(RelaxationSolver&&) noexcept;

  RelaxationResult solve(const Fixings& fixings);
  void set_deadline(std::chrono::steady_clock::time_point deadline);
  Fixings root_fixings() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RelaxationResult solve_relaxation(const MiqpModel& model, const Fixings& fixings,
                                  const QpSettings& settings = {});

// Branch-and-bound over the binaries with convex QP relaxations.
SolveResult solve(const MiqpModel& model, const SolveParams& params = {});

}  // namespace nnrep

#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

namespace nnrep {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { LessEqual, GreaterEqual, Equal };

struct VarInfo {
  std::string name;
  double lo = -kInf;
  double hi = kInf;
  bool binary = false;
};

struct LinTerm {
  int var = 0;
  double coef = 0.0;
};

struct LinearConstraint {
  std::vector<LinTerm> terms;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
  std::string name;
};

// coef * x_i * x_j; i == j gives a square term.
struct QuadTerm {
  int i = 0;
  int j = 0;
  double coef = 0.0;
};

// Minimization problem with a convex quadratic objective, linear rows,
// box-bounded continuous variables and binary variables.
class MiqpModel {
 public:
  int add_continuous(std::string name, double lo, double hi);
  int add_binary(std::string name);
  void add_constraint(std::vector<LinTerm> terms, Sense sense, double rhs, std::string name = {});
  void add_quadratic(int i, int j, double coef);
  void add_linear(int var, double coef);
  void add_constant(double c) { objective_constant_ += c; }
  void set_bounds(int var, double lo, double hi);

  // Optional starting guess for binaries, tried by the solver's first
  // heuristic. Entries for continuous variables are ignored.
  void set_binary_hint(int var, double value);
  const std::vector<std::optional<double>>& binary_hint() const { return hint_; }
  void clear_binary_hints();

  std::size_t num_vars() const { return vars_.size(); }
  std::size_t num_constraints() const { return rows_.size(); }
  std::size_t num_binaries() const;
  const VarInfo& var(int i) const { return vars_.at(static_cast<std::size_t>(i)); }
  const std::vector<VarInfo>& vars() const { return vars_; }
  const std::vector<LinearConstraint>& constraints() const { return rows_; }
  const std::vector<QuadTerm>& quadratic() const { return quad_; }
  const std::vector<double>& linear() const { return lin_; }
  double objective_constant() const { return objective_constant_; }

  std::optional<int> find(const std::string& name) const;
  int index_of(const std::string& name) const;  // throws when missing

  double objective(const std::vector<double>& x) const;
  // Largest violation of any row or variable bound.
  double max_violation(const std::vector<double>& x) const;
  double max_integrality_violation(const std::vector<double>& x) const;

  // Throws PreconditionError when rows reference undeclared variables, a
  // coefficient is non-finite, or the quadratic form is not PSD.
  void validate() const;

  // CPLEX LP text format.
  void write_lp(std::ostream& out) const;

 private:
  int add_var(VarInfo info);

  std::vector<VarInfo> vars_;
  std::vector<LinearConstraint> rows_;
  std::vector<QuadTerm> quad_;
  std::vector<double> lin_;
  std::vector<std::optional<double>> hint_;
  double objective_constant_ = 0.0;
  std::unordered_map<std::string, int> by_name_;
};

}  // namespace nnrep

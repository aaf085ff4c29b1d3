#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "nnrep/intervals.hpp"
#include "nnrep/network.hpp"

namespace nnrep {

enum class Relation { LessEqual, GreaterEqual };

// A variable an atom can refer to: a network input component or an output
// component.
struct VarRef {
  enum class Kind { Input, Output };
  Kind kind = Kind::Output;
  std::size_t index = 0;
  friend bool operator==(const VarRef&, const VarRef&) = default;
};

struct Term {
  VarRef var;
  double coef = 0.0;
};

// sum(coef * var) <rel> rhs
struct AffineAtom {
  std::vector<Term> terms;
  double rhs = 0.0;
  Relation rel = Relation::LessEqual;

  double lhs(const Vector& x0, const Vector& y) const;
  // Signed distance to violation: >= 0 iff the atom holds.
  double slack(const Vector& x0, const Vector& y) const;
  bool holds(const Vector& x0, const Vector& y, double tol) const { return slack(x0, y) >= -tol; }
  // Range of lhs over boxes of inputs and outputs.
  Interval lhs_range(const std::vector<Interval>& x0, const std::vector<Interval>& y) const;
};

using Conjunction = std::vector<AffineAtom>;

// Disjunctive normal form: satisfied when some conjunction holds entirely.
struct Predicate {
  std::vector<Conjunction> disjuncts;
};

// Conjunctive normal form of strict atoms: every clause needs one atom to hold.
struct NegatedPredicate {
  std::vector<std::vector<AffineAtom>> clauses;
  double gamma = 0.0;
};

// Names used when reading and writing predicate files. Inputs may always be
// written as x[i], outputs as y[i].
struct VariableSchema {
  std::vector<std::string> input_names;
  std::size_t input_dim = 0;
  std::size_t output_dim = 1;

  static VariableSchema for_network(const Network& net, std::vector<std::string> input_names = {});
  VarRef resolve(std::string_view name) const;
  std::string name_of(const VarRef& ref) const;
};

inline constexpr double kDefaultPredicateTol = 1e-6;
inline constexpr double kDefaultGamma = 1e-6;

void validate_predicate(const Predicate& pred);

Predicate parse_predicate(std::string_view text, const VariableSchema& schema);
std::string save_predicate(const Predicate& pred, const VariableSchema& schema);

bool eval_predicate(const Predicate& pred, const Vector& x0, const Vector& y, double tol);
// Largest slack over disjuncts of the smallest slack within each disjunct.
double predicate_margin(const Predicate& pred, const Vector& x0, const Vector& y);

Predicate build_global_bound(double lo, double hi, std::size_t output = 0);
Predicate build_rate_bound(double delta_max, std::size_t prev_control_input, std::size_t output = 0);
// trigger_input in [trigger.lo, trigger.hi] implies output outside
// (forbidden.lo, forbidden.hi), written as four single-atom disjuncts.
Predicate build_conditional_avoid(std::size_t trigger_input, Interval trigger, Interval forbidden,
                                  std::size_t output = 0);

NegatedPredicate negate(const Predicate& pred, double gamma);
bool holds(const NegatedPredicate& neg, const Vector& x0, const Vector& y, double tol = 0.0);

}  // namespace nnrep

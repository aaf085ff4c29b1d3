#include "nnrep/predicate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "nnrep/error.hpp"

namespace nnrep {
namespace {

using json = nlohmann::ordered_json;

double value_of(const VarRef& ref, const Vector& x0, const Vector& y) {
  return ref.kind == VarRef::Kind::Input ? x0(static_cast<Eigen::Index>(ref.index))
                                         : y(static_cast<Eigen::Index>(ref.index));
}

// Parses "<prefix>[<n>]"; returns false when the shape does not match.
bool parse_indexed(std::string_view name, char prefix, std::size_t& index) {
  if (name.size() < 4 || name[0] != prefix || name[1] != '[' || name.back() != ']') return false;
  const auto digits = name.substr(2, name.size() - 3);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  return ec == std::errc() && ptr == digits.data() + digits.size();
}

AffineAtom atom(std::vector<Term> terms, Relation rel, double rhs) {
  return AffineAtom{std::move(terms), rhs, rel};
}

Term out_term(std::size_t output, double coef) {
  return Term{VarRef{VarRef::Kind::Output, output}, coef};
}

Term in_term(std::size_t input, double coef) {
  return Term{VarRef{VarRef::Kind::Input, input}, coef};
}

}  // namespace

double AffineAtom::lhs(const Vector& x0, const Vector& y) const {
  double acc = 0.0;
  for (const auto& t : terms) acc += t.coef * value_of(t.var, x0, y);
  return acc;
}

double AffineAtom::slack(const Vector& x0, const Vector& y) const {
  const double v = lhs(x0, y);
  return rel == Relation::LessEqual ? rhs - v : v - rhs;
}

Interval AffineAtom::lhs_range(const std::vector<Interval>& x0, const std::vector<Interval>& y) const {
  Interval r{0.0, 0.0};
  for (const auto& t : terms) {
    const Interval& v = t.var.kind == VarRef::Kind::Input ? x0.at(t.var.index) : y.at(t.var.index);
    if (t.coef >= 0.0) {
      r.lo += t.coef * v.lo;
      r.hi += t.coef * v.hi;
    } else {
      r.lo += t.coef * v.hi;
      r.hi += t.coef * v.lo;
    }
  }
  return r;
}

VariableSchema VariableSchema::for_network(const Network& net, std::vector<std::string> input_names) {
  VariableSchema s;
  s.input_names = std::move(input_names);
  s.input_dim = net.input_dim();
  s.output_dim = net.output_dim();
  return s;
}

VarRef VariableSchema::resolve(std::string_view name) const {
  std::size_t index = 0;
  if (parse_indexed(name, 'y', index)) {
    if (index >= output_dim) throw ParseError("output '" + std::string(name) + "' out of range");
    return {VarRef::Kind::Output, index};
  }
  auto it = std::find(input_names.begin(), input_names.end(), name);
  if (it != input_names.end()) {
    return {VarRef::Kind::Input, static_cast<std::size_t>(it - input_names.begin())};
  }
  if (parse_indexed(name, 'x', index)) {
    if (index >= std::max(input_dim, input_names.size())) {
      throw ParseError("input '" + std::string(name) + "' out of range");
    }
    return {VarRef::Kind::Input, index};
  }
  throw ParseError("unknown variable name '" + std::string(name) + "'");
}

std::string VariableSchema::name_of(const VarRef& ref) const {
  if (ref.kind == VarRef::Kind::Output) return "y[" + std::to_string(ref.index) + "]";
  if (ref.index < input_names.size()) return input_names[ref.index];
  return "x[" + std::to_string(ref.index) + "]";
}

void validate_predicate(const Predicate& pred) {
  if (pred.disjuncts.empty()) throw ParseError("predicate has no disjuncts");
  for (std::size_t c = 0; c < pred.disjuncts.size(); ++c) {
    const auto& conj = pred.disjuncts[c];
    if (conj.empty()) throw ParseError("disjunct " + std::to_string(c) + " is empty");
    for (const auto& a : conj) {
      if (!std::isfinite(a.rhs)) throw ParseError("non-finite offset in disjunct " + std::to_string(c));
      bool nonzero = false;
      for (const auto& t : a.terms) {
        if (!std::isfinite(t.coef)) {
          throw ParseError("non-finite coefficient in disjunct " + std::to_string(c));
        }
        nonzero = nonzero || t.coef != 0.0;
      }
      if (!nonzero) throw ParseError("atom without a nonzero coefficient in disjunct " + std::to_string(c));
    }
  }
}

Predicate parse_predicate(std::string_view text, const VariableSchema& schema) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("predicate file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("disjuncts") || !doc["disjuncts"].is_array()) {
    throw ParseError("predicate file: expected an object with a 'disjuncts' array");
  }
  Predicate pred;
  for (const auto& jd : doc["disjuncts"]) {
    if (!jd.is_array()) throw ParseError("predicate file: each disjunct must be an array of atoms");
    Conjunction conj;
    for (const auto& ja : jd) {
      if (!ja.is_object() || !ja.contains("coeffs") || !ja["coeffs"].is_object()) {
        throw ParseError("predicate file: atom needs a 'coeffs' object");
      }
      AffineAtom a;
      for (const auto& [name, value] : ja["coeffs"].items()) {
        if (!value.is_number()) throw ParseError("coefficient of '" + name + "' is not a number");
        a.terms.push_back(Term{schema.resolve(name), value.get<double>()});
      }
      const auto offset = ja.value("offset", json(0.0));
      if (!offset.is_number()) throw ParseError("predicate file: 'offset' must be a number");
      a.rhs = offset.get<double>();
      const std::string rel = ja.value("rel", std::string("<="));
      if (rel == "<=") {
        a.rel = Relation::LessEqual;
      } else if (rel == ">=") {
        a.rel = Relation::GreaterEqual;
      } else {
        throw ParseError("predicate file: relation must be \"<=\" or \">=\", got \"" + rel + "\"");
      }
      conj.push_back(std::move(a));
    }
    pred.disjuncts.push_back(std::move(conj));
  }
  validate_predicate(pred);
  return pred;
}

std::string save_predicate(const Predicate& pred, const VariableSchema& schema) {
  json jdisj = json::array();
  for (const auto& conj : pred.disjuncts) {
    json jconj = json::array();
    for (const auto& a : conj) {
      json coeffs = json::object();
      for (const auto& t : a.terms) coeffs[schema.name_of(t.var)] = t.coef;
      jconj.push_back(json{{"coeffs", std::move(coeffs)},
                           {"offset", a.rhs},
                           {"rel", a.rel == Relation::LessEqual ? "<=" : ">="}});
    }
    jdisj.push_back(std::move(jconj));
  }
  json doc;
  doc["disjuncts"] = std::move(jdisj);
  return doc.dump(2) + "\n";
}

bool eval_predicate(const Predicate& pred, const Vector& x0, const Vector& y, double tol) {
  for (const auto& conj : pred.disjuncts) {
    if (std::all_of(conj.begin(), conj.end(), [&](const AffineAtom& a) { return a.holds(x0, y, tol); })) {
      return true;
    }
  }
  return false;
}

double predicate_margin(const Predicate& pred, const Vector& x0, const Vector& y) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& conj : pred.disjuncts) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& a : conj) worst = std::min(worst, a.slack(x0, y));
    best = std::max(best, worst);
  }
  return best;
}

Predicate build_global_bound(double lo, double hi, std::size_t output) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw PreconditionError("global bound needs finite lo <= hi");
  }
  Predicate p;
  p.disjuncts.push_back({atom({out_term(output, 1.0)}, Relation::GreaterEqual, lo),
                         atom({out_term(output, 1.0)}, Relation::LessEqual, hi)});
  return p;
}

Predicate build_rate_bound(double delta_max, std::size_t prev_control_input, std::size_t output) {
  if (!(delta_max > 0.0) || !std::isfinite(delta_max)) {
    throw PreconditionError("rate bound must be positive and finite");
  }
  Predicate p;
  p.disjuncts.push_back(
      {atom({out_term(output, 1.0), in_term(prev_control_input, -1.0)}, Relation::LessEqual, delta_max),
       atom({in_term(prev_control_input, 1.0), out_term(output, -1.0)}, Relation::LessEqual, delta_max)});
  return p;
}

Predicate build_conditional_avoid(std::size_t trigger_input, Interval trigger, Interval forbidden,
                                  std::size_t output) {
  if (!(trigger.lo < trigger.hi) || !(forbidden.lo < forbidden.hi)) {
    throw PreconditionError("conditional constraint needs non-degenerate intervals");
  }
  Predicate p;
  p.disjuncts.push_back({atom({in_term(trigger_input, 1.0)}, Relation::LessEqual, trigger.lo)});
  p.disjuncts.push_back({atom({in_term(trigger_input, 1.0)}, Relation::GreaterEqual, trigger.hi)});
  p.disjuncts.push_back({atom({out_term(output, 1.0)}, Relation::LessEqual, forbidden.lo)});
  p.disjuncts.push_back({atom({out_term(output, 1.0)}, Relation::GreaterEqual, forbidden.hi)});
  return p;
}

NegatedPredicate negate(const Predicate& pred, double gamma) {
  if (!(gamma > 0.0)) throw PreconditionError("negation margin gamma must be positive");
  NegatedPredicate neg;
  neg.gamma = gamma;
  for (const auto& conj : pred.disjuncts) {
    std::vector<AffineAtom> clause;
    for (const auto& a : conj) {
      AffineAtom n = a;
      if (a.rel == Relation::LessEqual) {
        n.rel = Relation::GreaterEqual;
        n.rhs = a.rhs + gamma;
      } else {
        n.rel = Relation::LessEqual;
        n.rhs = a.rhs - gamma;
      }
      clause.push_back(std::move(n));
    }
    neg.clauses.push_back(std::move(clause));
  }
  return neg;
}

bool holds(const NegatedPredicate& neg, const Vector& x0, const Vector& y, double tol) {
  for (const auto& clause : neg.clauses) {
    if (std::none_of(clause.begin(), clause.end(), [&](const AffineAtom& a) { return a.holds(x0, y, tol); })) {
      return false;
    }
  }
  return true;
}

}  // namespace nnrep

#include "nnrep/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "nnrep/error.hpp"

namespace nnrep {

namespace {

// Largest violation depth the model asks for. Deeper violations are no more
// useful and a finite cap keeps the Big-M constants small.
constexpr double kDepthCap = 1.0;

struct Expr {
  double c = 0.0;
  std::vector<LinTerm> terms;
};

std::string idx(std::size_t a) { return std::to_string(a); }

Interval safe_bound(const Interval& iv) {
  if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) throw NumericalError("non-finite interval bound");
  const double scale = std::max(std::abs(iv.lo), std::abs(iv.hi));
  return iv.widened(1e-6 + 1e-9 * scale);
}

void add_row(MiqpModel& m, std::vector<LinTerm> terms, const Expr& e, double sign, Sense sense, double rhs,
             std::string name) {
  for (const auto& t : e.terms) terms.push_back({t.var, sign * t.coef});
  m.add_constraint(std::move(terms), sense, rhs - sign * e.c, std::move(name));
}

void check_inputs(const Network& net, const InputRegion& region, const Predicate& pred) {
  region.validate();
  if (net.num_layers() == 0) throw PreconditionError("network has no layers");
  if (region.dim() != net.input_dim()) throw DimensionError("region dimension does not match network input");
  validate_predicate(pred);
}

struct Literal {
  const AffineAtom* atom;
  Interval range;
};

// Clauses of the negation that still constrain the region. `empty` is set when
// some clause cannot be satisfied anywhere, i.e. the predicate holds on the
// whole region.
struct LiveClauses {
  NegatedPredicate neg;
  std::vector<std::vector<Literal>> clauses;
  bool empty = false;
};

LiveClauses live_clauses(const Predicate& pred, double gamma, const std::vector<Interval>& xbox,
                         const std::vector<Interval>& ybox) {
  LiveClauses out;
  out.neg = negate(pred, gamma);
  for (const auto& clause : out.neg.clauses) {
    std::vector<Literal> lits;
    bool always = false;
    for (const auto& a : clause) {
      const Interval r = a.lhs_range(xbox, ybox);
      const bool never = a.rel == Relation::LessEqual ? r.lo > a.rhs : r.hi < a.rhs;
      const bool sure = a.rel == Relation::LessEqual ? r.hi <= a.rhs : r.lo >= a.rhs;
      if (sure) always = true;
      if (!never) lits.push_back({&a, r});
    }
    if (lits.empty()) {
      out.empty = true;
      return out;
    }
    // A clause that holds everywhere does not bound the depth either; drop it.
    if (!always) out.clauses.push_back(std::move(lits));
  }
  return out;
}

}  // namespace

InputRegion InputRegion::around(const Vector& center, double eps) {
  if (!std::isfinite(eps) || eps < 0.0) throw PreconditionError("region radius must be finite and non-negative");
  InputRegion r;
  for (Eigen::Index i = 0; i < center.size(); ++i) r.box.push_back({center(i) - eps, center(i) + eps});
  return r;
}

bool InputRegion::contains(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != box.size()) return false;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!box[i].contains(x(static_cast<Eigen::Index>(i)))) return false;
  }
  return true;
}

void InputRegion::validate() const {
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Interval& b = box[i];
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi) {
      throw PreconditionError("input region component " + idx(i) + " is not a finite interval");
    }
  }
}

std::string to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Safe: return "safe";
    case VerdictKind::Violated: return "violated";
    case VerdictKind::Unknown: return "unknown";
  }
  return "unknown";
}

MiqpModel encode_violation(const Network& net, const InputRegion& region, const Predicate& pred, double gamma,
                           const std::vector<Vector>& excluded, double exclusion_radius) {
  check_inputs(net, region, pred);
  if (!excluded.empty() && !(exclusion_radius > 0.0)) {
    throw PreconditionError("exclusion radius must be positive when counterexamples are excluded");
  }
  const std::size_t n_in = net.input_dim();
  const std::size_t num_layers = net.num_layers();
  const BoundsMap bm = propagate_input_box(net, region.box);

  MiqpModel m;
  const int depth = m.add_continuous("t", 0.0, kDepthCap);
  m.add_linear(depth, -1.0);

  std::vector<Expr> z(n_in);
  std::vector<int> xin(n_in);
  for (std::size_t i = 0; i < n_in; ++i) {
    xin[i] = m.add_continuous("x0_" + idx(i), region.box[i].lo, region.box[i].hi);
    z[i] = Expr{0.0, {{xin[i], 1.0}}};
  }

  std::vector<int> yvar;
  for (std::size_t layer = 1; layer <= num_layers; ++layer) {
    const LayerParams& p = net.layer(layer);
    std::vector<Expr> next(p.out_dim());
    for (std::size_t i = 0; i < p.out_dim(); ++i) {
      Expr e;
      e.c = p.bias(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < p.in_dim(); ++j) {
        const double w = p.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (w == 0.0) continue;
        e.c += w * z[j].c;
        for (const auto& t : z[j].terms) e.terms.push_back({t.var, w * t.coef});
      }
      next[i] = std::move(e);
    }
    z = std::move(next);
    const LayerBounds& lb = bm.at(layer);

    if (layer == num_layers) {
      for (std::size_t k = 0; k < z.size(); ++k) {
        const Interval yb = safe_bound(lb.pre[k]);
        const std::string name = "y_" + idx(k);
        const int y = m.add_continuous(name, yb.lo, yb.hi);
        add_row(m, {{y, 1.0}}, z[k], -1.0, Sense::Equal, 0.0, name + "_def");
        yvar.push_back(y);
      }
      break;
    }

    for (std::size_t j = 0; j < z.size(); ++j) {
      const Interval b = safe_bound(lb.pre[j]);
      const std::string xn = "x_" + idx(layer) + "_" + idx(j);
      if (lb.pre[j].hi <= 0.0) {
        z[j] = Expr{};
        continue;
      }
      if (lb.pre[j].lo >= 0.0) {
        const int x = m.add_continuous(xn, b.lo, b.hi);
        add_row(m, {{x, 1.0}}, z[j], -1.0, Sense::Equal, 0.0, xn + "_id");
        z[j] = Expr{0.0, {{x, 1.0}}};
        continue;
      }
      const int x = m.add_continuous(xn, 0.0, b.hi);
      const int phi = m.add_binary("phi_" + idx(layer) + "_" + idx(j));
      add_row(m, {{x, 1.0}}, z[j], -1.0, Sense::GreaterEqual, 0.0, xn + "_ge");
      add_row(m, {{x, 1.0}, {phi, -b.lo}}, z[j], -1.0, Sense::LessEqual, -b.lo, xn + "_lo");
      m.add_constraint({{x, 1.0}, {phi, -b.hi}}, Sense::LessEqual, 0.0, xn + "_hi");
      z[j] = Expr{0.0, {{x, 1.0}}};
    }
  }

  std::vector<Interval> ybox;
  for (const auto& iv : bm.at(num_layers).pre) ybox.push_back(safe_bound(iv));
  const LiveClauses live = live_clauses(pred, gamma, region.box, ybox);
  if (live.empty) {
    m.add_constraint({{depth, 0.0}}, Sense::GreaterEqual, 1.0, "pred_empty");
    return m;
  }

  auto literal_terms = [&](const AffineAtom& a) {
    std::vector<LinTerm> terms;
    for (const auto& t : a.terms) {
      const int v = t.var.kind == VarRef::Kind::Input ? xin[t.var.index] : yvar[t.var.index];
      terms.push_back({v, t.coef});
    }
    return terms;
  };

  // Each clause needs one literal holding with slack >= t.
  for (std::size_t c = 0; c < live.clauses.size(); ++c) {
    const auto& lits = live.clauses[c];
    const std::string cname = "neg_" + idx(c);
    if (lits.size() == 1) {
      const AffineAtom& a = *lits.front().atom;
      auto terms = literal_terms(a);
      if (a.rel == Relation::GreaterEqual) {
        terms.push_back({depth, -1.0});
        m.add_constraint(std::move(terms), Sense::GreaterEqual, a.rhs, cname);
      } else {
        terms.push_back({depth, 1.0});
        m.add_constraint(std::move(terms), Sense::LessEqual, a.rhs, cname);
      }
      continue;
    }
    std::vector<LinTerm> pick;
    for (std::size_t k = 0; k < lits.size(); ++k) {
      const AffineAtom& a = *lits[k].atom;
      const Interval& r = lits[k].range;
      const int beta = m.add_binary("beta_" + idx(c) + "_" + idx(k));
      pick.push_back({beta, 1.0});
      auto terms = literal_terms(a);
      if (a.rel == Relation::GreaterEqual) {
        // lhs - t >= rhs - M (1 - beta)
        const double big = std::max(0.0, a.rhs + kDepthCap - r.lo) + 1e-6;
        terms.push_back({depth, -1.0});
        terms.push_back({beta, -big});
        m.add_constraint(std::move(terms), Sense::GreaterEqual, a.rhs - big, cname + "_" + idx(k));
      } else {
        // lhs + t <= rhs + M (1 - beta)
        const double big = std::max(0.0, r.hi + kDepthCap - a.rhs) + 1e-6;
        terms.push_back({depth, 1.0});
        terms.push_back({beta, big});
        m.add_constraint(std::move(terms), Sense::LessEqual, a.rhs + big, cname + "_" + idx(k));
      }
    }
    m.add_constraint(std::move(pick), Sense::GreaterEqual, 1.0, cname + "_pick");
  }

  // Stay outside the l-infinity box of radius r around each excluded point:
  // some coordinate leaves it on one side.
  for (std::size_t e = 0; e < excluded.size(); ++e) {
    const Vector& c = excluded[e];
    if (static_cast<std::size_t>(c.size()) != n_in) throw DimensionError("excluded point has wrong length");
    std::vector<LinTerm> pick;
    const std::string ename = "excl_" + idx(e);
    for (std::size_t i = 0; i < n_in; ++i) {
      const Interval& b = region.box[i];
      const double ci = c(static_cast<Eigen::Index>(i));
      const double below = ci - exclusion_radius;
      const double above = ci + exclusion_radius;
      if (below >= b.lo) {
        // x_i <= below + M (1 - s)
        const int s = m.add_binary(ename + "_lo_" + idx(i));
        const double big = std::max(0.0, b.hi - below);
        m.add_constraint({{xin[i], 1.0}, {s, big}}, Sense::LessEqual, below + big, ename + "_lo_" + idx(i));
        pick.push_back({s, 1.0});
      }
      if (above <= b.hi) {
        // x_i >= above - M (1 - s)
        const int s = m.add_binary(ename + "_hi_" + idx(i));
        const double big = std::max(0.0, above - b.lo);
        m.add_constraint({{xin[i], 1.0}, {s, -big}}, Sense::GreaterEqual, above - big, ename + "_hi_" + idx(i));
        pick.push_back({s, 1.0});
      }
    }
    if (pick.empty()) {
      // The excluded box covers the whole region.
      m.add_constraint({{depth, 0.0}}, Sense::GreaterEqual, 1.0, ename + "_all");
    } else {
      m.add_constraint(std::move(pick), Sense::GreaterEqual, 1.0, ename + "_pick");
    }
  }
  return m;
}

Verdict verify(const Network& net, const InputRegion& region, const Predicate& pred, const VerifyOptions& opts) {
  check_inputs(net, region, pred);
  if (!(opts.gamma > 0.0)) throw PreconditionError("gamma must be positive");
  if (opts.max_cex == 0) throw PreconditionError("max_cex must be at least 1");

  Verdict v;
  {
    // Interval pre-check: a clause of the negation that cannot hold anywhere
    // proves the predicate on the whole region.
    const BoundsMap bm = propagate_input_box(net, region.box);
    std::vector<Interval> ybox;
    for (const auto& iv : bm.at(net.num_layers()).pre) ybox.push_back(safe_bound(iv));
    if (live_clauses(pred, opts.gamma, region.box, ybox).empty) {
      v.kind = VerdictKind::Safe;
      v.diagnostic = "proved by interval bounds";
      return v;
    }
  }

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  SolveParams params = opts.params;
  params.require_certified_infeasibility = true;
  params.stop_at_first_incumbent = true;

  for (std::size_t round = 0; round < opts.max_cex; ++round) {
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    params.time_limit_s = opts.params.time_limit_s - elapsed;
    if (params.time_limit_s <= 0.0) {
      if (v.counterexamples.empty()) v.diagnostic = "time limit reached";
      break;
    }
    const MiqpModel model = encode_violation(net, region, pred, opts.gamma, v.counterexamples, opts.exclusion_radius);
    const SolveResult r = solve(model, params);
    v.nodes += r.nodes;

    if (r.status == SolveStatus::Infeasible) {
      if (v.counterexamples.empty()) {
        v.kind = VerdictKind::Safe;
        v.diagnostic = "violation search proved infeasible";
      }
      break;
    }
    if (!r.has_solution()) {
      if (v.counterexamples.empty()) v.diagnostic = "search stopped without a decision: " + r.diagnostic;
      break;
    }

    Vector x(static_cast<Eigen::Index>(net.input_dim()));
    for (std::size_t i = 0; i < net.input_dim(); ++i) {
      const double xi = r.x[static_cast<std::size_t>(model.index_of("x0_" + idx(i)))];
      x(static_cast<Eigen::Index>(i)) = std::clamp(xi, region.box[i].lo, region.box[i].hi);
    }
    const Vector y = net.forward(x);
    if (eval_predicate(pred, x, y, 0.0)) {
      // The solver point does not survive the exact forward pass. Without a
      // replayed counterexample nothing can be claimed.
      if (v.counterexamples.empty()) {
        v.diagnostic = "candidate counterexample failed replay (depth " + std::to_string(-r.objective) + ")";
      }
      break;
    }
    v.counterexamples.push_back(x);
  }
  if (!v.counterexamples.empty()) {
    v.kind = VerdictKind::Violated;
    v.diagnostic.clear();
  }
  return v;
}

double adv_accuracy(const Network& net, const std::vector<Vector>& samples, const Predicate& pred, double eps,
                    const VerifyOptions& opts) {
  if (samples.empty()) throw PreconditionError("adversarial accuracy needs at least one sample");
  if (!std::isfinite(eps) || eps < 0.0) throw PreconditionError("eps must be finite and non-negative");
  VerifyOptions one = opts;
  one.max_cex = 1;
  std::size_t robust = 0;
  for (const auto& s : samples) {
    if (!eval_predicate(pred, s, net.forward(s), 0.0)) continue;
    if (verify(net, InputRegion::around(s, eps), pred, one).kind == VerdictKind::Safe) ++robust;
  }
  return static_cast<double>(robust) / static_cast<double>(samples.size());
}

}  // namespace nnrep

#include "nnrep/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnrep/error.hpp"

namespace nnrep {

namespace {

// Affine expression over model variables.
struct Expr {
  double c = 0.0;
  std::vector<LinTerm> terms;

  bool constant() const { return terms.empty(); }
};

std::string idx(std::size_t a) { return std::to_string(a); }

std::string w_name(std::size_t l, std::size_t i, std::size_t j) { return "w_" + idx(l) + "_" + idx(i) + "_" + idx(j); }
std::string b_name(std::size_t l, std::size_t j) { return "b_" + idx(l) + "_" + idx(j); }
std::string x_name(std::size_t n, std::size_t l, std::size_t j) { return "x_" + idx(n) + "_" + idx(l) + "_" + idx(j); }
std::string phi_name(std::size_t n, std::size_t l, std::size_t j) {
  return "phi_" + idx(n) + "_" + idx(l) + "_" + idx(j);
}
std::string y_name(std::size_t n, std::size_t k) { return "y_" + idx(n) + "_" + idx(k); }
std::string beta_name(std::size_t n, std::size_t d) { return "beta_" + idx(n) + "_" + idx(d); }

// Adds `expr` moved to the left-hand side: terms + sign*expr <sense> rhs.
void add_row(MiqpModel& m, std::vector<LinTerm> terms, const Expr& expr, double sign, Sense sense, double rhs,
             std::string name) {
  for (const auto& t : expr.terms) terms.push_back({t.var, sign * t.coef});
  m.add_constraint(std::move(terms), sense, rhs - sign * expr.c, std::move(name));
}

void check_problem(const RepairProblem& prob) {
  const std::size_t layers = prob.net.num_layers();
  if (layers == 0) throw PreconditionError("network has no layers");
  if (prob.layer < 1 || prob.layer > layers) {
    throw PreconditionError("repair layer " + idx(prob.layer) + " outside 1.." + idx(layers));
  }
  if (prob.samples.empty()) throw PreconditionError("repair problem needs at least one sample");
  if (!std::isfinite(prob.delta_max) || prob.delta_max < 0.0) {
    throw PreconditionError("delta_max must be finite and non-negative");
  }
  const std::size_t width = prob.net.layer(prob.layer).out_dim();
  for (std::size_t r : prob.options.nodes) {
    if (r >= width) throw PreconditionError("node " + idx(r) + " outside layer width " + idx(width));
  }
  for (const auto& s : prob.samples) {
    if (static_cast<std::size_t>(s.x0.size()) != prob.net.input_dim()) {
      throw DimensionError("sample input has wrong length");
    }
    if (static_cast<std::size_t>(s.target.size()) != prob.net.output_dim()) {
      throw DimensionError("sample target has wrong length");
    }
  }
  if (prob.bounds.size() != prob.samples.size()) throw PreconditionError("missing bounds for some samples");
  for (const auto& b : prob.bounds) {
    if (b.first_layer != prob.layer || b.last_layer() != layers) {
      throw PreconditionError("bounds do not cover layers " + idx(prob.layer) + ".." + idx(layers));
    }
  }
}

WeightBox repair_box(const RepairProblem& prob) {
  const LayerParams& init = prob.net.layer(prob.layer);
  WeightBox box = weight_box(init, prob.delta_max);
  for (std::size_t r = 0; r < init.out_dim(); ++r) {
    if (prob.row_repairable(r)) continue;
    const auto ri = static_cast<Eigen::Index>(r);
    box.weight_lo.row(ri) = init.weights.row(ri);
    box.weight_hi.row(ri) = init.weights.row(ri);
    box.bias_lo(ri) = init.bias(ri);
    box.bias_hi(ri) = init.bias(ri);
  }
  return box;
}

Interval bigm(const Interval& iv, double widen) {
  if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) throw NumericalError("non-finite Big-M bound");
  return iv.widened(widen);
}

}  // namespace

bool RepairProblem::row_repairable(std::size_t row) const {
  if (options.nodes.empty()) return true;
  return std::find(options.nodes.begin(), options.nodes.end(), row) != options.nodes.end();
}

RepairProblem make_repair_problem(Network net, std::size_t layer, std::vector<RepairSample> samples,
                                  Predicate pred, double delta_max, EncodeOptions options) {
  RepairProblem prob;
  prob.net = std::move(net);
  prob.layer = layer;
  prob.samples = std::move(samples);
  prob.pred = std::move(pred);
  prob.delta_max = delta_max;
  prob.options = std::move(options);
  validate_predicate(prob.pred);
  // Bounds are filled below; check everything else first.
  prob.bounds.resize(prob.samples.size());
  for (auto& b : prob.bounds) {
    b.first_layer = layer;
    b.layers.resize(prob.net.num_layers() >= layer ? prob.net.num_layers() - layer + 1 : 0);
  }
  check_problem(prob);
  const WeightBox box = repair_box(prob);
  for (std::size_t n = 0; n < prob.samples.size(); ++n) {
    prob.bounds[n] = repair_bounds(prob.net, layer, box, prob.samples[n].x0);
  }
  return prob;
}

MiqpModel encode_repair(const RepairProblem& prob) {
  check_problem(prob);
  const Network& net = prob.net;
  const std::size_t l = prob.layer;
  const std::size_t num_layers = net.num_layers();
  const LayerParams& init = net.layer(l);
  const std::size_t rows = init.out_dim();
  const std::size_t cols = init.in_dim();
  const EncodeOptions& opt = prob.options;
  const double widen = opt.bigm_widen;

  MiqpModel m;
  const int delta = m.add_continuous("delta", 0.0, prob.delta_max);
  if (opt.delta_weight != 0.0) m.add_linear(delta, opt.delta_weight);

  std::vector<std::vector<int>> wvar(rows, std::vector<int>(cols, -1));
  std::vector<int> bvar(rows, -1);
  auto add_param = [&](const std::string& name, double v0) {
    const int v = m.add_continuous(name, v0 - prob.delta_max, v0 + prob.delta_max);
    m.add_constraint({{v, 1.0}, {delta, -1.0}}, Sense::LessEqual, v0, name + "_dpos");
    m.add_constraint({{v, 1.0}, {delta, 1.0}}, Sense::GreaterEqual, v0, name + "_dneg");
    if (opt.l1_weight > 0.0) {
      const int a = m.add_continuous("abs_" + name, 0.0, prob.delta_max);
      m.add_constraint({{a, 1.0}, {v, -1.0}}, Sense::GreaterEqual, -v0, "abs_" + name + "_pos");
      m.add_constraint({{a, 1.0}, {v, 1.0}}, Sense::GreaterEqual, v0, "abs_" + name + "_neg");
      m.add_linear(a, opt.l1_weight);
    }
    return v;
  };
  for (std::size_t i = 0; i < rows; ++i) {
    if (!prob.row_repairable(i)) continue;
    for (std::size_t j = 0; j < cols; ++j) {
      wvar[i][j] = add_param(w_name(l, i, j), init.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    bvar[i] = add_param(b_name(l, i), init.bias(static_cast<Eigen::Index>(i)));
  }

  for (std::size_t n = 0; n < prob.samples.size(); ++n) {
    const RepairSample& s = prob.samples[n];
    const BoundsMap& bm = prob.bounds[n];
    const Activations tr = net.forward_trace(s.x0);
    const Vector& x_prev = (l == 1) ? s.x0 : tr.post[l - 2];

    // Pre-activations of the repaired layer.
    std::vector<Expr> z(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      if (!prob.row_repairable(i)) {
        z[i].c = (l <= tr.pre.size()) ? tr.pre[l - 1](static_cast<Eigen::Index>(i))
                                      : tr.output(static_cast<Eigen::Index>(i));
        continue;
      }
      for (std::size_t j = 0; j < cols; ++j) {
        const double xv = x_prev(static_cast<Eigen::Index>(j));
        if (xv != 0.0) z[i].terms.push_back({wvar[i][j], xv});
      }
      z[i].terms.push_back({bvar[i], 1.0});
    }

    for (std::size_t layer = l; layer <= num_layers; ++layer) {
      const LayerBounds& lb = bm.at(layer);
      if (layer > l) {
        // z = W x + b with fixed weights; x are expressions from the layer below.
        const LayerParams& p = net.layer(layer);
        std::vector<Expr> next(p.out_dim());
        // `z` currently holds the post-activations of the previous layer.
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
      }

      if (layer == num_layers) {
        for (std::size_t k = 0; k < z.size(); ++k) {
          const Interval yb = bigm(lb.pre[k], widen);
          const int y = m.add_continuous(y_name(n, k), yb.lo, yb.hi);
          add_row(m, {{y, 1.0}}, z[k], -1.0, Sense::Equal, 0.0, y_name(n, k) + "_def");
          z[k] = Expr{0.0, {{y, 1.0}}};
        }
        break;
      }

      // Hidden ReLU layer.
      const Vector& orig_pre = tr.pre[layer - 1];
      for (std::size_t j = 0; j < z.size(); ++j) {
        if (z[j].constant()) {
          z[j].c = std::max(0.0, z[j].c);
          continue;
        }
        const Interval b = lb.pre[j];
        if (opt.eliminate_fixed && b.hi <= 0.0) {
          z[j] = Expr{};
          continue;
        }
        const std::string xn = x_name(n, layer, j);
        if (opt.eliminate_fixed && b.lo >= 0.0) {
          const Interval bw = bigm(b, widen);
          const int x = m.add_continuous(xn, bw.lo, bw.hi);
          add_row(m, {{x, 1.0}}, z[j], -1.0, Sense::Equal, 0.0, xn + "_id");
          z[j] = Expr{0.0, {{x, 1.0}}};
          continue;
        }
        const Interval bw = bigm(b, widen);
        const int x = m.add_continuous(xn, 0.0, std::max(0.0, bw.hi));
        const int phi = m.add_binary(phi_name(n, layer, j));
        m.set_binary_hint(phi, orig_pre(static_cast<Eigen::Index>(j)) > 0.0 ? 1.0 : 0.0);
        // x >= z
        add_row(m, {{x, 1.0}}, z[j], -1.0, Sense::GreaterEqual, 0.0, xn + "_ge");
        // x <= z - lb (1 - phi)
        add_row(m, {{x, 1.0}, {phi, -bw.lo}}, z[j], -1.0, Sense::LessEqual, -bw.lo, xn + "_lo");
        // x <= ub phi
        m.add_constraint({{x, 1.0}, {phi, -bw.hi}}, Sense::LessEqual, 0.0, xn + "_hi");
        z[j] = Expr{0.0, {{x, 1.0}}};
      }
    }

    // Loss: sum_k (y_k - t_k)^2.
    for (std::size_t k = 0; k < net.output_dim(); ++k) {
      const int y = z[k].terms.front().var;
      const double t = s.target(static_cast<Eigen::Index>(k));
      m.add_quadratic(y, y, 1.0);
      m.add_linear(y, -2.0 * t);
      m.add_constant(t * t);
    }

    if (!s.constrained) continue;

    // Predicate: some disjunct must hold.
    const LayerBounds& out_bounds = bm.at(num_layers);
    std::vector<Interval> y_box;
    for (const auto& iv : out_bounds.pre) y_box.push_back(bigm(iv, widen));
    std::vector<Interval> x_box;
    for (Eigen::Index i = 0; i < s.x0.size(); ++i) x_box.push_back({s.x0(i), s.x0(i)});

    struct AtomRow {
      const AffineAtom* atom;
      double rhs;  // tightened
      Interval range;
    };
    std::vector<std::vector<AtomRow>> live;  // disjuncts that can still hold
    bool trivially_true = false;
    for (const auto& conj : prob.pred.disjuncts) {
      std::vector<AtomRow> atoms;
      bool possible = true;
      bool all_hold = true;
      for (const auto& a : conj) {
        const double rhs = a.rel == Relation::LessEqual ? a.rhs - opt.predicate_margin : a.rhs + opt.predicate_margin;
        const Interval r = a.lhs_range(x_box, y_box);
        const bool holds_always = a.rel == Relation::LessEqual ? r.hi <= rhs : r.lo >= rhs;
        const bool never = a.rel == Relation::LessEqual ? r.lo > rhs : r.hi < rhs;
        if (never) possible = false;
        if (!holds_always) {
          all_hold = false;
          atoms.push_back({&a, rhs, r});
        }
      }
      if (all_hold) {
        trivially_true = true;
        break;
      }
      if (possible) live.push_back(std::move(atoms));
    }
    if (trivially_true) continue;
    if (live.empty()) {
      // No disjunct can hold anywhere in the box; record an unsatisfiable row.
      m.add_constraint({{delta, 0.0}}, Sense::GreaterEqual, 1.0, "pred_" + idx(n) + "_empty");
      continue;
    }

    auto atom_expr = [&](const AffineAtom& a, double& constant) {
      std::vector<LinTerm> terms;
      constant = 0.0;
      for (const auto& t : a.terms) {
        if (t.var.kind == VarRef::Kind::Input) {
          constant += t.coef * s.x0(static_cast<Eigen::Index>(t.var.index));
        } else {
          terms.push_back({z[t.var.index].terms.front().var, t.coef});
        }
      }
      return terms;
    };

    const Vector y_orig = tr.output;
    if (live.size() == 1) {
      for (const auto& ar : live.front()) {
        double c = 0.0;
        auto terms = atom_expr(*ar.atom, c);
        const Sense sense = ar.atom->rel == Relation::LessEqual ? Sense::LessEqual : Sense::GreaterEqual;
        m.add_constraint(std::move(terms), sense, ar.rhs - c, "pred_" + idx(n));
      }
      continue;
    }

    std::vector<LinTerm> pick;
    bool hinted = false;
    for (std::size_t d = 0; d < live.size(); ++d) {
      const int beta = m.add_binary(beta_name(n, d));
      pick.push_back({beta, 1.0});
      bool holds_now = true;
      for (const auto& ar : live[d]) {
        double c = 0.0;
        auto terms = atom_expr(*ar.atom, c);
        const double lhs0 = ar.atom->lhs(s.x0, y_orig);
        if (ar.atom->rel == Relation::LessEqual) {
          holds_now = holds_now && lhs0 <= ar.rhs;
          // lhs - rhs <= M (1 - beta), M = range.hi - rhs
          const double big = ar.range.hi - ar.rhs;
          terms.push_back({beta, big});
          m.add_constraint(std::move(terms), Sense::LessEqual, ar.rhs - c + big,
                           beta_name(n, d) + "_le");
        } else {
          holds_now = holds_now && lhs0 >= ar.rhs;
          // lhs - rhs >= -M (1 - beta), M = rhs - range.lo
          const double big = ar.rhs - ar.range.lo;
          terms.push_back({beta, -big});
          m.add_constraint(std::move(terms), Sense::GreaterEqual, ar.rhs - c - big,
                           beta_name(n, d) + "_ge");
        }
      }
      const bool choose = holds_now && !hinted;
      hinted = hinted || choose;
      m.set_binary_hint(beta, choose ? 1.0 : 0.0);
    }
    m.add_constraint(std::move(pick), Sense::GreaterEqual, 1.0, "pred_" + idx(n));
  }
  return m;
}

double repair_objective(const RepairProblem& prob, const LayerParams& params) {
  const LayerParams& init = prob.net.layer(prob.layer);
  const Network patched = prob.net.patch_layer(prob.layer, params);
  double loss = 0.0;
  for (const auto& s : prob.samples) {
    loss += (patched.forward(s.x0) - s.target).squaredNorm();
  }
  double delta = 0.0;
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < init.weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < init.weights.cols(); ++j) {
      const double d = std::abs(params.weights(i, j) - init.weights(i, j));
      delta = std::max(delta, d);
      l1 += d;
    }
    const double d = std::abs(params.bias(i) - init.bias(i));
    delta = std::max(delta, d);
    l1 += d;
  }
  double obj = loss + prob.options.delta_weight * delta;
  if (prob.options.l1_weight > 0.0) obj += prob.options.l1_weight * l1;
  return obj;
}

DecodedRepair decode_solution(const RepairProblem& prob, const MiqpModel& model,
                              const std::vector<double>& assignment) {
  if (assignment.size() != model.num_vars()) throw DimensionError("assignment does not cover the model");
  const LayerParams& init = prob.net.layer(prob.layer);
  DecodedRepair out;
  out.params = init;
  for (std::size_t i = 0; i < init.out_dim(); ++i) {
    if (!prob.row_repairable(i)) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < init.in_dim(); ++j) {
      out.params.weights(ii, static_cast<Eigen::Index>(j)) =
          assignment[static_cast<std::size_t>(model.index_of(w_name(prob.layer, i, j)))];
    }
    out.params.bias(ii) = assignment[static_cast<std::size_t>(model.index_of(b_name(prob.layer, i)))];
  }
  out.delta = std::max((out.params.weights - init.weights).cwiseAbs().maxCoeff(),
                       (out.params.bias - init.bias).cwiseAbs().maxCoeff());
  out.objective = repair_objective(prob, out.params);
  return out;
}

std::vector<double> assignment_from_params(const RepairProblem& prob, const MiqpModel& model,
                                           const LayerParams& params) {
  const LayerParams& init = prob.net.layer(prob.layer);
  std::vector<double> x(model.num_vars(), 0.0);
  auto set = [&](const std::string& name, double v) {
    if (auto i = model.find(name)) x[static_cast<std::size_t>(*i)] = v;
  };
  double delta = 0.0;
  for (std::size_t i = 0; i < init.out_dim(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < init.in_dim(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      set(w_name(prob.layer, i, j), params.weights(ii, jj));
      set("abs_" + w_name(prob.layer, i, j), std::abs(params.weights(ii, jj) - init.weights(ii, jj)));
      delta = std::max(delta, std::abs(params.weights(ii, jj) - init.weights(ii, jj)));
    }
    set(b_name(prob.layer, i), params.bias(ii));
    set("abs_" + b_name(prob.layer, i), std::abs(params.bias(ii) - init.bias(ii)));
    delta = std::max(delta, std::abs(params.bias(ii) - init.bias(ii)));
  }
  set("delta", delta);
  const Network patched = prob.net.patch_layer(prob.layer, params);
  for (std::size_t n = 0; n < prob.samples.size(); ++n) {
    const RepairSample& s = prob.samples[n];
    const Activations tr = patched.forward_trace(s.x0);
    for (std::size_t layer = prob.layer; layer < prob.net.num_layers(); ++layer) {
      for (Eigen::Index j = 0; j < tr.pre[layer - 1].size(); ++j) {
        set(x_name(n, layer, static_cast<std::size_t>(j)), tr.post[layer - 1](j));
        set(phi_name(n, layer, static_cast<std::size_t>(j)), tr.pre[layer - 1](j) > 0.0 ? 1.0 : 0.0);
      }
    }
    for (Eigen::Index k = 0; k < tr.output.size(); ++k) set(y_name(n, static_cast<std::size_t>(k)), tr.output(k));
    // Selector binaries: first disjunct variable whose atoms all hold.
    bool chosen = false;
    for (std::size_t d = 0;; ++d) {
      auto bi = model.find(beta_name(n, d));
      if (!bi) break;
      bool ok = !chosen;
      if (ok) {
        for (const auto& row : model.constraints()) {
          if (row.name != beta_name(n, d) + "_le" && row.name != beta_name(n, d) + "_ge") continue;
          double lhs = 0.0;
          for (const auto& t : row.terms) lhs += t.coef * (t.var == *bi ? 1.0 : x[static_cast<std::size_t>(t.var)]);
          ok = ok && (row.sense == Sense::LessEqual ? lhs <= row.rhs + 1e-9 : lhs >= row.rhs - 1e-9);
        }
      }
      x[static_cast<std::size_t>(*bi)] = ok ? 1.0 : 0.0;
      chosen = chosen || ok;
    }
  }
  return x;
}

}  // namespace nnrep

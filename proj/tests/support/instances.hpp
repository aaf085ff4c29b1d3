#pragma once

// Seeded instance generators shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Sparse>

#include "nnrep/data.hpp"
#include "nnrep/encoder.hpp"
#include "nnrep/miqp_model.hpp"
#include "nnrep/network.hpp"
#include "nnrep/predicate.hpp"
#include "nnrep/qp_solver.hpp"

namespace nnrep::testing {

using Rng = std::mt19937_64;

inline LayerParams random_layer(Rng& rng, std::size_t out, std::size_t in, double weight_scale = 1.0,
                                double bias_sd = 0.3) {
  std::normal_distribution<double> n(0.0, 1.0);
  LayerParams p;
  p.weights = Matrix(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  p.bias = Vector(static_cast<Eigen::Index>(out));
  for (Eigen::Index a = 0; a < p.weights.rows(); ++a) {
    for (Eigen::Index b = 0; b < p.weights.cols(); ++b) {
      p.weights(a, b) = weight_scale * n(rng) / std::sqrt(static_cast<double>(in));
    }
    p.bias(a) = bias_sd * n(rng);
  }
  return p;
}

// widths = {input, hidden..., output}
inline Network random_network(Rng& rng, const std::vector<std::size_t>& widths, double weight_scale = 1.0,
                              double bias_sd = 0.3) {
  std::vector<LayerParams> layers;
  for (std::size_t i = 1; i < widths.size(); ++i) {
    layers.push_back(random_layer(rng, widths[i], widths[i - 1], weight_scale, bias_sd));
  }
  return Network(widths.front(), std::move(layers));
}

inline Vector uniform_point(Rng& rng, std::size_t dim, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector x(static_cast<Eigen::Index>(dim));
  for (auto& v : x) v = u(rng);
  return x;
}

// Layer-by-layer evaluation written independently of Network::forward.
inline std::vector<double> reference_forward(const Network& net, const std::vector<double>& x0) {
  std::vector<double> cur = x0;
  for (std::size_t l = 1; l <= net.num_layers(); ++l) {
    const LayerParams& p = net.layer(l);
    std::vector<double> next(p.out_dim(), 0.0);
    for (std::size_t r = 0; r < p.out_dim(); ++r) {
      long double acc = p.bias(static_cast<Eigen::Index>(r));
      for (std::size_t c = 0; c < p.in_dim(); ++c) {
        acc += static_cast<long double>(p.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) *
               cur[c];
      }
      const double v = static_cast<double>(acc);
      next[r] = l < net.num_layers() ? std::max(0.0, v) : v;
    }
    cur = std::move(next);
  }
  return cur;
}

// 2-8-8-1 network and 50 samples on [-1,1]^2 where exactly `n_violating`
// outputs exceed `bound`. The output layer is rescaled to a spread of 8 and
// its bias shifted to place the threshold between two sorted outputs.
struct BoundInstance {
  Network net;
  Dataset data;
  Predicate pred;
};

inline BoundInstance global_bound_instance(std::uint64_t seed, std::size_t n_samples = 50,
                                           std::size_t n_violating = 12, double bound = 10.0) {
  Rng rng(seed);
  std::vector<LayerParams> layers{random_layer(rng, 8, 2, 1.5), random_layer(rng, 8, 8, 1.5),
                                  random_layer(rng, 1, 8, 1.5)};
  Dataset ds;
  ds.input_names = {"x0", "x1"};
  ds.target_names = {"y"};
  for (std::size_t i = 0; i < n_samples; ++i) ds.inputs.push_back(uniform_point(rng, 2, -1.0, 1.0));

  auto outputs = [&](const std::vector<LayerParams>& ls) {
    Network n(2, ls);
    std::vector<double> ys;
    for (const auto& x : ds.inputs) ys.push_back(n.forward(x)(0));
    return ys;
  };
  std::vector<double> ys = outputs(layers);
  const auto [mn, mx] = std::minmax_element(ys.begin(), ys.end());
  const double k = 8.0 / std::max(*mx - *mn, 1e-3);
  layers[2].weights *= k;
  layers[2].bias *= k;
  ys = outputs(layers);
  std::vector<double> sorted = ys;
  std::sort(sorted.rbegin(), sorted.rend());
  layers[2].bias(0) += bound - 0.5 * (sorted[n_violating - 1] + sorted[n_violating]);

  BoundInstance inst{Network(2, layers), std::move(ds), build_global_bound(-bound, bound)};
  for (const auto& x : inst.data.inputs) {
    inst.data.targets.push_back(Vector::Constant(1, std::clamp(inst.net.forward(x)(0), -bound, bound)));
    inst.data.in_region.push_back(true);
  }
  return inst;
}

// Network-only verification instance on [-1,1]^2: the bound sits just below
// (odd seeds: just above) the sampled maximum of the output.
struct VerifyInstance {
  Network net;
  double threshold = 0.0;
};

inline VerifyInstance verify_instance(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 0.7);
  auto layer = [&](Eigen::Index out, Eigen::Index in) {
    LayerParams p{Matrix(out, in), Vector(out)};
    for (Eigen::Index a = 0; a < out; ++a) {
      for (Eigen::Index b = 0; b < in; ++b) p.weights(a, b) = n(rng);
      p.bias(a) = n(rng);
    }
    return p;
  };
  Network net(2, {layer(8, 2), layer(8, 8), layer(1, 8)});
  double mx = -1e300;
  for (int k = 0; k < 20000; ++k) mx = std::max(mx, net.forward(uniform_point(rng, 2, -1.0, 1.0))(0));
  return {std::move(net), mx + (seed % 2 == 1 ? 0.05 : -0.05)};
}

// Every binary fixed to `pattern`, then the remaining convex QP in OSQP form
// (min 1/2 x'Px + q'x, l <= Ax <= u) built directly from the model rows.
struct FixedQp {
  SparseMatrix P;
  Vector q;
  SparseMatrix A;
  Vector l;
  Vector u;
  double constant = 0.0;
};

inline FixedQp fixed_pattern_qp(const MiqpModel& m, const std::vector<int>& binaries, std::uint64_t pattern) {
  const auto n = static_cast<Eigen::Index>(m.num_vars());
  const auto rows = static_cast<Eigen::Index>(m.num_constraints()) + n;
  FixedQp qp;
  std::vector<Eigen::Triplet<double>> pt;
  for (const auto& t : m.quadratic()) {
    if (t.i == t.j) {
      pt.emplace_back(t.i, t.i, 2.0 * t.coef);
    } else {
      pt.emplace_back(t.i, t.j, t.coef);
      pt.emplace_back(t.j, t.i, t.coef);
    }
  }
  qp.P.resize(n, n);
  qp.P.setFromTriplets(pt.begin(), pt.end());
  qp.q = Eigen::Map<const Vector>(m.linear().data(), n);
  qp.constant = m.objective_constant();

  std::vector<Eigen::Triplet<double>> at;
  qp.l = Vector(rows);
  qp.u = Vector(rows);
  Eigen::Index r = 0;
  for (const auto& c : m.constraints()) {
    for (const auto& t : c.terms) at.emplace_back(r, t.var, t.coef);
    qp.l(r) = c.sense == Sense::LessEqual ? -kInf : c.rhs;
    qp.u(r) = c.sense == Sense::GreaterEqual ? kInf : c.rhs;
    ++r;
  }
  for (Eigen::Index i = 0; i < n; ++i, ++r) {
    at.emplace_back(r, i, 1.0);
    qp.l(r) = m.var(static_cast<int>(i)).lo;
    qp.u(r) = m.var(static_cast<int>(i)).hi;
  }
  for (std::size_t b = 0; b < binaries.size(); ++b) {
    const double v = (pattern >> b) & 1U ? 1.0 : 0.0;
    const Eigen::Index row = static_cast<Eigen::Index>(m.num_constraints()) + binaries[b];
    qp.l(row) = v;
    qp.u(row) = v;
  }
  qp.A.resize(rows, n);
  qp.A.setFromTriplets(at.begin(), at.end());
  return qp;
}

// Exhaustive oracle: solve the convex QP of every binary pattern and keep the
// best; nullopt when every pattern is infeasible. Patterns are solved on the
// unreduced formulation above, not the presolved one branch-and-bound uses,
// by the interior point method with operator splitting as the fallback. The
// winning pattern is solved again by operator splitting alone as a check on
// the first method.
//
// Patterns neither method resolves are degenerate (a feasible set without
// interior). Their rows are widened by 1e-6; the widened optimum bounds the
// pattern from below, so the pattern is dismissed when that bound is within
// `tol` of the best or above it, or when the widened problem is infeasible.
struct PatternOracle {
  std::optional<double> best;
  std::optional<std::uint64_t> best_pattern;
  // Operator-splitting objective of the winning pattern, when it converged.
  std::optional<double> best_admm;
  std::size_t feasible_patterns = 0;
  std::size_t dismissed = 0;
  std::size_t unresolved = 0;
};

inline QpSettings oracle_admm_settings() {
  QpSettings s;
  s.method = QpMethod::Admm;
  s.eps_abs = 1e-10;
  s.eps_rel = 1e-10;
  s.max_iter = 200000;
  return s;
}

inline PatternOracle enumerate_patterns(const MiqpModel& m,
                                        const std::function<double(double)>& tol = [](double best) {
                                          return std::max(1e-6, 1e-4 * std::abs(best));
                                        }) {
  std::vector<int> binaries;
  for (std::size_t i = 0; i < m.num_vars(); ++i) {
    if (m.var(static_cast<int>(i)).binary) binaries.push_back(static_cast<int>(i));
  }
  PatternOracle out;
  std::vector<std::uint64_t> stuck;
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << binaries.size()); ++pattern) {
    const FixedQp qp = fixed_pattern_qp(m, binaries, pattern);
    QpResult r = solve_qp(qp.P, qp.q, qp.A, qp.l, qp.u, QpSettings{});
    if (r.status == QpStatus::IterationLimit || r.status == QpStatus::NumericalError) {
      r = solve_qp(qp.P, qp.q, qp.A, qp.l, qp.u, oracle_admm_settings());
    }
    if (r.status == QpStatus::PrimalInfeasible) continue;
    if (r.status != QpStatus::Solved) {
      stuck.push_back(pattern);
      continue;
    }
    ++out.feasible_patterns;
    const double obj = r.objective + qp.constant;
    if (!out.best || obj < *out.best) {
      out.best = obj;
      out.best_pattern = pattern;
    }
  }
  for (std::uint64_t pattern : stuck) {
    const FixedQp qp = fixed_pattern_qp(m, binaries, pattern);
    Vector l = qp.l;
    Vector u = qp.u;
    for (Eigen::Index i = 0; i < l.size(); ++i) {
      if (std::isfinite(l(i))) l(i) -= 1e-6 * (1.0 + std::abs(l(i)));
      if (std::isfinite(u(i))) u(i) += 1e-6 * (1.0 + std::abs(u(i)));
    }
    const QpResult w = solve_qp(qp.P, qp.q, qp.A, l, u, QpSettings{});
    const bool dominated = w.status == QpStatus::Solved && out.best &&
                           w.objective + qp.constant >= *out.best - tol(*out.best);
    if (w.status == QpStatus::PrimalInfeasible || dominated) {
      ++out.dismissed;
    } else {
      ++out.unresolved;
    }
  }
  if (out.best_pattern) {
    const FixedQp qp = fixed_pattern_qp(m, binaries, *out.best_pattern);
    const QpResult r = solve_qp(qp.P, qp.q, qp.A, qp.l, qp.u, oracle_admm_settings());
    if (r.status == QpStatus::Solved) out.best_admm = r.objective + qp.constant;
  }
  return out;
}

// Small random repair model: 2-h-h-1 net (h in {2, 3}), 1-4 samples, a
// bound or conditional-avoid predicate and a random layer and radius.
struct MiqpInstance {
  MiqpModel model;
  bool disjunctive = false;
};

inline MiqpInstance random_miqp_instance(Rng& rng) {
  const std::size_t h = 2 + rng() % 2;
  const Network net = random_network(rng, {2, h, h, 1});
  const std::size_t layer = 1 + rng() % 3;
  const std::size_t n = 1 + rng() % 4;
  std::vector<RepairSample> samples;
  double mx = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector x = uniform_point(rng, 2, -1, 1);
    const Vector y = net.forward(x);
    mx = std::max(mx, y(0));
    samples.push_back({x, y.array() + 0.2 * uniform_point(rng, 1, -1, 1).array(), true});
  }
  MiqpInstance out;
  out.disjunctive = rng() % 4 == 0;
  const Predicate pred = out.disjunctive ? build_conditional_avoid(0, {-0.5, 0.5}, {mx - 0.3, mx + 0.3})
                                         : build_global_bound(-100, mx - 0.1);
  const double delta_max = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
  EncodeOptions eo;
  eo.eliminate_fixed = rng() % 2 == 0;
  out.model = encode_repair(make_repair_problem(net, layer, samples, pred, delta_max, eo));
  return out;
}

}  // namespace nnrep::testing

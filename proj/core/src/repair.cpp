#include "nnrep/repair.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nnrep/error.hpp"
#include "nnrep/io.hpp"

namespace nnrep {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void check_dataset(const Network& net, const Dataset& ds) {
  ds.validate();
  if (ds.empty()) throw PreconditionError("repair dataset is empty");
  if (ds.input_dim() != net.input_dim()) throw DimensionError("dataset inputs do not match the network input width");
  if (ds.target_dim() != net.output_dim()) throw DimensionError("dataset targets do not match the network output width");
}

double max_abs_change(const LayerParams& a, const LayerParams& b) {
  return std::max((a.weights - b.weights).cwiseAbs().maxCoeff(), (a.bias - b.bias).cwiseAbs().maxCoeff());
}

}  // namespace

std::size_t resolve_layer(const Network& net, std::size_t layer) {
  const std::size_t n = net.num_layers();
  if (n == 0) throw PreconditionError("network has no layers");
  if (layer == 0) return std::max<std::size_t>(1, n - 1);
  if (layer > n) throw PreconditionError("layer " + std::to_string(layer) + " outside 1.." + std::to_string(n));
  return layer;
}

RepairOutcome repair_layer(const Network& net, const Dataset& ds, const Predicate& pred, const RepairOptions& opts) {
  const auto t_start = Clock::now();
  check_dataset(net, ds);
  validate_predicate(pred);
  if (!std::isfinite(opts.delta_max) || opts.delta_max < 0.0) {
    throw PreconditionError("delta_max must be finite and non-negative");
  }
  if (opts.nodes && opts.nodes->empty()) throw PreconditionError("node subset must not be empty");
  if (opts.l1_weight < 0.0) throw PreconditionError("l1 weight must be non-negative");
  const std::size_t l = resolve_layer(net, opts.layer);

  RepairOutcome out{net, {}};
  RepairReport& rep = out.report;
  rep.layer = l;

  std::vector<RepairSample> samples;
  for (std::size_t i = 0; i < ds.size(); ++i) samples.push_back({ds.inputs[i], ds.targets[i], ds.in_region[i]});
  EncodeOptions enc;
  enc.delta_weight = opts.delta_weight;
  enc.l1_weight = opts.l1_weight;
  if (opts.nodes) enc.nodes = *opts.nodes;
  enc.predicate_margin = opts.predicate_margin;

  auto t0 = Clock::now();
  const RepairProblem prob = make_repair_problem(net, l, std::move(samples), pred, opts.delta_max, enc);
  rep.timings["bounds"] = seconds_since(t0);

  t0 = Clock::now();
  MiqpModel model = encode_repair(prob);
  if (!opts.use_hint) model.clear_binary_hints();
  rep.timings["encode"] = seconds_since(t0);

  t0 = Clock::now();
  const SolveResult res = solve(model, opts.solve);
  rep.timings["solve"] = seconds_since(t0);
  rep.status = res.status;
  rep.nodes = res.nodes;
  rep.diagnostic = res.diagnostic;

  if (res.has_solution()) {
    const DecodedRepair dec = decode_solution(prob, model, res.x);
    out.net = net.patch_layer(l, dec.params);
    rep.objective = dec.objective;
    rep.delta = max_abs_change(net.layer(l), out.net.layer(l));
    std::size_t failures = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.in_region[i] && !eval_predicate(pred, ds.inputs[i], out.net.forward(ds.inputs[i]), opts.predicate_tol)) {
        ++failures;
      }
    }
    if (failures > 0) {
      rep.diagnostic += (rep.diagnostic.empty() ? "" : "; ") + std::to_string(failures) +
                        " constrained sample(s) still violate the predicate after replay";
    }
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.in_region[i] || eval_predicate(pred, ds.inputs[i], net.forward(ds.inputs[i]), opts.predicate_tol)) continue;
    ++rep.metrics.violating_before;
    if (eval_predicate(pred, ds.inputs[i], out.net.forward(ds.inputs[i]), opts.predicate_tol)) ++rep.metrics.repaired;
  }
  rep.metrics.re = rep.metrics.violating_before == 0 ? 100.0
                                                      : 100.0 * static_cast<double>(rep.metrics.repaired) /
                                                            static_cast<double>(rep.metrics.violating_before);
  rep.timings["total"] = seconds_since(t_start);
  return out;
}

std::string format_loop_line(const LoopIteration& it) {
  std::ostringstream s;
  s << "iter=" << it.iter << " cex=" << it.counterexamples << " re=" << format_double(it.re)
    << " status=" << it.status;
  return s.str();
}

RepairOutcome repair_and_verify_loop(const Network& net, const InputRegion& region, const Dataset& seed_samples,
                                     const Predicate& pred, const RepairOptions& opts, const LoopOptions& loop) {
  region.validate();
  if (loop.max_iters == 0) throw PreconditionError("max_iters must be at least 1");
  if (region.dim() != net.input_dim()) throw DimensionError("region dimension does not match network input");
  validate_predicate(pred);
  const auto t_start = Clock::now();

  Dataset repair_set = seed_samples;
  if (repair_set.input_names.empty()) {
    for (std::size_t i = 0; i < net.input_dim(); ++i) repair_set.input_names.push_back("x" + std::to_string(i));
    for (std::size_t k = 0; k < net.output_dim(); ++k) repair_set.target_names.push_back("y" + std::to_string(k));
  }
  repair_set.validate();

  VerifyOptions vopts = loop.verify;
  vopts.max_cex = loop.cex_per_iter;
  if (loop.exclusion_radius > 0.0) {
    vopts.exclusion_radius = loop.exclusion_radius;
  } else {
    double eps = 0.0;
    for (const auto& b : region.box) eps = std::max(eps, 0.5 * b.width());
    vopts.exclusion_radius = eps > 0.0 ? eps / 2.0 : 1e-3;
  }

  RepairOutcome out{net, {}};
  RepairReport& rep = out.report;
  rep.layer = resolve_layer(net, opts.layer);
  rep.status = SolveStatus::Optimal;
  auto emit = [&](const LoopIteration& it) {
    rep.loop.push_back(it);
    if (loop.log) *loop.log << format_loop_line(it) << '\n' << std::flush;
  };
  auto run_repair = [&]() -> bool {
    RepairOutcome r = repair_layer(out.net, repair_set, pred, opts);
    rep.status = r.report.status;
    rep.nodes += r.report.nodes;
    rep.objective = r.report.objective;
    rep.diagnostic = r.report.diagnostic;
    for (const auto& [k, v] : r.report.timings) rep.timings["repair_" + k] += v;
    rep.metrics.re = repair_efficacy(net, r.net, repair_set, pred, opts.predicate_tol);
    if (!r.report.feasible()) return false;
    out.net = std::move(r.net);
    return true;
  };

  // Initial repair on the seed samples when any of them violate.
  bool seed_violated = false;
  for (std::size_t i = 0; i < repair_set.size(); ++i) {
    if (repair_set.in_region[i] &&
        !eval_predicate(pred, repair_set.inputs[i], out.net.forward(repair_set.inputs[i]), opts.predicate_tol)) {
      seed_violated = true;
    }
  }
  if (seed_violated && !run_repair()) {
    emit({0, 0, rep.metrics.re, to_string(rep.status)});
    rep.unknown = true;
    rep.delta = max_abs_change(net.layer(rep.layer), out.net.layer(rep.layer));
    rep.timings["total"] = seconds_since(t_start);
    return out;
  }

  for (std::size_t k = 1; k <= loop.max_iters; ++k) {
    const auto tv = Clock::now();
    const Verdict v = verify(out.net, region, pred, vopts);
    rep.timings["verify"] += seconds_since(tv);
    if (v.kind == VerdictKind::Safe) {
      rep.verified_safe = true;
      emit({k, 0, rep.metrics.re, "safe"});
      break;
    }
    if (v.kind == VerdictKind::Unknown) {
      rep.unknown = true;
      rep.diagnostic = v.diagnostic;
      emit({k, 0, rep.metrics.re, "unknown"});
      break;
    }
    if (k == loop.max_iters) {
      rep.unknown = true;
      rep.diagnostic = "iteration budget exhausted with violations remaining";
      emit({k, v.counterexamples.size(), rep.metrics.re, "violated"});
      break;
    }
    for (const auto& c : v.counterexamples) {
      repair_set.inputs.push_back(c);
      repair_set.targets.push_back(net.forward(c));
      repair_set.in_region.push_back(true);
    }
    const bool ok = run_repair();
    emit({k, v.counterexamples.size(), rep.metrics.re, to_string(rep.status)});
    if (!ok) {
      rep.unknown = true;
      break;
    }
  }
  rep.delta = max_abs_change(net.layer(rep.layer), out.net.layer(rep.layer));
  rep.timings["total"] = seconds_since(t_start);
  return out;
}

std::vector<std::size_t> select_sparse_nodes(const Network& net, const Dataset& ds, const Predicate& pred,
                                             const RepairOptions& opts, std::size_t k) {
  if (!(opts.l1_weight > 0.0)) throw PreconditionError("sparse node selection needs a positive l1 weight");
  const std::size_t l = resolve_layer(net, opts.layer);
  const std::size_t width = net.layer(l).out_dim();
  if (k == 0 || k > width) throw PreconditionError("k must be in 1.." + std::to_string(width));
  RepairOptions full = opts;
  full.nodes.reset();
  const RepairOutcome r = repair_layer(net, ds, pred, full);
  if (!r.report.feasible()) {
    throw Error("full-layer repair of layer " + std::to_string(l) + " found no solution (" +
                to_string(r.report.status) + "); try a different layer or a larger delta_max");
  }
  const LayerParams& a = net.layer(l);
  const LayerParams& b = r.net.layer(l);
  std::vector<double> score(width);
  for (std::size_t i = 0; i < width; ++i) {
    const auto ri = static_cast<Eigen::Index>(i);
    score[i] = (a.weights.row(ri) - b.weights.row(ri)).cwiseAbs().sum() + std::abs(a.bias(ri) - b.bias(ri));
  }
  std::vector<std::size_t> order(width);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return score[x] > score[y]; });
  order.resize(k);
  return order;
}

}  // namespace nnrep

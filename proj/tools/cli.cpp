#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nnrep/data.hpp"
#include "nnrep/error.hpp"
#include "nnrep/io.hpp"
#include "nnrep/network.hpp"
#include "nnrep/predicate.hpp"
#include "nnrep/repair.hpp"
#include "nnrep/report.hpp"
#include "nnrep/train.hpp"
#include "nnrep/verifier.hpp"

namespace nnrep::cli {

namespace {

constexpr const char* kSchemas = R"(File formats
  model (JSON):      {"input_dim": n, "activation": "relu",
                      "layers": [{"weights": [[...], ...], "bias": [...]}, ...]}
                     Every layer but the last is followed by a ReLU.
  predicate (JSON):  {"disjuncts": [[{"coeffs": {"y[0]": 1, "x[3]": -1},
                                      "offset": 1.5, "rel": "<="}, ...], ...]}
                     Satisfied when every atom of some disjunct holds. Names are
                     y[k] for outputs, x[i] or a dataset column name for inputs.
                     Built-ins instead of a file: global:LO:HI (LO <= y[0] <= HI)
                     and rate:D[:I] (|y[0] - x[I]| <= D, I defaults to 0).
  dataset (CSV):     header row, then numbers with '.' decimals. Inputs, targets
                     and an optional 0/1 column 'xr' marking samples on which the
                     predicate is enforced (default 1). By default the last
                     column other than 'xr' is the target.
  windowed dataset:  αa_tm1 .. αa_tm<dt>, sensor columns, αa_t, xr
  raw series (CSV):  t, α_ul, α̇_ul, α_ll, α̇_ll, α_a
  region:            lo:hi per input component, comma separated
  loop log:          one line per iteration: iter=<k> cex=<n> re=<%> status=<s>
Exit codes
  0 success (repair feasible, verify safe, loop certified)
  1 usage, input or I/O error
  2 repair infeasible / verify found violations
  3 limit reached without an answer)";

struct Common {
  std::string model;
  std::string data;
  std::string test;
  std::string predicate;
  std::string output;
  std::string report;
  std::string region;
  std::string inputs;
  std::string targets;
  std::size_t layer = 0;
  double delta_max = 1.0;
  std::string nodes;
  double l1_weight = 0.0;
  double time_limit = std::numeric_limits<double>::infinity();
  std::int64_t node_limit = std::numeric_limits<std::int64_t>::max();
  double gap = 1e-4;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<double> eps;
  std::size_t max_iters = 5;
  std::size_t max_cex = 0;
  double exclusion_radius = 0.0;
  bool timings = false;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double to_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw PreconditionError(what + ": '" + s + "' is not a finite number");
  }
  return v;
}

std::size_t to_index(const std::string& s, const std::string& what) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw PreconditionError(what + ": '" + s + "' is not a non-negative integer");
  }
  return v;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw PreconditionError(std::string("missing required option ") + flag);
}

Dataset load_data(const Common& c, const std::string& path) {
  CsvSchema schema;
  schema.inputs = split(c.inputs, ',');
  schema.targets = split(c.targets, ',');
  return load_csv_file(path, schema);
}

Predicate load_pred(const std::string& spec, const VariableSchema& schema) {
  require(spec, "--predicate");
  if (!std::filesystem::exists(spec)) {
    const auto parts = split(spec, ':');
    if (parts.size() == 3 && parts[0] == "global") {
      return build_global_bound(to_number(parts[1], "global bound"), to_number(parts[2], "global bound"));
    }
    if ((parts.size() == 2 || parts.size() == 3) && parts[0] == "rate") {
      const std::size_t input = parts.size() == 3 ? to_index(parts[2], "rate input") : kPrevControlInput;
      if (input >= schema.input_dim) throw PreconditionError("rate bound input index out of range");
      return build_rate_bound(to_number(parts[1], "rate bound"), input);
    }
  }
  return parse_predicate(read_text_file(spec), schema);
}

InputRegion parse_region(const std::string& spec, std::size_t dim) {
  require(spec, "--region");
  InputRegion r;
  for (const auto& part : split(spec, ',')) {
    const auto lh = split(part, ':');
    if (lh.size() != 2) throw PreconditionError("region component '" + part + "' is not lo:hi");
    r.box.push_back({to_number(lh[0], "region"), to_number(lh[1], "region")});
  }
  if (r.box.size() != dim) {
    throw DimensionError("region has " + std::to_string(r.box.size()) + " components, model has " +
                         std::to_string(dim) + " inputs");
  }
  r.validate();
  return r;
}

SolveParams solve_params(const Common& c) {
  SolveParams p;
  p.time_limit_s = c.time_limit;
  p.node_limit = c.node_limit;
  p.rel_gap_tol = c.gap;
  p.seed = c.seed;
  p.threads = c.threads;
  return p;
}

RepairOptions repair_options(const Common& c) {
  RepairOptions o;
  o.layer = c.layer;
  o.delta_max = c.delta_max;
  o.solve = solve_params(c);
  o.l1_weight = c.l1_weight;
  if (!c.nodes.empty()) {
    std::vector<std::size_t> nodes;
    for (const auto& s : split(c.nodes, ',')) nodes.push_back(to_index(s, "--nodes"));
    o.nodes = nodes;
  }
  return o;
}

VerifyOptions verify_options(const Common& c) {
  VerifyOptions v;
  v.params = solve_params(c);
  return v;
}

std::vector<std::string> input_names(const Network& net, const Dataset* ds) {
  if (ds) return ds->input_names;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < net.input_dim(); ++i) names.push_back("x[" + std::to_string(i) + "]");
  return names;
}

Dataset counterexample_set(const Network& net, const std::vector<Vector>& cex, std::vector<std::string> names) {
  Dataset ds;
  ds.input_names = std::move(names);
  for (std::size_t k = 0; k < net.output_dim(); ++k) ds.target_names.push_back("y[" + std::to_string(k) + "]");
  for (const auto& x : cex) {
    ds.inputs.push_back(x);
    ds.targets.push_back(net.forward(x));
    ds.in_region.push_back(true);
  }
  return ds;
}

int status_exit(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
    case SolveStatus::FeasibleLimit: return kExitOk;
    case SolveStatus::Infeasible: return kExitNegative;
    case SolveStatus::Unbounded: return kExitError;
    case SolveStatus::LimitNoSolution: return kExitLimit;
  }
  return kExitError;
}

int cmd_repair(const Common& c, std::ostream& out) {
  require(c.model, "--model");
  require(c.data, "--data");
  require(c.output, "--output");
  const Network net = load_model_file(c.model);
  const Dataset data = load_data(c, c.data);
  const Predicate pred = load_pred(c.predicate, VariableSchema::for_network(net, data.input_names));
  const RepairOptions opts = repair_options(c);
  RepairOutcome r = repair_layer(net, data, pred, opts);
  if (r.report.feasible()) {
    const Dataset test = c.test.empty() ? data : load_data(c, c.test);
    r.report.metrics = compute_metrics(net, r.net, data, test, pred, c.eps, opts.predicate_tol, verify_options(c));
    save_model_file(r.net, c.output);
  }
  if (!c.report.empty()) write_text_file_atomic(c.report, repair_report_json(r.report, c.timings));
  out << "status=" << to_string(r.report.status) << " re=" << format_double(r.report.metrics.re)
      << " delta=" << format_double(r.report.delta) << '\n';
  return status_exit(r.report.status);
}

int cmd_verify(const Common& c, std::ostream& out) {
  require(c.model, "--model");
  const Network net = load_model_file(c.model);
  std::optional<Dataset> data;
  if (!c.data.empty()) data = load_data(c, c.data);
  const auto names = input_names(net, data ? &*data : nullptr);
  const Predicate pred = load_pred(c.predicate, VariableSchema::for_network(net, data ? names : std::vector<std::string>{}));
  const InputRegion region = parse_region(c.region, net.input_dim());
  VerifyOptions v = verify_options(c);
  v.max_cex = c.max_cex == 0 ? 1 : c.max_cex;
  if (c.exclusion_radius > 0.0) v.exclusion_radius = c.exclusion_radius;
  const Verdict verdict = verify(net, region, pred, v);
  if (verdict.kind == VerdictKind::Violated && !c.output.empty()) {
    write_text_file_atomic(c.output, write_csv(counterexample_set(net, verdict.counterexamples, names)));
  }
  if (!c.report.empty()) write_text_file_atomic(c.report, verdict_json(verdict));
  out << "verdict=" << to_string(verdict.kind) << " cex=" << verdict.counterexamples.size() << '\n';
  switch (verdict.kind) {
    case VerdictKind::Safe: return kExitOk;
    case VerdictKind::Violated: return kExitNegative;
    case VerdictKind::Unknown: return kExitLimit;
  }
  return kExitError;
}

int cmd_loop(const Common& c, const std::string& log_path, std::ostream& out) {
  require(c.model, "--model");
  require(c.output, "--output");
  const Network net = load_model_file(c.model);
  Dataset seed;
  if (!c.data.empty()) seed = load_data(c, c.data);
  const Predicate pred =
      load_pred(c.predicate, VariableSchema::for_network(net, c.data.empty() ? std::vector<std::string>{} : seed.input_names));
  const InputRegion region = parse_region(c.region, net.input_dim());
  LoopOptions lo;
  lo.max_iters = c.max_iters;
  if (c.max_cex > 0) lo.cex_per_iter = c.max_cex;
  lo.exclusion_radius = c.exclusion_radius;
  lo.verify = verify_options(c);
  std::ostringstream log;
  lo.log = &log;
  RepairOutcome r = repair_and_verify_loop(net, region, seed, pred, repair_options(c), lo);
  out << log.str();
  if (!log_path.empty()) write_text_file_atomic(log_path, log.str());
  const bool repair_failed = !r.report.feasible();
  if (!repair_failed) save_model_file(r.net, c.output);
  if (!c.report.empty()) write_text_file_atomic(c.report, repair_report_json(r.report, c.timings));
  if (r.report.verified_safe) return kExitOk;
  if (repair_failed) return r.report.status == SolveStatus::Infeasible ? kExitNegative : kExitLimit;
  return kExitLimit;
}

int cmd_eval(const Common& c, const std::string& repaired_path, std::ostream& out) {
  require(c.model, "--model");
  require(repaired_path, "--repaired");
  require(c.test, "--test");
  const Network orig = load_model_file(c.model);
  const Network rep = load_model_file(repaired_path);
  const Dataset test = load_data(c, c.test);
  const Dataset repair_set = c.data.empty() ? test : load_data(c, c.data);
  if (test.empty()) throw PreconditionError("test set is empty");
  const Predicate pred = load_pred(c.predicate, VariableSchema::for_network(orig, test.input_names));
  const Metrics m = compute_metrics(orig, rep, repair_set, test, pred, c.eps, kDefaultPredicateTol, verify_options(c));
  if (!c.output.empty()) {
    std::string csv = "index";
    for (std::size_t k = 0; k < orig.output_dim(); ++k) {
      csv += ",y_orig_" + std::to_string(k) + ",y_repaired_" + std::to_string(k);
    }
    csv += ",sat_orig,sat_repaired\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
      const Vector yo = orig.forward(test.inputs[i]);
      const Vector yr = rep.forward(test.inputs[i]);
      csv += std::to_string(i);
      for (Eigen::Index k = 0; k < yo.size(); ++k) csv += "," + format_double(yo(k)) + "," + format_double(yr(k));
      csv += std::string(",") + (eval_predicate(pred, test.inputs[i], yo, kDefaultPredicateTol) ? "1" : "0") + "," +
             (eval_predicate(pred, test.inputs[i], yr, kDefaultPredicateTol) ? "1" : "0") + "\n";
    }
    write_text_file_atomic(c.output, csv);
  }
  if (!c.report.empty()) write_text_file_atomic(c.report, metrics_json(m));
  out << "mae=" << format_double(m.mae) << " re=" << format_double(m.re) << " ib=" << format_double(m.ib) << '\n';
  return kExitOk;
}

struct GenArgs {
  std::size_t steps = 3000;
  double noise = 0.05;
  std::size_t dt = 10;
  bool sensor_history = false;
  std::string series;
  std::string fit_model;
  std::string hidden = "16,16";
  std::size_t epochs = 150;
  std::string repair_out;
  std::string test_out;
  std::size_t repair_size = 150;
  std::size_t test_size = 2000;
};

int cmd_gen(const Common& c, const GenArgs& g, std::ostream& out) {
  require(c.output, "--output");
  SynthOptions so;
  so.seed = c.seed;
  so.n_steps = g.steps;
  so.noise_sd = g.noise;
  so.min_steps_dt = g.dt;
  const TimeSeries ts = gen_synthetic(so);
  WindowOptions wo;
  wo.dt = g.dt;
  wo.sensor_history = g.sensor_history;
  const Dataset ds = sliding_window(ts, wo);

  std::optional<Network> net;
  if (!g.fit_model.empty()) {
    TrainOptions to;
    to.seed = c.seed;
    to.epochs = g.epochs;
    to.hidden.clear();
    for (const auto& s : split(g.hidden, ',')) to.hidden.push_back(to_index(s, "--hidden"));
    net = fit_policy(ds, to);
  }
  std::optional<Split> parts;
  if (!g.repair_out.empty() || !g.test_out.empty()) {
    if (!net && c.model.empty()) throw PreconditionError("splitting needs --fit-model or --model");
    const Network& policy = net ? *net : *(net = load_model_file(c.model));
    const Predicate pred = load_pred(c.predicate, VariableSchema::for_network(policy, ds.input_names));
    parts = split_dataset(ds, policy, pred, g.repair_size, g.test_size, c.seed);
  }

  // Everything is computed before the first file is written.
  if (!g.series.empty()) write_text_file_atomic(g.series, write_series_csv(ts));
  write_text_file_atomic(c.output, write_csv(ds));
  if (!g.fit_model.empty()) save_model_file(*net, g.fit_model);
  if (parts && !g.repair_out.empty()) write_text_file_atomic(g.repair_out, write_csv(parts->repair));
  if (parts && !g.test_out.empty()) write_text_file_atomic(g.test_out, write_csv(parts->test));
  out << "steps=" << ts.steps() << " samples=" << ds.size() << '\n';
  return kExitOk;
}

void add_data_opts(CLI::App* app, Common& c) {
  app->add_option("--inputs", c.inputs, "Comma-separated input column names (default: all but targets and xr)");
  app->add_option("--targets", c.targets, "Comma-separated target column names (default: last column)");
}

void add_solver_opts(CLI::App* app, Common& c) {
  app->add_option("--time-limit", c.time_limit, "Solver wall-clock limit in seconds per solve (default: none)");
  app->add_option("--node-limit", c.node_limit, "Branch-and-bound node limit per solve");
  app->add_option("--gap", c.gap, "Relative optimality gap at which the search stops")->capture_default_str();
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("--threads", c.threads, "Branch-and-bound worker threads")->capture_default_str();
}

void add_repair_opts(CLI::App* app, Common& c) {
  app->add_option("--layer", c.layer, "1-based layer to repair (default: the layer feeding the last hidden layer)");
  app->add_option("--delta-max", c.delta_max, "Largest change of any repaired parameter")->capture_default_str();
  app->add_option("--nodes", c.nodes, "Comma-separated rows of the repaired layer allowed to change (default: all)");
  app->add_option("--l1-weight", c.l1_weight, "Weight of the l1 parameter-change term")->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layer-wise repair and verification of ReLU policy networks"};
  app.footer(kSchemas);
  app.require_subcommand(1);
  Common c;
  GenArgs g;
  std::string repaired;
  std::string log_path;

  auto* repair = app.add_subcommand("repair", "Repair one layer so the predicate holds on the dataset's xr samples");
  repair->add_option("--model", c.model, "Model to repair");
  repair->add_option("--data", c.data, "Repair set CSV");
  repair->add_option("--test", c.test, "Test set CSV for MAE/IB (default: the repair set)");
  repair->add_option("--predicate", c.predicate, "Predicate file or built-in");
  repair->add_option("--output", c.output, "Where to write the repaired model");
  repair->add_option("--report", c.report, "Where to write the JSON report");
  repair->add_option("--eps", c.eps, "Radius for adversarial accuracy; repeatable");
  repair->add_flag("--timings", c.timings, "Include wall-clock timings in the report");
  add_repair_opts(repair, c);
  add_solver_opts(repair, c);
  add_data_opts(repair, c);

  auto* ver = app.add_subcommand("verify", "Search a box region for predicate violations");
  ver->add_option("--model", c.model, "Model to verify");
  ver->add_option("--predicate", c.predicate, "Predicate file or built-in");
  ver->add_option("--region", c.region, "Input box, lo:hi per component");
  ver->add_option("--data", c.data, "Optional CSV whose input column names are used in the predicate and output");
  ver->add_option("--max-cex", c.max_cex, "Counterexamples to collect (default 1)");
  ver->add_option("--exclusion-radius", c.exclusion_radius, "Box half-width excluded around each counterexample (default 1e-3)");
  ver->add_option("--output", c.output, "Counterexample CSV, written when violations are found");
  ver->add_option("--report", c.report, "Where to write the JSON verdict");
  add_solver_opts(ver, c);
  add_data_opts(ver, c);

  auto* loop = app.add_subcommand("loop", "Alternate repair and verification until the region is certified");
  loop->add_option("--model", c.model, "Model to repair");
  loop->add_option("--data", c.data, "Initial repair samples (optional)");
  loop->add_option("--predicate", c.predicate, "Predicate file or built-in");
  loop->add_option("--region", c.region, "Input box, lo:hi per component");
  loop->add_option("--max-iters", c.max_iters, "Verifier calls before giving up")->capture_default_str();
  loop->add_option("--max-cex", c.max_cex, "Counterexamples per iteration (default 20)");
  loop->add_option("--exclusion-radius", c.exclusion_radius, "Default: half the region's largest half-width");
  loop->add_option("--output", c.output, "Where to write the final model");
  loop->add_option("--log", log_path, "Where to write the iteration log");
  loop->add_option("--report", c.report, "Where to write the JSON report");
  loop->add_flag("--timings", c.timings, "Include wall-clock timings in the report");
  add_repair_opts(loop, c);
  add_solver_opts(loop, c);
  add_data_opts(loop, c);

  auto* eval = app.add_subcommand("eval", "Compare an original and a repaired model");
  eval->add_option("--model", c.model, "Original model");
  eval->add_option("--repaired", repaired, "Repaired model");
  eval->add_option("--data", c.data, "Repair set CSV for RE and ACC (default: the test set)");
  eval->add_option("--test", c.test, "Test set CSV");
  eval->add_option("--predicate", c.predicate, "Predicate file or built-in");
  eval->add_option("--eps", c.eps, "Radius for adversarial accuracy; repeatable");
  eval->add_option("--output", c.output, "Per-sample CSV: index, y_orig_k, y_repaired_k, sat_orig, sat_repaired");
  eval->add_option("--report", c.report, "Where to write the JSON metrics");
  add_solver_opts(eval, c);
  add_data_opts(eval, c);

  auto* gen = app.add_subcommand("gen", "Generate a synthetic gait series and its windowed dataset");
  gen->add_option("--output", c.output, "Windowed dataset CSV");
  gen->add_option("--series", g.series, "Raw series CSV");
  gen->add_option("--steps", g.steps, "Series length")->capture_default_str();
  gen->add_option("--noise", g.noise, "Noise standard deviation")->capture_default_str();
  gen->add_option("--dt", g.dt, "Window length")->capture_default_str();
  gen->add_flag("--sensor-history", g.sensor_history, "Give sensors dt steps of history too");
  gen->add_option("--fit-model", g.fit_model, "Train a policy on the windowed data and write it here");
  gen->add_option("--hidden", g.hidden, "Hidden layer widths for --fit-model")->capture_default_str();
  gen->add_option("--epochs", g.epochs, "Training epochs for --fit-model")->capture_default_str();
  gen->add_option("--model", c.model, "Policy used to split when --fit-model is not given");
  gen->add_option("--predicate", c.predicate, "Predicate used to split");
  gen->add_option("--repair-out", g.repair_out, "Repair set CSV (violating + satisfying samples)");
  gen->add_option("--test-out", g.test_out, "Test set CSV");
  gen->add_option("--repair-size", g.repair_size, "Repair set size")->capture_default_str();
  gen->add_option("--test-size", g.test_size, "Test set size")->capture_default_str();
  gen->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  gen->add_option("--threads", c.threads, "Accepted for symmetry; generation is single-threaded");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitError;
  }

  try {
    if (*repair) return cmd_repair(c, out);
    if (*ver) return cmd_verify(c, out);
    if (*loop) return cmd_loop(c, log_path, out);
    if (*eval) return cmd_eval(c, repaired, out);
    if (*gen) return cmd_gen(c, g, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace nnrep::cli

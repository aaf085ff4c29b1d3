#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../support/instances.hpp"
#include "nnrep/error.hpp"
#include "nnrep/repair.hpp"
#include "nnrep/report.hpp"

using namespace nnrep;
using nnrep::testing::Rng;

namespace {

Dataset dataset_from(const Network& net, const std::vector<Vector>& xs) {
  Dataset ds;
  for (std::size_t i = 0; i < net.input_dim(); ++i) ds.input_names.push_back("x" + std::to_string(i));
  ds.target_names = {"y"};
  for (const auto& x : xs) {
    ds.inputs.push_back(x);
    ds.targets.push_back(net.forward(x));
    ds.in_region.push_back(true);
  }
  return ds;
}

Network identity() {
  return Network(1, {LayerParams{Matrix::Ones(1, 1), Vector::Zero(1)},
                     LayerParams{Matrix::Ones(1, 1), Vector::Zero(1)}});
}

}  // namespace

TEST_CASE("default layer is the one feeding the last hidden layer") {
  Rng rng(1);
  CHECK(resolve_layer(testing::random_network(rng, {2, 4, 4, 1}), 0) == 2);
  CHECK(resolve_layer(testing::random_network(rng, {2, 4, 1}), 0) == 1);
  CHECK(resolve_layer(testing::random_network(rng, {2, 1}), 0) == 1);
  CHECK(resolve_layer(testing::random_network(rng, {2, 4, 4, 1}), 3) == 3);
  CHECK_THROWS_AS((void)resolve_layer(testing::random_network(rng, {2, 4, 1}), 3), PreconditionError);
}

TEST_CASE("network that already satisfies the predicate is left in place") {
  Rng rng(2);
  const Network net = testing::random_network(rng, {2, 6, 6, 1});
  std::vector<Vector> xs;
  for (int i = 0; i < 20; ++i) xs.push_back(testing::uniform_point(rng, 2, -1, 1));
  const Dataset ds = dataset_from(net, xs);
  const RepairOutcome r = repair_layer(net, ds, build_global_bound(-100, 100));
  REQUIRE(r.report.feasible());
  CHECK(r.report.delta <= 1e-6);
  CHECK(r.report.metrics.re == 100.0);
  CHECK(r.report.metrics.violating_before == 0);
}

TEST_CASE("seeded bound instance is repaired on every sample") {
  const auto inst = testing::global_bound_instance(3);
  std::size_t violating = 0;
  for (const auto& x : inst.data.inputs) violating += eval_predicate(inst.pred, x, inst.net.forward(x), 0.0) ? 0 : 1;
  CHECK(violating == 12);
  RepairOptions o;
  o.solve.time_limit_s = 10;
  const RepairOutcome r = repair_layer(inst.net, inst.data, inst.pred, o);
  REQUIRE(r.report.feasible());
  CHECK(r.report.metrics.re == 100.0);
  for (const auto& x : inst.data.inputs) CHECK(eval_predicate(inst.pred, x, r.net.forward(x), 1e-6));
  CHECK(r.report.delta <= o.delta_max + 1e-9);
  // Only the repaired layer changed.
  for (std::size_t l = 1; l <= inst.net.num_layers(); ++l) {
    if (l == r.report.layer) continue;
    CHECK(r.net.layer(l).weights == inst.net.layer(l).weights);
    CHECK(r.net.layer(l).bias == inst.net.layer(l).bias);
  }
}

TEST_CASE("node subsets restrict which rows change") {
  const auto inst = testing::global_bound_instance(4, 30, 4);
  RepairOptions o;
  o.layer = 3;
  o.nodes = std::vector<std::size_t>{0};
  const RepairOutcome r = repair_layer(inst.net, inst.data, inst.pred, o);
  REQUIRE(r.report.feasible());
  CHECK(r.report.metrics.re == 100.0);

  RepairOptions hidden;
  hidden.layer = 2;
  hidden.nodes = std::vector<std::size_t>{1, 5};
  hidden.solve.time_limit_s = 10;
  const RepairOutcome h = repair_layer(inst.net, inst.data, inst.pred, hidden);
  if (h.report.feasible()) {
    for (Eigen::Index row = 0; row < 8; ++row) {
      if (row == 1 || row == 5) continue;
      CHECK(h.net.layer(2).weights.row(row) == inst.net.layer(2).weights.row(row));
      CHECK(h.net.layer(2).bias(row) == inst.net.layer(2).bias(row));
    }
  }

  RepairOptions empty;
  empty.nodes = std::vector<std::size_t>{};
  CHECK_THROWS_AS((void)repair_layer(inst.net, inst.data, inst.pred, empty), PreconditionError);
}

TEST_CASE("zero radius on a violating network is reported infeasible") {
  const auto inst = testing::global_bound_instance(5, 20, 3);
  RepairOptions o;
  o.delta_max = 0.0;
  const RepairOutcome r = repair_layer(inst.net, inst.data, inst.pred, o);
  CHECK(r.report.status == SolveStatus::Infeasible);
  CHECK_FALSE(r.report.feasible());
  CHECK(r.net == inst.net);
}

TEST_CASE("metrics of an unchanged network") {
  Rng rng(6);
  const Network net = testing::random_network(rng, {2, 5, 1});
  std::vector<Vector> xs;
  for (int i = 0; i < 40; ++i) xs.push_back(testing::uniform_point(rng, 2, -1, 1));
  const Dataset ds = dataset_from(net, xs);
  const Predicate p = build_global_bound(-0.1, 0.1);
  const Metrics m = compute_metrics(net, net, ds, ds, p, {});
  CHECK(m.mae == 0.0);
  CHECK(m.ib == 0.0);
  CHECK(m.re == (m.violating_before == 0 ? 100.0 : 0.0));
  CHECK_THROWS_AS((void)compute_metrics(net, net, ds, Dataset{}, p, {}), PreconditionError);
}

TEST_CASE("metrics count fixed and broken samples") {
  const Network id = identity();
  const Network shifted = id.patch_layer(2, LayerParams{Matrix::Ones(1, 1), Vector::Constant(1, -1.0)});
  const Predicate p = build_global_bound(-0.5, 2.0);
  // Original outputs 0, 1, 2.5, 2.9: the last two violate, the shift fixes both.
  const Dataset repair = dataset_from(id, {Vector::Constant(1, 0.0), Vector::Constant(1, 1.0),
                                           Vector::Constant(1, 2.5), Vector::Constant(1, 2.9)});
  const Metrics m = compute_metrics(id, shifted, repair, repair, p, {0.0, 0.25});
  CHECK(m.violating_before == 2);
  CHECK(m.repaired == 2);
  CHECK(m.re == 100.0);
  // x = 0 goes to -1 after the shift: one of two satisfying samples broken.
  CHECK(m.test_satisfying_before == 2);
  CHECK(m.test_broken == 1);
  CHECK(m.ib == 50.0);
  CHECK(m.mae == 1.0);
  CHECK(m.acc.at(0.0) == 100.0);
  // The ball around 2.9 reaches 3.15, output 2.15.
  CHECK(m.acc.at(0.25) == 50.0);
  CHECK(repair_efficacy(id, shifted, repair, p) == 100.0);
}

TEST_CASE("loop on an already safe network verifies once") {
  const Network id = identity();
  std::ostringstream log;
  LoopOptions lo;
  lo.log = &log;
  const RepairOutcome r = repair_and_verify_loop(id, InputRegion{{{0, 1}}}, Dataset{}, build_global_bound(-1, 2), {}, lo);
  CHECK(r.report.verified_safe);
  CHECK_FALSE(r.report.unknown);
  CHECK(r.report.loop.size() == 1);
  CHECK(log.str() == "iter=1 cex=0 re=100 status=safe\n");
  CHECK(r.net == id);
}

TEST_CASE("loop with a budget of one and a persistent violation reports unknown") {
  const Network id = identity();
  LoopOptions lo;
  lo.max_iters = 1;
  const RepairOutcome r = repair_and_verify_loop(id, InputRegion{{{0, 5}}}, Dataset{}, build_global_bound(-1, 3), {}, lo);
  CHECK(r.report.unknown);
  CHECK_FALSE(r.report.verified_safe);
  REQUIRE(r.report.loop.size() == 1);
  CHECK(r.report.loop[0].status == "violated");
  lo.max_iters = 0;
  CHECK_THROWS_AS((void)repair_and_verify_loop(id, InputRegion{{{0, 5}}}, Dataset{}, build_global_bound(-1, 3), {}, lo),
                  PreconditionError);
}

TEST_CASE("sparse node selection preconditions") {
  const auto inst = testing::global_bound_instance(7, 20, 3);
  RepairOptions o;
  o.layer = 3;
  CHECK_THROWS_AS((void)select_sparse_nodes(inst.net, inst.data, inst.pred, o, 1), PreconditionError);
  o.l1_weight = 0.1;
  CHECK_THROWS_AS((void)select_sparse_nodes(inst.net, inst.data, inst.pred, o, 2), PreconditionError);
  const auto all = select_sparse_nodes(inst.net, inst.data, inst.pred, o, 1);
  CHECK(all == std::vector<std::size_t>{0});
}

TEST_CASE("report JSON omits timings unless asked") {
  RepairReport rep;
  rep.status = SolveStatus::Optimal;
  rep.layer = 2;
  rep.timings["total"] = 1.5;
  const std::string plain = repair_report_json(rep);
  CHECK(plain.find("timings") == std::string::npos);
  CHECK(plain.find("\"status\": \"Optimal\"") != std::string::npos);
  CHECK(repair_report_json(rep, true).find("timings") != std::string::npos);
  CHECK(format_loop_line({3, 4, 50.0, "Optimal"}) == "iter=3 cex=4 re=50 status=Optimal");
}

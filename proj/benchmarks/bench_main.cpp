#include <benchmark/benchmark.h>

#include "instances.hpp"
#include "nnrep/encoder.hpp"
#include "nnrep/intervals.hpp"
#include "nnrep/miqp.hpp"
#include "nnrep/verifier.hpp"

using namespace nnrep;
using nnrep::testing::Rng;

namespace {

Network gait_sized_net(std::uint64_t seed) {
  Rng rng(seed);
  return testing::random_network(rng, {14, 16, 16, 1});
}

void BM_Forward(benchmark::State& state) {
  const Network net = gait_sized_net(1);
  Rng rng(2);
  const Vector x = testing::uniform_point(rng, 14, -1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_Forward);

void BM_RepairBounds(benchmark::State& state) {
  const Network net = gait_sized_net(1);
  Rng rng(3);
  const Vector x = testing::uniform_point(rng, 14, -1, 1);
  const WeightBox box = weight_box(net.layer(2), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(repair_bounds(net, 2, box, x));
}
BENCHMARK(BM_RepairBounds);

// Root relaxation of a repair model with `state.range(0)` samples.
void BM_RootRelaxation(benchmark::State& state) {
  const auto inst = testing::global_bound_instance(4, static_cast<std::size_t>(state.range(0)), 3);
  std::vector<RepairSample> s;
  for (std::size_t i = 0; i < inst.data.size(); ++i) s.push_back({inst.data.inputs[i], inst.data.targets[i], true});
  const RepairProblem prob = make_repair_problem(inst.net, 2, s, inst.pred, 1.0);
  const MiqpModel m = encode_repair(prob);
  RelaxationSolver rs(m, QpSettings{});
  const Fixings root = rs.root_fixings();
  for (auto _ : state) benchmark::DoNotOptimize(rs.solve(root));
  state.counters["binaries"] = static_cast<double>(m.num_binaries());
}
BENCHMARK(BM_RootRelaxation)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_SmallRepairSolve(benchmark::State& state) {
  const auto inst = testing::global_bound_instance(6, 12, 3);
  std::vector<RepairSample> s;
  for (std::size_t i = 0; i < inst.data.size(); ++i) s.push_back({inst.data.inputs[i], inst.data.targets[i], true});
  const RepairProblem prob = make_repair_problem(inst.net, 2, s, inst.pred, 1.0);
  const MiqpModel m = encode_repair(prob);
  SolveParams p;
  p.node_limit = 50;
  for (auto _ : state) benchmark::DoNotOptimize(solve(m, p));
}
BENCHMARK(BM_SmallRepairSolve)->Unit(benchmark::kMillisecond);

void BM_Verify(benchmark::State& state) {
  const auto inst = testing::verify_instance(3);
  const Predicate pred = build_global_bound(-1e3, inst.threshold);
  const InputRegion region{{{-1, 1}, {-1, 1}}};
  for (auto _ : state) benchmark::DoNotOptimize(verify(inst.net, region, pred));
}
BENCHMARK(BM_Verify)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

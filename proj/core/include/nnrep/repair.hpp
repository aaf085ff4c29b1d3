#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nnrep/data.hpp"
#include "nnrep/encoder.hpp"
#include "nnrep/miqp.hpp"
#include "nnrep/network.hpp"
#include "nnrep/predicate.hpp"
#include "nnrep/verifier.hpp"

namespace nnrep {

struct RepairOptions {
  // 1-based layer index; 0 selects the default, the layer feeding the last
  // hidden layer (layer L), or layer 1 for networks without hidden layers.
  std::size_t layer = 0;
  double delta_max = 1.0;
  SolveParams solve;
  // Rows of the repaired layer allowed to change; unset means all. An empty
  // set is rejected.
  std::optional<std::vector<std::size_t>> nodes;
  double l1_weight = 0.0;
  double delta_weight = 1.0;
  // Tolerance used when checking the predicate on the repaired network.
  double predicate_tol = kDefaultPredicateTol;
  // Atoms are tightened by this much inside the model so that solver
  // round-off cannot push replayed outputs across the boundary.
  double predicate_margin = 1e-5;
  // Seed the solver with the original activation pattern.
  bool use_hint = true;
};

std::size_t resolve_layer(const Network& net, std::size_t layer);

struct Metrics {
  double mae = 0.0;
  // Percentages.
  double re = 100.0;
  double ib = 0.0;
  // eps -> percentage of adversarial samples verified robust.
  std::map<double, double> acc;
  std::size_t violating_before = 0;
  std::size_t repaired = 0;
  std::size_t test_satisfying_before = 0;
  std::size_t test_broken = 0;
};

// MAE over the test set, RE over the repair set's constrained samples that
// `orig` violates, IB over the test samples `orig` satisfies, and ACC_eps over
// the adversarial samples (those originally violating; all constrained repair
// samples when none violate).
Metrics compute_metrics(const Network& orig, const Network& repaired, const Dataset& repair_set,
                        const Dataset& test_set, const Predicate& pred, const std::vector<double>& eps_list,
                        double tol = kDefaultPredicateTol, const VerifyOptions& verify_opts = {});

// Percentage of `ds`'s constrained samples violated by `orig` that `repaired`
// satisfies; 100 when `orig` violates none.
double repair_efficacy(const Network& orig, const Network& repaired, const Dataset& ds, const Predicate& pred,
                       double tol = kDefaultPredicateTol);

struct LoopIteration {
  std::size_t iter = 0;
  std::size_t counterexamples = 0;
  double re = 100.0;
  std::string status;
};

std::string format_loop_line(const LoopIteration& it);

struct RepairReport {
  SolveStatus status = SolveStatus::LimitNoSolution;
  std::size_t layer = 0;
  double objective = 0.0;
  double delta = 0.0;
  std::int64_t nodes = 0;
  Metrics metrics;
  std::map<std::string, double> timings;
  std::vector<LoopIteration> loop;
  // Set by the loop when it stops without a Safe verdict.
  bool unknown = false;
  bool verified_safe = false;
  std::string diagnostic;

  bool feasible() const { return status == SolveStatus::Optimal || status == SolveStatus::FeasibleLimit; }
};

struct RepairOutcome {
  Network net;
  RepairReport report;
};

// Repairs one layer so that every constrained sample of `ds` satisfies `pred`.
// On infeasibility or a limit without incumbent the input network is returned
// unchanged together with the status.
RepairOutcome repair_layer(const Network& net, const Dataset& ds, const Predicate& pred,
                           const RepairOptions& opts = {});

struct LoopOptions {
  std::size_t max_iters = 5;
  // Counterexamples requested from the verifier per iteration.
  std::size_t cex_per_iter = 20;
  // Exclusion radius around counterexamples; 0 means eps/2 with eps the
  // largest half-width of the region.
  double exclusion_radius = 0.0;
  VerifyOptions verify;
  std::ostream* log = nullptr;
};

// Alternates repair and verification until the verifier proves the region
// Safe. Counterexamples are added to the repair set as constrained samples
// whose target is the input network's output there.
RepairOutcome repair_and_verify_loop(const Network& net, const InputRegion& region, const Dataset& seed_samples,
                                     const Predicate& pred, const RepairOptions& opts,
                                     const LoopOptions& loop = {});

// Runs a full-layer repair with an l1 deviation term and ranks the rows of the
// repaired layer by the l1 change of their parameters. Returns the top k.
std::vector<std::size_t> select_sparse_nodes(const Network& net, const Dataset& ds, const Predicate& pred,
                                             const RepairOptions& opts, std::size_t k);

}  // namespace nnrep

#pragma once

#include <cstddef>
#include <vector>

#include "nnrep/intervals.hpp"
#include "nnrep/miqp_model.hpp"
#include "nnrep/network.hpp"
#include "nnrep/predicate.hpp"

namespace nnrep {

struct RepairSample {
  Vector x0;
  Vector target;
  // Predicate rows are only emitted for constrained samples; the others only
  // contribute to the loss.
  bool constrained = true;
};

struct EncodeOptions {
  double delta_weight = 1.0;
  // Weight of sum |theta - theta_init| over the repaired parameters.
  double l1_weight = 0.0;
  // Rows of the repaired layer whose parameters may change. Empty means all.
  std::vector<std::size_t> nodes;
  // Predicate atoms are tightened by this amount.
  double predicate_margin = 0.0;
  // Replace ReLUs whose sign is fixed by the bounds with constants/identities.
  bool eliminate_fixed = true;
  double bigm_widen = 1e-6;
};

struct RepairProblem {
  Network net;
  std::size_t layer = 1;
  std::vector<RepairSample> samples;
  Predicate pred;
  double delta_max = 0.0;
  EncodeOptions options;
  // One map per sample covering layers `layer` .. L+1.
  std::vector<BoundsMap> bounds;

  bool row_repairable(std::size_t row) const;
};

// Fills in bounds by interval propagation and checks the invariants.
RepairProblem make_repair_problem(Network net, std::size_t layer, std::vector<RepairSample> samples,
                                  Predicate pred, double delta_max, EncodeOptions options = {});

MiqpModel encode_repair(const RepairProblem& prob);

struct DecodedRepair {
  LayerParams params;
  double delta = 0.0;
  // Loss + delta_weight * delta + l1 term, recomputed through the patched
  // network.
  double objective = 0.0;
};

DecodedRepair decode_solution(const RepairProblem& prob, const MiqpModel& model,
                              const std::vector<double>& assignment);

// Objective of `params` evaluated directly on the network, without the model.
double repair_objective(const RepairProblem& prob, const LayerParams& params);

// A full model assignment that realizes `params` (node, binary and output
// variables taken from the true forward pass). Predicate selector binaries
// pick the first satisfied disjunct.
std::vector<double> assignment_from_params(const RepairProblem& prob, const MiqpModel& model,
                                           const LayerParams& params);

}  // namespace nnrep

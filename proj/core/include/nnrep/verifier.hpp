#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nnrep/intervals.hpp"
#include "nnrep/miqp.hpp"
#include "nnrep/network.hpp"
#include "nnrep/predicate.hpp"

namespace nnrep {

struct InputRegion {
  std::vector<Interval> box;

  static InputRegion around(const Vector& center, double eps);
  std::size_t dim() const { return box.size(); }
  bool contains(const Vector& x) const;
  void validate() const;
};

enum class VerdictKind { Safe, Violated, Unknown };

std::string to_string(VerdictKind k);

struct Verdict {
  VerdictKind kind = VerdictKind::Unknown;
  // Inputs inside the region whose exact forward pass violates the predicate.
  std::vector<Vector> counterexamples;
  std::int64_t nodes = 0;
  std::string diagnostic;
};

struct VerifyOptions {
  SolveParams params;
  std::size_t max_cex = 1;
  // Half-width of the box excluded around each counterexample before
  // searching for the next one.
  double exclusion_radius = 1e-3;
  double gamma = kDefaultGamma;
};

// Searches the region for an input violating `pred` by at least gamma.
// Safe is only reported when that search is proven empty.
Verdict verify(const Network& net, const InputRegion& region, const Predicate& pred,
               const VerifyOptions& opts = {});

// Feasibility model of "input in region, outside every excluded box, and the
// output violates pred by at least gamma". Exposed for inspection and tests.
MiqpModel encode_violation(const Network& net, const InputRegion& region, const Predicate& pred, double gamma,
                           const std::vector<Vector>& excluded = {}, double exclusion_radius = 0.0);

// Fraction of samples whose l-infinity ball of radius eps is verified Safe.
double adv_accuracy(const Network& net, const std::vector<Vector>& samples, const Predicate& pred, double eps,
                    const VerifyOptions& opts = {});

}  // namespace nnrep

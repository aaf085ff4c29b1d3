#pragma once

#include <cstddef>
#include <vector>

#include "nnrep/network.hpp"

namespace nnrep {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
  Interval relu() const;
  Interval widened(double margin) const { return {lo - margin, hi + margin}; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Entrywise l-infinity box around a layer's parameters.
struct WeightBox {
  Matrix weight_lo;
  Matrix weight_hi;
  Vector bias_lo;
  Vector bias_hi;
};

// Pre- and post-activation bounds for one layer of one sample. For the output
// layer `post` equals `pre` (no activation).
struct LayerBounds {
  std::vector<Interval> pre;
  std::vector<Interval> post;
};

// Bounds for consecutive layers first_layer, first_layer+1, ..., L+1
// (1-based layer numbering, as in Network).
struct BoundsMap {
  std::size_t first_layer = 1;
  std::vector<LayerBounds> layers;

  const LayerBounds& at(std::size_t l) const;
  std::size_t last_layer() const { return first_layer + layers.size() - 1; }
};

WeightBox weight_box(const LayerParams& init, double delta_max);

// Pre-activation bounds of the repaired layer given its concrete input vector
// and interval parameters.
std::vector<Interval> propagate_repair_layer(const WeightBox& box, const Vector& x_prev);

// Bounds for layers l+1 ... L+1 of a network with fixed weights, starting from
// pre-activation bounds of hidden layer l. With l == 0 the start intervals are
// taken as the network input and no ReLU is applied to them.
BoundsMap propagate_fixed_layers(const Network& net, const std::vector<Interval>& start, std::size_t l);

// Bounds for layers 1 ... L+1 over an input box.
BoundsMap propagate_input_box(const Network& net, const std::vector<Interval>& input_box);

// Bounds for layers l ... L+1 of one sample when layer l's parameters range
// over `box` and the earlier layers are fixed.
BoundsMap repair_bounds(const Network& net, std::size_t l, const WeightBox& box, const Vector& x0);

}  // namespace nnrep

#include "nnrep/intervals.hpp"

#include <algorithm>
#include <cmath>

#include "nnrep/error.hpp"

namespace nnrep {

Interval Interval::relu() const {
  return {std::max(0.0, lo), std::max(0.0, hi)};
}

const LayerBounds& BoundsMap::at(std::size_t l) const {
  if (l < first_layer || l > last_layer()) {
    throw PreconditionError("bounds requested for layer " + std::to_string(l) +
                            " outside covered range");
  }
  return layers[l - first_layer];
}

WeightBox weight_box(const LayerParams& init, double delta_max) {
  if (!std::isfinite(delta_max) || delta_max < 0.0) {
    throw PreconditionError("delta_max must be finite and non-negative");
  }
  WeightBox box;
  box.weight_lo = init.weights.array() - delta_max;
  box.weight_hi = init.weights.array() + delta_max;
  box.bias_lo = init.bias.array() - delta_max;
  box.bias_hi = init.bias.array() + delta_max;
  return box;
}

std::vector<Interval> propagate_repair_layer(const WeightBox& box, const Vector& x_prev) {
  if (box.weight_lo.cols() != x_prev.size()) {
    throw DimensionError("repair layer expects " + std::to_string(box.weight_lo.cols()) +
                         " inputs, got " + std::to_string(x_prev.size()));
  }
  const Eigen::Index rows = box.weight_lo.rows();
  std::vector<Interval> out(static_cast<std::size_t>(rows));
  for (Eigen::Index j = 0; j < rows; ++j) {
    double lo = 0.0;
    double hi = 0.0;
    for (Eigen::Index i = 0; i < x_prev.size(); ++i) {
      const double pos = std::max(0.0, x_prev(i));
      const double neg = std::min(0.0, x_prev(i));
      hi += box.weight_hi(j, i) * pos + box.weight_lo(j, i) * neg;
      lo += box.weight_lo(j, i) * pos + box.weight_hi(j, i) * neg;
    }
    out[static_cast<std::size_t>(j)] = {lo + box.bias_lo(j), hi + box.bias_hi(j)};
  }
  return out;
}

namespace {

std::vector<Interval> propagate_affine(const LayerParams& layer, const std::vector<Interval>& in) {
  std::vector<Interval> out(layer.out_dim());
  for (Eigen::Index j = 0; j < layer.weights.rows(); ++j) {
    double lo = 0.0;
    double hi = 0.0;
    for (Eigen::Index i = 0; i < layer.weights.cols(); ++i) {
      const double w = layer.weights(j, i);
      const Interval& x = in[static_cast<std::size_t>(i)];
      hi += x.hi * std::max(0.0, w) + x.lo * std::min(0.0, w);
      lo += x.lo * std::max(0.0, w) + x.hi * std::min(0.0, w);
    }
    out[static_cast<std::size_t>(j)] = {lo + layer.bias(j), hi + layer.bias(j)};
  }
  return out;
}

std::vector<Interval> relu_all(const std::vector<Interval>& pre) {
  std::vector<Interval> post(pre.size());
  std::transform(pre.begin(), pre.end(), post.begin(), [](const Interval& v) { return v.relu(); });
  return post;
}

}  // namespace

BoundsMap propagate_fixed_layers(const Network& net, const std::vector<Interval>& start, std::size_t l) {
  if (l >= net.num_layers()) {
    throw PreconditionError("no fixed layers follow layer " + std::to_string(l));
  }
  const std::size_t expected = (l == 0) ? net.input_dim() : net.layer(l).out_dim();
  if (start.size() != expected) {
    throw DimensionError("start bounds have " + std::to_string(start.size()) + " entries, expected " +
                         std::to_string(expected));
  }
  BoundsMap map;
  map.first_layer = l + 1;
  std::vector<Interval> x = (l == 0) ? start : relu_all(start);
  for (std::size_t k = l + 1; k <= net.num_layers(); ++k) {
    LayerBounds lb;
    lb.pre = propagate_affine(net.layer(k), x);
    lb.post = (k == net.num_layers()) ? lb.pre : relu_all(lb.pre);
    x = lb.post;
    map.layers.push_back(std::move(lb));
  }
  return map;
}

BoundsMap propagate_input_box(const Network& net, const std::vector<Interval>& input_box) {
  for (const auto& iv : input_box) {
    if (!(iv.lo <= iv.hi)) throw PreconditionError("input box has an empty interval");
  }
  return propagate_fixed_layers(net, input_box, 0);
}

BoundsMap repair_bounds(const Network& net, std::size_t l, const WeightBox& box, const Vector& x0) {
  const Activations act = net.forward_trace(x0);
  const Vector& x_prev = (l == 1) ? x0 : act.post[l - 2];
  LayerBounds first;
  first.pre = propagate_repair_layer(box, x_prev);
  first.post = (l == net.num_layers()) ? first.pre : relu_all(first.pre);

  BoundsMap map;
  map.first_layer = l;
  if (l < net.num_layers()) {
    BoundsMap rest = propagate_fixed_layers(net, first.pre, l);
    map.layers.push_back(std::move(first));
    for (auto& lb : rest.layers) map.layers.push_back(std::move(lb));
  } else {
    map.layers.push_back(std::move(first));
  }
  return map;
}

}  // namespace nnrep

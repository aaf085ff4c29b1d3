#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nnrep/data.hpp"
#include "nnrep/network.hpp"

namespace nnrep {

// Plain MSE regression with Adam, used to produce policies to repair.
struct TrainOptions {
  std::vector<std::size_t> hidden = {16, 16};
  std::size_t epochs = 150;
  std::size_t batch = 64;
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
};

// Inputs and targets are standardized during training; the scaling is folded
// back into the first and last layers, so the result maps raw inputs to raw
// targets.
Network fit_policy(const Dataset& ds, const TrainOptions& opts = {});

double mean_squared_error(const Network& net, const Dataset& ds);

}  // namespace nnrep

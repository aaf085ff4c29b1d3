#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace nnrep {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Affine map of one layer. Rows are output nodes, columns are input nodes.
struct LayerParams {
  Matrix weights;
  Vector bias;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

// Per-layer values recorded during a forward pass. pre[k] / post[k] belong to
// hidden layer k+1 (1-based layer numbering); output is the final affine map.
struct Activations {
  std::vector<Vector> pre;
  std::vector<Vector> post;
  Vector output;
};

// Dense feedforward network: every layer but the last is followed by a ReLU,
// the last layer is affine. Immutable once constructed.
//
// Layers are addressed 1-based throughout the public API: layer 1 maps the
// input to the first hidden layer, layer L+1 maps the last hidden layer to the
// output.
class Network {
 public:
  Network() = default;
  // Validates dimensions and finiteness; throws DimensionError / ParseError.
  Network(std::size_t input_dim, std::vector<LayerParams> layers);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_hidden() const { return layers_.empty() ? 0 : layers_.size() - 1; }
  const LayerParams& layer(std::size_t l) const;  // 1-based
  const std::vector<LayerParams>& layers() const { return layers_; }
  // Width of the node vector feeding layer l (input_dim for l == 1).
  std::size_t width_before(std::size_t l) const;

  Vector forward(const Vector& x0) const;
  Activations forward_trace(const Vector& x0) const;

  // Copy with layer l replaced. Throws on out-of-range index or shape change.
  Network patch_layer(std::size_t l, LayerParams replacement) const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  std::size_t input_dim_ = 0;
  std::vector<LayerParams> layers_;
};

// Row-major affine map z = W x + b with a fixed summation order; shared by
// every evaluation path so that results are reproducible bit for bit.
Vector affine(const LayerParams& layer, const Vector& x);

Network load_model(std::string_view text);
std::string save_model(const Network& net);

Network load_model_file(const std::string& path);
void save_model_file(const Network& net, const std::string& path);

}  // namespace nnrep

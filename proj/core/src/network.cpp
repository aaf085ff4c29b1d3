#include "nnrep/network.hpp"

#include <cmath>
#include <utility>

#include <json.hpp>

#include "nnrep/error.hpp"
#include "nnrep/io.hpp"

namespace nnrep {
namespace {

using json = nlohmann::ordered_json;

void validate_layer(const LayerParams& layer, std::size_t index, std::size_t expected_cols) {
  const std::string where = "layer " + std::to_string(index);
  if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
    throw DimensionError(where + ": empty weight matrix");
  }
  if (layer.in_dim() != expected_cols) {
    throw DimensionError(where + ": weight matrix has " + std::to_string(layer.in_dim()) +
                         " columns, expected " + std::to_string(expected_cols));
  }
  if (static_cast<std::size_t>(layer.bias.size()) != layer.out_dim()) {
    throw DimensionError(where + ": bias has " + std::to_string(layer.bias.size()) +
                         " entries, expected " + std::to_string(layer.out_dim()));
  }
  if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
    throw ParseError(where + ": non-finite parameter");
  }
}

double number_at(const json& value, const std::string& where) {
  if (!value.is_number()) throw ParseError(where + ": expected a number");
  const double v = value.get<double>();
  if (!std::isfinite(v)) throw ParseError(where + ": non-finite entry");
  return v;
}

}  // namespace

Network::Network(std::size_t input_dim, std::vector<LayerParams> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
  if (input_dim_ == 0) throw DimensionError("input_dim must be positive");
  if (layers_.empty()) throw DimensionError("network has no layers");
  std::size_t cols = input_dim_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    validate_layer(layers_[i], i + 1, cols);
    cols = layers_[i].out_dim();
  }
}

std::size_t Network::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

const LayerParams& Network::layer(std::size_t l) const {
  if (l < 1 || l > layers_.size()) {
    throw PreconditionError("layer index " + std::to_string(l) + " out of range [1, " +
                            std::to_string(layers_.size()) + "]");
  }
  return layers_[l - 1];
}

std::size_t Network::width_before(std::size_t l) const {
  return layer(l).in_dim();
}

Vector affine(const LayerParams& layer, const Vector& x) {
  const Eigen::Index rows = layer.weights.rows();
  const Eigen::Index cols = layer.weights.cols();
  Vector z(rows);
  for (Eigen::Index j = 0; j < rows; ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < cols; ++i) acc += layer.weights(j, i) * x(i);
    z(j) = acc + layer.bias(j);
  }
  return z;
}

Vector Network::forward(const Vector& x0) const {
  if (static_cast<std::size_t>(x0.size()) != input_dim_) {
    throw DimensionError("input has " + std::to_string(x0.size()) + " entries, expected " +
                         std::to_string(input_dim_));
  }
  Vector x = x0;
  for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
    x = affine(layers_[k], x).cwiseMax(0.0);
  }
  return affine(layers_.back(), x);
}

Activations Network::forward_trace(const Vector& x0) const {
  if (static_cast<std::size_t>(x0.size()) != input_dim_) {
    throw DimensionError("input has " + std::to_string(x0.size()) + " entries, expected " +
                         std::to_string(input_dim_));
  }
  Activations act;
  act.pre.reserve(num_hidden());
  act.post.reserve(num_hidden());
  Vector x = x0;
  for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
    act.pre.push_back(affine(layers_[k], x));
    x = act.pre.back().cwiseMax(0.0);
    act.post.push_back(x);
  }
  act.output = affine(layers_.back(), x);
  return act;
}

Network Network::patch_layer(std::size_t l, LayerParams replacement) const {
  const LayerParams& old = layer(l);
  if (replacement.weights.rows() != old.weights.rows() ||
      replacement.weights.cols() != old.weights.cols() ||
      replacement.bias.size() != old.bias.size()) {
    throw DimensionError("patch for layer " + std::to_string(l) + " changes its shape");
  }
  std::vector<LayerParams> layers = layers_;
  layers[l - 1] = std::move(replacement);
  return Network(input_dim_, std::move(layers));
}

bool operator==(const Network& a, const Network& b) {
  if (a.input_dim_ != b.input_dim_ || a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t k = 0; k < a.layers_.size(); ++k) {
    const auto& la = a.layers_[k];
    const auto& lb = b.layers_[k];
    if (la.weights.rows() != lb.weights.rows() || la.weights.cols() != lb.weights.cols()) return false;
    if (la.weights != lb.weights || la.bias != lb.bias) return false;
  }
  return true;
}

Network load_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model file: top level must be an object");
  if (!doc.contains("input_dim") || !doc["input_dim"].is_number_integer() ||
      doc["input_dim"].get<long long>() <= 0) {
    throw ParseError("model file: 'input_dim' must be a positive integer");
  }
  if (doc.contains("activation") &&
      (!doc["activation"].is_string() || doc["activation"].get<std::string>() != "relu")) {
    throw ParseError("model file: only activation \"relu\" is supported");
  }
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw ParseError("model file: 'layers' must be a non-empty array");
  }
  const auto input_dim = static_cast<std::size_t>(doc["input_dim"].get<long long>());

  std::vector<LayerParams> layers;
  std::size_t expected_cols = input_dim;
  std::size_t index = 0;
  for (const auto& jl : doc["layers"]) {
    ++index;
    const std::string where = "layer " + std::to_string(index);
    if (!jl.is_object() || !jl.contains("weights") || !jl.contains("bias")) {
      throw ParseError(where + ": expected object with 'weights' and 'bias'");
    }
    const auto& jw = jl["weights"];
    const auto& jb = jl["bias"];
    if (!jw.is_array() || jw.empty() || !jb.is_array()) {
      throw ParseError(where + ": 'weights' must be a non-empty matrix and 'bias' an array");
    }
    const auto rows = static_cast<Eigen::Index>(jw.size());
    if (!jw[0].is_array()) throw ParseError(where + ": weight rows must be arrays");
    const auto cols = static_cast<Eigen::Index>(jw[0].size());
    LayerParams layer{Matrix(rows, cols), Vector(static_cast<Eigen::Index>(jb.size()))};
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& row = jw[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
        throw DimensionError(where + ": ragged weight matrix at row " + std::to_string(r));
      }
      for (Eigen::Index c = 0; c < cols; ++c) {
        layer.weights(r, c) = number_at(row[static_cast<std::size_t>(c)], where);
      }
    }
    for (std::size_t j = 0; j < jb.size(); ++j) {
      layer.bias(static_cast<Eigen::Index>(j)) = number_at(jb[j], where);
    }
    validate_layer(layer, index, expected_cols);
    expected_cols = layer.out_dim();
    layers.push_back(std::move(layer));
  }
  return Network(input_dim, std::move(layers));
}

std::string save_model(const Network& net) {
  json doc;
  doc["input_dim"] = net.input_dim();
  doc["activation"] = "relu";
  json jlayers = json::array();
  for (const auto& layer : net.layers()) {
    json jw = json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) row.push_back(layer.weights(r, c));
      jw.push_back(std::move(row));
    }
    json jb = json::array();
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) jb.push_back(layer.bias(j));
    jlayers.push_back(json{{"weights", std::move(jw)}, {"bias", std::move(jb)}});
  }
  doc["layers"] = std::move(jlayers);
  return doc.dump(1) + "\n";
}

Network load_model_file(const std::string& path) {
  return load_model(read_text_file(path));
}

void save_model_file(const Network& net, const std::string& path) {
  write_text_file_atomic(path, save_model(net));
}

}  // namespace nnrep

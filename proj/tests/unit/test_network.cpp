#include <doctest.h>

#include "../support/instances.hpp"
#include "nnrep/error.hpp"
#include "nnrep/network.hpp"

using namespace nnrep;
using nnrep::testing::Rng;

namespace {

constexpr const char* kIdentity =
    R"({"input_dim": 1, "activation": "relu", "layers": [
         {"weights": [[1]], "bias": [0]}, {"weights": [[1]], "bias": [0]}]})";

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

}  // namespace

TEST_CASE("identity model loads with one hidden layer") {
  const Network net = load_model(kIdentity);
  CHECK(net.num_hidden() == 1);
  CHECK(net.input_dim() == 1);
  CHECK(net.output_dim() == 1);
}

TEST_CASE("wrong column count in the second layer is a dimension error naming the layer") {
  const char* bad = R"({"input_dim": 1, "layers": [
      {"weights": [[1]], "bias": [0]}, {"weights": [[1, 2]], "bias": [0]}]})";
  try {
    (void)load_model(bad);
    FAIL("expected an error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
  }
}

TEST_CASE("malformed model files are rejected") {
  CHECK_THROWS_AS((void)load_model(""), ParseError);
  CHECK_THROWS_AS((void)load_model(R"({"input_dim": 1})"), ParseError);
  CHECK_THROWS_AS((void)load_model(R"({"input_dim": 1, "layers": [{"weights": [["a"]], "bias": [0]}]})"),
                  ParseError);
  CHECK_THROWS_AS((void)load_model(R"({"input_dim": 2, "layers": [{"weights": [[1]], "bias": [0]}]})"),
                  DimensionError);
}

TEST_CASE("forward clips negative hidden values") {
  const Network net = load_model(kIdentity);
  CHECK(net.forward(vec({3}))(0) == 3.0);
  CHECK(net.forward(vec({-3}))(0) == 0.0);
  CHECK_THROWS_AS((void)net.forward(vec({1, 2})), DimensionError);
}

TEST_CASE("forward agrees with an independent evaluator") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = testing::random_network(rng, {2, 4, 4, 1});
    const Vector x = testing::uniform_point(rng, 2, -2, 2);
    const auto ref = testing::reference_forward(net, {x(0), x(1)});
    CHECK(net.forward(x)(0) == doctest::Approx(ref[0]).epsilon(1e-13));
  }
}

TEST_CASE("forward_trace records pre and post activations") {
  const Network id = load_model(kIdentity);
  const Activations a = id.forward_trace(vec({3}));
  CHECK(a.pre[0](0) == 3.0);
  CHECK(a.post[0](0) == 3.0);
  CHECK(a.output(0) == 3.0);

  const Network shifted = id.patch_layer(1, LayerParams{Matrix::Ones(1, 1), Vector::Constant(1, -5)});
  const Activations b = shifted.forward_trace(vec({1}));
  CHECK(b.pre[0](0) == -4.0);
  CHECK(b.post[0](0) == 0.0);

  Rng rng(3);
  const Network net = testing::random_network(rng, {3, 5, 4, 2});
  const Vector x = testing::uniform_point(rng, 3, -1, 1);
  CHECK(net.forward_trace(x).output == net.forward(x));
}

TEST_CASE("patch_layer replaces exactly one layer") {
  const Network id = load_model(kIdentity);
  const Network doubled = id.patch_layer(2, LayerParams{Matrix::Constant(1, 1, 2.0), Vector::Zero(1)});
  CHECK(doubled.forward(vec({3}))(0) == 6.0);
  CHECK(doubled.layer(1).weights == id.layer(1).weights);

  Rng rng(5);
  const Network net = testing::random_network(rng, {2, 6, 6, 1});
  const Network same = net.patch_layer(2, net.layer(2));
  CHECK(same == net);
  for (int i = 0; i < 100; ++i) {
    const Vector x = testing::uniform_point(rng, 2, -3, 3);
    CHECK(same.forward(x) == net.forward(x));
  }

  CHECK_THROWS_AS((void)net.patch_layer(0, net.layer(1)), PreconditionError);
  CHECK_THROWS_AS((void)net.patch_layer(4, net.layer(1)), PreconditionError);
  CHECK_THROWS_AS((void)net.patch_layer(2, net.layer(1)), DimensionError);
}

TEST_CASE("save and load round-trip bit for bit") {
  Rng rng(9);
  const Network net = testing::random_network(rng, {3, 7, 5, 2});
  LayerParams p = net.layer(2);
  p.weights(1, 2) += 0.1234567890123;
  const Network patched = net.patch_layer(2, p);
  CHECK(load_model(save_model(patched)) == patched);
  CHECK(save_model(load_model(save_model(patched))) == save_model(patched));
}

#include <doctest.h>

#include <cmath>

#include "../support/instances.hpp"
#include "nnrep/error.hpp"
#include "nnrep/verifier.hpp"

using namespace nnrep;
using nnrep::testing::Rng;

namespace {

Network identity() {
  return Network(1, {LayerParams{Matrix::Ones(1, 1), Vector::Zero(1)},
                     LayerParams{Matrix::Ones(1, 1), Vector::Zero(1)}});
}

// y = relu(x - 1) + relu(-x - 1) on one input: above 0.5 only for |x| > 1.5,
// so on [-2, 2] the violating set of y <= 0.5 is two separate boxes.
Network two_bumps() {
  LayerParams h{(Matrix(2, 1) << 1.0, -1.0).finished(), (Vector(2) << -1.0, -1.0).finished()};
  LayerParams o{(Matrix(1, 2) << 1.0, 1.0).finished(), Vector::Zero(1)};
  return Network(1, {h, o});
}

InputRegion interval(double lo, double hi) { return InputRegion{{{lo, hi}}}; }

}  // namespace

TEST_CASE("identity network is safe below a bound above its range") {
  const Verdict v = verify(identity(), interval(0, 5), build_global_bound(-100, 10));
  CHECK(v.kind == VerdictKind::Safe);
  CHECK(v.counterexamples.empty());
}

TEST_CASE("identity network violates y <= 3 on [0, 5]") {
  const Predicate p = build_global_bound(-100, 3);
  const Verdict v = verify(identity(), interval(0, 5), p);
  REQUIRE(v.kind == VerdictKind::Violated);
  REQUIRE(v.counterexamples.size() == 1);
  const double x = v.counterexamples[0](0);
  CHECK(x > 3.0);
  CHECK(x <= 5.0);
  CHECK_FALSE(eval_predicate(p, v.counterexamples[0], identity().forward(v.counterexamples[0]), 0.0));
}

TEST_CASE("safety that needs the solver, not only interval bounds") {
  // y = relu(x) - relu(x - 1) stays in [0, 1], but interval propagation over
  // [-2, 3] only gives [-2, 3].
  LayerParams h{(Matrix(2, 1) << 1.0, 1.0).finished(), (Vector(2) << 0.0, -1.0).finished()};
  LayerParams o{(Matrix(1, 2) << 1.0, -1.0).finished(), Vector::Zero(1)};
  const Network clamp(1, {h, o});
  const Verdict v = verify(clamp, interval(-2, 3), build_global_bound(-0.5, 1.5));
  CHECK(v.kind == VerdictKind::Safe);
  CHECK(v.diagnostic.find("interval") == std::string::npos);
}

TEST_CASE("exclusion cuts find both violating boxes") {
  const Network net = two_bumps();
  const Predicate p = build_global_bound(-100, 0.5);
  VerifyOptions o;
  o.max_cex = 2;
  o.exclusion_radius = 0.05;
  const Verdict v = verify(net, interval(-2, 2), p, o);
  REQUIRE(v.kind == VerdictKind::Violated);
  REQUIRE(v.counterexamples.size() == 2);
  const double a = v.counterexamples[0](0);
  const double b = v.counterexamples[1](0);
  CHECK(std::abs(a - b) > 2 * o.exclusion_radius);
  CHECK(((a > 1.5 && b < -1.5) || (a < -1.5 && b > 1.5)));
}

TEST_CASE("search stops when the cuts leave nothing") {
  const Network net = identity();
  VerifyOptions o;
  o.max_cex = 5;
  o.exclusion_radius = 1.0;
  // Violations only in (3, 3.5]; one excluded box of radius 1 covers them.
  const Verdict v = verify(net, interval(0, 3.5), build_global_bound(-100, 3), o);
  REQUIRE(v.kind == VerdictKind::Violated);
  CHECK(v.counterexamples.size() == 1);
}

TEST_CASE("counterexamples collected one after another are distinct and replay") {
  const Predicate p = build_global_bound(-100, 3);
  VerifyOptions o;
  o.max_cex = 3;
  const Verdict v = verify(identity(), interval(0, 5), p, o);
  REQUIRE(v.counterexamples.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK_FALSE(eval_predicate(p, v.counterexamples[i], identity().forward(v.counterexamples[i]), 0.0));
    for (std::size_t j = 0; j < i; ++j) {
      CHECK(std::abs(v.counterexamples[i](0) - v.counterexamples[j](0)) >= o.exclusion_radius - 1e-9);
    }
  }
}

TEST_CASE("violation model names its variables") {
  const MiqpModel m = encode_violation(two_bumps(), interval(-2, 2), build_global_bound(-100, 0.5), 1e-6);
  CHECK(m.find("t").has_value());
  CHECK(m.find("x0_0").has_value());
  CHECK(m.find("y_0").has_value());
  CHECK(m.num_binaries() >= 1);
}

TEST_CASE("adversarial accuracy") {
  const Network id = identity();
  const Predicate p = build_global_bound(-100, 3);
  std::vector<Vector> s{Vector::Constant(1, 1.0), Vector::Constant(1, 2.9)};
  CHECK(adv_accuracy(id, s, p, 0.5) == doctest::Approx(0.5));
  CHECK(adv_accuracy(id, s, p, 0.05) == doctest::Approx(1.0));

  // eps = 0 is the pointwise check.
  Rng rng(3);
  const Network net = testing::random_network(rng, {2, 5, 1});
  std::vector<Vector> pts;
  std::size_t pointwise = 0;
  const Predicate q = build_global_bound(-0.2, 0.2);
  for (int i = 0; i < 20; ++i) {
    pts.push_back(testing::uniform_point(rng, 2, -1, 1));
    pointwise += eval_predicate(q, pts.back(), net.forward(pts.back()), kDefaultPredicateTol) ? 1 : 0;
  }
  CHECK(adv_accuracy(net, pts, q, 0.0) == doctest::Approx(pointwise / 20.0));
  CHECK_THROWS_AS((void)adv_accuracy(net, pts, q, -1.0), PreconditionError);
}

TEST_CASE("region and option checks") {
  CHECK_THROWS_AS((void)verify(identity(), InputRegion{{{0, 1}, {0, 1}}}, build_global_bound(0, 1)),
                  DimensionError);
  CHECK_THROWS_AS((void)verify(identity(), interval(1, 0), build_global_bound(0, 1)), PreconditionError);
  VerifyOptions o;
  o.max_cex = 0;
  CHECK_THROWS_AS((void)verify(identity(), interval(0, 1), build_global_bound(0, 1), o), PreconditionError);
  CHECK(InputRegion::around(Vector::Constant(2, 1.0), 0.5).contains(Vector::Constant(2, 1.5)));
}

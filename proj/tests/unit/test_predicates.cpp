#include <doctest.h>

#include <cmath>

#include "../support/instances.hpp"
#include "nnrep/error.hpp"
#include "nnrep/predicate.hpp"

using namespace nnrep;
using nnrep::testing::Rng;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

Vector v2(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

VariableSchema gait_schema() {
  VariableSchema s;
  s.input_names = {"α_ul", "αa_tm1"};
  s.input_dim = 2;
  s.output_dim = 1;
  return s;
}

}  // namespace

TEST_CASE("bound file parses to one disjunct with two atoms") {
  const char* text = R"({"disjuncts": [[
      {"coeffs": {"y[0]": 1}, "offset": -14, "rel": ">="},
      {"coeffs": {"y[0]": 1}, "offset": 24, "rel": "<="}]]})";
  const Predicate p = parse_predicate(text, gait_schema());
  REQUIRE(p.disjuncts.size() == 1);
  CHECK(p.disjuncts[0].size() == 2);
  CHECK(eval_predicate(p, v2(0, 0), v1(0), 0.0));
  CHECK(eval_predicate(p, v2(0, 0), v1(24), 0.0));
  CHECK_FALSE(eval_predicate(p, v2(0, 0), v1(24.5), 0.0));
  CHECK(eval_predicate(p, v2(0, 0), v1(24.5), 0.6));
}

TEST_CASE("conditional avoidance file uses dataset column names") {
  const char* text = R"({"disjuncts": [
      [{"coeffs": {"α_ul": 1}, "offset": -2, "rel": "<="}],
      [{"coeffs": {"α_ul": 1}, "offset": -0.5, "rel": ">="}],
      [{"coeffs": {"y[0]": 1}, "offset": 1, "rel": "<="}],
      [{"coeffs": {"y[0]": 1}, "offset": 3, "rel": ">="}]]})";
  const Predicate p = parse_predicate(text, gait_schema());
  CHECK(p.disjuncts.size() == 4);
  CHECK_FALSE(eval_predicate(p, v2(-1, 0), v1(2), 0.0));
  CHECK(eval_predicate(p, v2(0, 0), v1(2), 0.0));
}

TEST_CASE("malformed predicate files are rejected") {
  const auto s = gait_schema();
  CHECK_THROWS_AS((void)parse_predicate("", s), ParseError);
  CHECK_THROWS_AS((void)parse_predicate(R"({"disjuncts": []})", s), ParseError);
  CHECK_THROWS_AS((void)parse_predicate(R"({"disjuncts": [[]]})", s), ParseError);
  CHECK_THROWS_AS(
      (void)parse_predicate(R"({"disjuncts": [[{"coeffs": {"speed": 1}, "offset": 0, "rel": "<="}]]})", s),
      ParseError);
  CHECK_THROWS_AS(
      (void)parse_predicate(R"({"disjuncts": [[{"coeffs": {"y[0]": 1}, "offset": 0, "rel": "<"}]]})", s),
      ParseError);
  CHECK_THROWS_AS(
      (void)parse_predicate(R"({"disjuncts": [[{"coeffs": {"y[1]": 1}, "offset": 0, "rel": "<="}]]})", s),
      ParseError);
}

TEST_CASE("save and parse round-trip") {
  const Predicate p = build_conditional_avoid(0, {-2, -0.5}, {1, 3});
  const auto s = gait_schema();
  const Predicate q = parse_predicate(save_predicate(p, s), s);
  REQUIRE(q.disjuncts.size() == p.disjuncts.size());
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const Vector x = testing::uniform_point(rng, 2, -3, 3);
    const Vector y = testing::uniform_point(rng, 1, -1, 5);
    CHECK(eval_predicate(p, x, y, 0.0) == eval_predicate(q, x, y, 0.0));
  }
}

TEST_CASE("global bound builder") {
  const Predicate p = build_global_bound(-14, 24);
  REQUIRE(p.disjuncts.size() == 1);
  CHECK(p.disjuncts[0].size() == 2);
  const Predicate point = build_global_bound(10, 10);
  CHECK(eval_predicate(point, v1(0), v1(10), 0.0));
  CHECK_FALSE(eval_predicate(point, v1(0), v1(10.001), 0.0));
  CHECK_THROWS_AS((void)build_global_bound(3, -3), PreconditionError);
}

TEST_CASE("rate bound builder uses the offset as the allowed step") {
  for (double delta : {1.5, 2.0}) {
    const Predicate p = build_rate_bound(delta, 1);
    REQUIRE(p.disjuncts.size() == 1);
    REQUIRE(p.disjuncts[0].size() == 2);
    for (const auto& a : p.disjuncts[0]) CHECK(a.rhs == delta);
    CHECK(eval_predicate(p, v2(0, 5), v1(5 + delta), 0.0));
    CHECK(eval_predicate(p, v2(0, 5), v1(5 - delta), 0.0));
    CHECK_FALSE(eval_predicate(p, v2(0, 5), v1(5 + delta + 1e-3), 0.0));
  }
  CHECK_THROWS_AS((void)build_rate_bound(0.0, 0), PreconditionError);
}

TEST_CASE("conditional avoidance builder") {
  const Predicate p = build_conditional_avoid(0, {-2, -0.5}, {1, 3});
  CHECK(p.disjuncts.size() == 4);
  CHECK(eval_predicate(p, v2(-3, 0), v1(2), 0.0));
  CHECK(eval_predicate(p, v2(-1, 0), v1(0.5), 0.0));
  CHECK_FALSE(eval_predicate(p, v2(-1, 0), v1(2), 0.0));
  CHECK_THROWS_AS((void)build_conditional_avoid(0, {1, 1}, {1, 3}), PreconditionError);
}

TEST_CASE("negation is the complement away from the boundary") {
  const double gamma = 1e-3;
  const std::vector<Predicate> preds{build_global_bound(-1, 1), build_rate_bound(0.5, 1),
                                     build_conditional_avoid(0, {-2, -0.5}, {1, 3})};
  Rng rng(8);
  for (const auto& p : preds) {
    const NegatedPredicate neg = negate(p, gamma);
    int checked = 0;
    for (int i = 0; i < 5000; ++i) {
      const Vector x = testing::uniform_point(rng, 2, -3, 3);
      const Vector y = testing::uniform_point(rng, 1, -3, 4);
      // Skip points within gamma of any atom boundary.
      bool near = false;
      for (const auto& conj : p.disjuncts) {
        for (const auto& a : conj) near = near || std::abs(a.slack(x, y)) <= gamma;
      }
      if (near) continue;
      ++checked;
      CHECK(eval_predicate(p, x, y, 0.0) != holds(neg, x, y));
    }
    CHECK(checked > 4000);
  }
  CHECK_THROWS_AS((void)negate(preds[0], 0.0), PreconditionError);
}

TEST_CASE("predicate margin is positive exactly when the predicate holds strictly") {
  const Predicate p = build_global_bound(-1, 1);
  CHECK(predicate_margin(p, v1(0), v1(0.25)) == doctest::Approx(0.75));
  CHECK(predicate_margin(p, v1(0), v1(1.5)) == doctest::Approx(-0.5));
}

#include <doctest.h>

#include <cmath>

#include "../support/instances.hpp"
#include "nnrep/data.hpp"
#include "nnrep/error.hpp"

using namespace nnrep;
using nnrep::testing::Rng;

namespace {

TimeSeries series(const std::vector<double>& control, double sensor) {
  TimeSeries ts;
  ts.channels = {"s", "c"};
  for (std::size_t i = 0; i < control.size(); ++i) {
    ts.time.push_back(static_cast<double>(i));
    ts.rows.push_back({sensor + static_cast<double>(i), control[i]});
  }
  return ts;
}

}  // namespace

TEST_CASE("three-row CSV gives three samples") {
  const Dataset ds = load_csv("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  CHECK(ds.size() == 3);
  CHECK(ds.input_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.target_names == std::vector<std::string>{"y"});
  CHECK(ds.inputs[2](1) == 8.0);
  CHECK(ds.in_region == std::vector<bool>{true, true, true});
}

TEST_CASE("explicit schema, region flag and errors") {
  const Dataset ds = load_csv("y,a,xr,b\n3,1,0,2\n", CsvSchema{{"b", "a"}, {"y"}});
  CHECK(ds.inputs[0](0) == 2.0);
  CHECK(ds.inputs[0](1) == 1.0);
  CHECK_FALSE(ds.in_region[0]);
  CHECK_THROWS_AS((void)load_csv("a,b\n1,2\n", CsvSchema{{"a"}, {"y"}}), ParseError);
  try {
    (void)load_csv("a,y\n1,2\n3,oops\n");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'y'") != std::string::npos);
  }
  CHECK_THROWS_AS((void)load_csv("a,y,xr\n1,2,0.5\n"), ParseError);
  CHECK_THROWS_AS((void)load_csv(""), ParseError);
}

TEST_CASE("CSV round-trip is exact") {
  Rng rng(3);
  Dataset ds;
  ds.input_names = {"α_ul", "b"};
  ds.target_names = {"y"};
  for (int i = 0; i < 50; ++i) {
    ds.inputs.push_back(testing::uniform_point(rng, 2, -1e3, 1e3));
    ds.targets.push_back(testing::uniform_point(rng, 1, -1e-7, 1e-7));
    ds.in_region.push_back(i % 3 != 0);
  }
  const std::string text = write_csv(ds);
  const Dataset back = load_csv(text);
  CHECK(back.input_names == ds.input_names);
  CHECK(back.inputs == ds.inputs);
  CHECK(back.targets == ds.targets);
  CHECK(back.in_region == ds.in_region);
  CHECK(write_csv(back) == text);
}

TEST_CASE("series CSV round-trip") {
  const TimeSeries ts = gen_synthetic({.seed = 2, .n_steps = 100});
  const TimeSeries back = load_series_csv(write_series_csv(ts));
  CHECK(back.channels == ts.channels);
  CHECK(back.rows == ts.rows);
  CHECK(back.time == ts.time);
  CHECK_THROWS_AS((void)load_series_csv("x,a\n1,2\n"), ParseError);
}

TEST_CASE("constant series gives constant windows") {
  const TimeSeries ts = series(std::vector<double>(30, 4.0), 0.0);
  TimeSeries flat = ts;
  for (auto& r : flat.rows) r[0] = 4.0;
  WindowOptions o;
  o.control = "c";
  const Dataset ds = sliding_window(flat, o);
  CHECK(ds.size() == 20);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK((ds.inputs[i].array() == 4.0).all());
    CHECK(ds.targets[i](0) == 4.0);
  }
}

TEST_CASE("ramp series places the previous controls first") {
  const TimeSeries ts = series({0, 1, 2, 3, 4, 5}, 100.0);
  WindowOptions o;
  o.dt = 2;
  o.control = "c";
  const Dataset ds = sliding_window(ts, o);
  REQUIRE(ds.size() == 4);
  // First sample is t = 2.
  CHECK(ds.input_names == std::vector<std::string>{"αa_tm1", "αa_tm2", "s"});
  CHECK(ds.inputs[0](0) == 1.0);
  CHECK(ds.inputs[0](1) == 0.0);
  CHECK(ds.inputs[0](2) == 102.0);
  CHECK(ds.targets[0](0) == 2.0);

  o.sensor_history = true;
  const Dataset hist = sliding_window(ts, o);
  CHECK(hist.input_dim() == 4);
  CHECK(hist.inputs[0](2) == 102.0);
  CHECK(hist.inputs[0](3) == 101.0);

  o.dt = 6;
  CHECK_THROWS_AS((void)sliding_window(ts, o), PreconditionError);
}

TEST_CASE("synthetic gait windows") {
  const TimeSeries ts = gen_synthetic({.seed = 7, .n_steps = 1200});
  CHECK(ts.channels == kGaitChannels);
  CHECK(ts.steps() == 1200);
  CHECK(sliding_window(ts).size() == 1190);
}

TEST_CASE("generator is deterministic per seed") {
  const TimeSeries a = gen_synthetic({.seed = 11});
  const TimeSeries b = gen_synthetic({.seed = 11});
  const TimeSeries c = gen_synthetic({.seed = 12});
  CHECK(a.rows == b.rows);
  CHECK(a.rows != c.rows);
  CHECK_THROWS_AS((void)gen_synthetic({.n_steps = 5}), PreconditionError);
}

TEST_CASE("noise-free signal is smooth") {
  const TimeSeries ts = gen_synthetic({.seed = 1, .n_steps = 1000, .noise_sd = 0.0});
  const std::size_t ul = ts.channel("α_ul");
  double worst = 0.0;
  for (std::size_t t = 2; t < ts.steps(); ++t) {
    worst = std::max(worst, std::abs(ts.rows[t][ul] - 2 * ts.rows[t - 1][ul] + ts.rows[t - 2][ul]));
  }
  // Second differences of a 100-step-period signal with amplitude ~25.
  CHECK(worst < 0.5);
}

TEST_CASE("a subset of control steps exceeds the 1.5 rate bound") {
  for (std::uint64_t seed : {1, 7, 42}) {
    const TimeSeries ts = gen_synthetic({.seed = seed});
    const std::size_t c = ts.channel("α_a");
    std::size_t fast = 0;
    for (std::size_t t = 1; t < ts.steps(); ++t) fast += std::abs(ts.rows[t][c] - ts.rows[t - 1][c]) > 1.5 ? 1 : 0;
    const double share = static_cast<double>(fast) / static_cast<double>(ts.steps() - 1);
    CHECK(share > 0.05);
    CHECK(share < 0.5);
  }
}

TEST_CASE("split balances violating and satisfying samples") {
  const Dataset ds = sliding_window(gen_synthetic({.seed = 7}));
  Rng rng(1);
  const Network net = testing::random_network(rng, {ds.input_dim(), 4, 1});
  const Predicate p = build_rate_bound(0.05, kPrevControlInput);
  const Split s = split_dataset(ds, net, p, 150, 2000, 3);
  CHECK(s.repair.size() == 150);
  CHECK(s.test.size() == 2000);
  std::size_t violating = 0;
  for (std::size_t i = 0; i < s.repair.size(); ++i) {
    violating += eval_predicate(p, s.repair.inputs[i], net.forward(s.repair.inputs[i]), kDefaultPredicateTol) ? 0 : 1;
  }
  std::size_t all_violating = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    all_violating += eval_predicate(p, ds.inputs[i], net.forward(ds.inputs[i]), kDefaultPredicateTol) ? 0 : 1;
  }
  const std::size_t all_satisfying = ds.size() - all_violating;
  const std::size_t expected =
      all_satisfying >= 75 ? std::min<std::size_t>(75, all_violating) : 150 - all_satisfying;
  CHECK(violating == expected);
  const Split again = split_dataset(ds, net, p, 150, 2000, 3);
  CHECK(write_csv(again.repair) == write_csv(s.repair));
  CHECK(write_csv(again.test) == write_csv(s.test));
}

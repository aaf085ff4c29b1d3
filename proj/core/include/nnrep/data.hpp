#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nnrep/network.hpp"
#include "nnrep/predicate.hpp"

namespace nnrep {

// Name of the optional 0/1 column marking membership of the constrained set.
inline constexpr std::string_view kRegionColumn = "xr";

struct Dataset {
  std::vector<std::string> input_names;
  std::vector<std::string> target_names;
  std::vector<Vector> inputs;
  std::vector<Vector> targets;
  // Samples on which the predicate is enforced during repair.
  std::vector<bool> in_region;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
  std::size_t input_dim() const { return input_names.size(); }
  std::size_t target_dim() const { return target_names.size(); }
  void validate() const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
  void append(const Dataset& other);
};

// Column selection for load_csv. Empty `inputs` means every column except the
// targets and the region flag; empty `targets` means the last such column.
struct CsvSchema {
  std::vector<std::string> inputs;
  std::vector<std::string> targets;
};

Dataset load_csv(std::string_view text, const CsvSchema& schema = {});
Dataset load_csv_file(const std::string& path, const CsvSchema& schema = {});
// Header: inputs, targets, xr. Numbers use the shortest round-trip form.
std::string write_csv(const Dataset& ds);

// Rows of raw sensor data, one column per channel, plus a time column.
struct TimeSeries {
  std::vector<std::string> channels;
  std::vector<double> time;
  std::vector<std::vector<double>> rows;  // rows[step][channel]

  std::size_t steps() const { return rows.size(); }
  std::size_t channel(std::string_view name) const;  // throws when missing
  void validate() const;
};

TimeSeries load_series_csv(std::string_view text);
std::string write_series_csv(const TimeSeries& ts);

// Channel names of the synthetic gait signal.
inline const std::vector<std::string> kGaitChannels = {"α_ul", "α̇_ul", "α_ll", "α̇_ll", "α_a"};
inline constexpr std::string_view kControlChannel = "α_a";

struct WindowOptions {
  std::size_t dt = 10;
  std::string control = std::string(kControlChannel);
  // Empty means every channel other than the control.
  std::vector<std::string> sensors;
  // Give the sensors the same dt-step history as the control instead of the
  // current reading only.
  bool sensor_history = false;
};

// One sample per step t >= dt. Inputs: control at t-1 .. t-dt (columns
// αa_tm1 .. αa_tm<dt>), then sensors at t (and t-1 .. t-dt+1 with history).
// Target: control at t (column αa_t).
Dataset sliding_window(const TimeSeries& ts, const WindowOptions& opts = {});

// Index of the αa_tm1 column in a windowed dataset, for build_rate_bound.
inline constexpr std::size_t kPrevControlInput = 0;

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t n_steps = 3000;
  double noise_sd = 0.05;
  // Steps per gait cycle.
  double period = 100.0;
  // Height of the push-off burst in the control channel; its flanks produce
  // the fast control changes.
  double burst_amplitude = 15.0;
  std::size_t min_steps_dt = 10;
};

TimeSeries gen_synthetic(const SynthOptions& opts = {});

// Repair set: violating samples plus an equal number of satisfying ones,
// capped at `total` (violating samples take at most half when both kinds are
// plentiful; shortfalls on either side are filled from the other). Test set:
// up to `n_test` random samples from the rest.
struct Split {
  Dataset repair;
  Dataset test;
};

Split split_dataset(const Dataset& ds, const Network& net, const Predicate& pred, std::size_t total = 150,
                    std::size_t n_test = 2000, std::uint64_t seed = 0, double tol = kDefaultPredicateTol);

}  // namespace nnrep

#include "nnrep/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "nnrep/error.hpp"
#include "nnrep/io.hpp"

namespace nnrep {

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    out.push_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

double parse_cell(std::string_view cell, std::size_t row, std::string_view column) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  auto res = std::from_chars(cell.data(), end, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    throw ParseError("row " + std::to_string(row) + ", column '" + std::string(column) +
                     "': not a finite number: '" + std::string(cell) + "'");
  }
  return v;
}

std::size_t column_index(const std::vector<std::string_view>& header, std::string_view name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::string join_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (targets.size() != inputs.size() || in_region.size() != inputs.size()) {
    throw DimensionError("dataset columns have different lengths");
  }
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    if (static_cast<std::size_t>(inputs[r].size()) != input_dim() ||
        static_cast<std::size_t>(targets[r].size()) != target_dim()) {
      throw DimensionError("dataset row " + std::to_string(r) + " has the wrong width");
    }
    if (!inputs[r].allFinite() || !targets[r].allFinite()) {
      throw ParseError("dataset row " + std::to_string(r) + " has a non-finite value");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.input_names = input_names;
  out.target_names = target_names;
  for (std::size_t r : rows) {
    if (r >= size()) throw PreconditionError("dataset row " + std::to_string(r) + " out of range");
    out.inputs.push_back(inputs[r]);
    out.targets.push_back(targets[r]);
    out.in_region.push_back(in_region[r]);
  }
  return out;
}

void Dataset::append(const Dataset& other) {
  if (other.input_dim() != input_dim() || other.target_dim() != target_dim()) {
    throw DimensionError("cannot append datasets of different widths");
  }
  inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
  targets.insert(targets.end(), other.targets.begin(), other.targets.end());
  in_region.insert(in_region.end(), other.in_region.begin(), other.in_region.end());
}

Dataset load_csv(std::string_view text, const CsvSchema& schema) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("CSV has no header");
  const auto header = split_line(lines.front());

  std::vector<std::string> targets = schema.targets;
  std::vector<std::string> inputs = schema.inputs;
  if (targets.empty()) {
    for (auto it = header.rbegin(); it != header.rend(); ++it) {
      if (*it != kRegionColumn) {
        targets.emplace_back(*it);
        break;
      }
    }
    if (targets.empty()) throw ParseError("CSV has no target column");
  }
  if (inputs.empty()) {
    for (auto h : header) {
      if (h == kRegionColumn || std::find(targets.begin(), targets.end(), h) != targets.end()) continue;
      inputs.emplace_back(h);
    }
  }
  std::vector<std::size_t> in_idx;
  std::vector<std::size_t> tg_idx;
  for (const auto& n : inputs) in_idx.push_back(column_index(header, n));
  for (const auto& n : targets) tg_idx.push_back(column_index(header, n));
  const auto region_it = std::find(header.begin(), header.end(), kRegionColumn);
  const bool has_region = region_it != header.end();
  const auto region_idx = static_cast<std::size_t>(region_it - header.begin());

  Dataset ds;
  ds.input_names = inputs;
  ds.target_names = targets;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_line(lines[r]);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(r) + " has " + std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    }
    Vector x(static_cast<Eigen::Index>(in_idx.size()));
    Vector t(static_cast<Eigen::Index>(tg_idx.size()));
    for (std::size_t k = 0; k < in_idx.size(); ++k) {
      x(static_cast<Eigen::Index>(k)) = parse_cell(cells[in_idx[k]], r, header[in_idx[k]]);
    }
    for (std::size_t k = 0; k < tg_idx.size(); ++k) {
      t(static_cast<Eigen::Index>(k)) = parse_cell(cells[tg_idx[k]], r, header[tg_idx[k]]);
    }
    bool flag = true;
    if (has_region) {
      const double v = parse_cell(cells[region_idx], r, kRegionColumn);
      if (v != 0.0 && v != 1.0) throw ParseError("row " + std::to_string(r) + ": column 'xr' must be 0 or 1");
      flag = v == 1.0;
    }
    ds.inputs.push_back(std::move(x));
    ds.targets.push_back(std::move(t));
    ds.in_region.push_back(flag);
  }
  return ds;
}

Dataset load_csv_file(const std::string& path, const CsvSchema& schema) {
  return load_csv(read_text_file(path), schema);
}

std::string write_csv(const Dataset& ds) {
  ds.validate();
  std::vector<std::string> head = ds.input_names;
  head.insert(head.end(), ds.target_names.begin(), ds.target_names.end());
  head.emplace_back(kRegionColumn);
  std::string out = join_row(head);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    std::vector<std::string> cells;
    for (Eigen::Index k = 0; k < ds.inputs[r].size(); ++k) cells.push_back(format_double(ds.inputs[r](k)));
    for (Eigen::Index k = 0; k < ds.targets[r].size(); ++k) cells.push_back(format_double(ds.targets[r](k)));
    cells.emplace_back(ds.in_region[r] ? "1" : "0");
    out += join_row(cells);
  }
  return out;
}

std::size_t TimeSeries::channel(std::string_view name) const {
  auto it = std::find(channels.begin(), channels.end(), name);
  if (it == channels.end()) throw PreconditionError("series has no channel '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - channels.begin());
}

void TimeSeries::validate() const {
  if (time.size() != rows.size()) throw DimensionError("series time column has the wrong length");
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s].size() != channels.size()) throw DimensionError("series row " + std::to_string(s) + " has the wrong width");
    for (double v : rows[s]) {
      if (!std::isfinite(v)) throw ParseError("series row " + std::to_string(s) + " has a non-finite value");
    }
  }
}

TimeSeries load_series_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("series CSV has no header");
  const auto header = split_line(lines.front());
  if (header.empty() || header.front() != "t") throw ParseError("series CSV must start with a 't' column");
  TimeSeries ts;
  for (std::size_t c = 1; c < header.size(); ++c) ts.channels.emplace_back(header[c]);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_line(lines[r]);
    if (cells.size() != header.size()) throw ParseError("series row " + std::to_string(r) + " has the wrong width");
    ts.time.push_back(parse_cell(cells[0], r, "t"));
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_cell(cells[c], r, header[c]));
    ts.rows.push_back(std::move(row));
  }
  return ts;
}

std::string write_series_csv(const TimeSeries& ts) {
  ts.validate();
  std::vector<std::string> head{"t"};
  head.insert(head.end(), ts.channels.begin(), ts.channels.end());
  std::string out = join_row(head);
  for (std::size_t s = 0; s < ts.steps(); ++s) {
    std::vector<std::string> cells{format_double(ts.time[s])};
    for (double v : ts.rows[s]) cells.push_back(format_double(v));
    out += join_row(cells);
  }
  return out;
}

Dataset sliding_window(const TimeSeries& ts, const WindowOptions& opts) {
  ts.validate();
  if (opts.dt == 0) throw PreconditionError("window length dt must be positive");
  if (ts.steps() <= opts.dt) {
    throw PreconditionError("series of " + std::to_string(ts.steps()) + " steps is too short for dt=" +
                            std::to_string(opts.dt));
  }
  const std::size_t ctrl = ts.channel(opts.control);
  std::vector<std::size_t> sensors;
  std::vector<std::string> sensor_names = opts.sensors;
  if (sensor_names.empty()) {
    for (const auto& c : ts.channels) {
      if (c != opts.control) sensor_names.push_back(c);
    }
  }
  for (const auto& s : sensor_names) sensors.push_back(ts.channel(s));
  const std::size_t lags = opts.sensor_history ? opts.dt : 1;

  Dataset ds;
  for (std::size_t k = 1; k <= opts.dt; ++k) ds.input_names.push_back("αa_tm" + std::to_string(k));
  for (const auto& s : sensor_names) {
    ds.input_names.push_back(s);
    for (std::size_t k = 1; k < lags; ++k) ds.input_names.push_back(s + "_tm" + std::to_string(k));
  }
  ds.target_names = {"αa_t"};

  const auto width = static_cast<Eigen::Index>(ds.input_names.size());
  for (std::size_t t = opts.dt; t < ts.steps(); ++t) {
    Vector x(width);
    Eigen::Index c = 0;
    for (std::size_t k = 1; k <= opts.dt; ++k) x(c++) = ts.rows[t - k][ctrl];
    for (std::size_t s : sensors) {
      for (std::size_t k = 0; k < lags; ++k) x(c++) = ts.rows[t - k][s];
    }
    ds.inputs.push_back(std::move(x));
    ds.targets.push_back(Vector::Constant(1, ts.rows[t][ctrl]));
    ds.in_region.push_back(true);
  }
  return ds;
}

TimeSeries gen_synthetic(const SynthOptions& opts) {
  if (opts.n_steps < 2 * opts.min_steps_dt) {
    throw PreconditionError("n_steps must be at least " + std::to_string(2 * opts.min_steps_dt));
  }
  if (!(opts.period > 2.0)) throw PreconditionError("period must exceed 2 steps");
  if (!(opts.noise_sd >= 0.0)) throw PreconditionError("noise_sd must be non-negative");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Per-seed variation of phase and gait speed.
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const double speed = 0.9 + 0.2 * unit(rng);
  const double w = 2.0 * std::numbers::pi / opts.period * speed;
  auto sd = [&] { return opts.noise_sd == 0.0 ? 0.0 : opts.noise_sd * noise(rng); };

  TimeSeries ts;
  ts.channels = kGaitChannels;
  for (std::size_t s = 0; s < opts.n_steps; ++s) {
    const double t = static_cast<double>(s);
    const double a = w * t + phase;
    // Thigh and shank angles with their per-step derivatives.
    const double ul = 20.0 * std::sin(a) + 5.0 * std::sin(2.0 * a + 0.3);
    const double dul = w * (20.0 * std::cos(a) + 10.0 * std::cos(2.0 * a + 0.3));
    const double ll = 30.0 * std::sin(a - 0.8) + 8.0 * std::sin(2.0 * a - 0.2);
    const double dll = w * (30.0 * std::cos(a - 0.8) + 16.0 * std::cos(2.0 * a - 0.2));
    // Ankle: smooth swing plus a short push-off burst late in stance.
    const double cyc = std::fmod(a, 2.0 * std::numbers::pi) / (2.0 * std::numbers::pi);
    const double burst_center = 0.6;
    const double burst_width = 0.04;
    const double d = (cyc - burst_center) / burst_width;
    const double ankle = 8.0 * std::sin(a + 0.5) + opts.burst_amplitude * std::exp(-0.5 * d * d);
    ts.time.push_back(t);
    ts.rows.push_back({ul + sd(), dul + sd(), ll + sd(), dll + sd(), ankle + sd()});
  }
  return ts;
}

Split split_dataset(const Dataset& ds, const Network& net, const Predicate& pred, std::size_t total,
                    std::size_t n_test, std::uint64_t seed, double tol) {
  ds.validate();
  if (ds.empty()) throw PreconditionError("cannot split an empty dataset");
  if (total == 0) throw PreconditionError("repair set size must be positive");
  if (ds.input_dim() != net.input_dim()) throw DimensionError("dataset width does not match network input");
  std::vector<std::size_t> bad;
  std::vector<std::size_t> good;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    (eval_predicate(pred, ds.inputs[r], net.forward(ds.inputs[r]), tol) ? good : bad).push_back(r);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(bad.begin(), bad.end(), rng);
  std::shuffle(good.begin(), good.end(), rng);
  std::size_t nb = std::min(bad.size(), (total + 1) / 2);
  const std::size_t ng = std::min(good.size(), total - nb);
  nb = std::min(bad.size(), total - ng);

  std::vector<std::size_t> repair(bad.begin(), bad.begin() + static_cast<std::ptrdiff_t>(nb));
  repair.insert(repair.end(), good.begin(), good.begin() + static_cast<std::ptrdiff_t>(ng));
  std::sort(repair.begin(), repair.end());
  std::vector<std::size_t> rest(bad.begin() + static_cast<std::ptrdiff_t>(nb), bad.end());
  rest.insert(rest.end(), good.begin() + static_cast<std::ptrdiff_t>(ng), good.end());
  std::sort(rest.begin(), rest.end());
  std::shuffle(rest.begin(), rest.end(), rng);
  rest.resize(std::min(rest.size(), n_test));
  std::sort(rest.begin(), rest.end());

  Split out;
  out.repair = ds.subset(repair);
  out.test = ds.subset(rest);
  return out;
}

}  // namespace nnrep

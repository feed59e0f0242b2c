#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qpace/random.hpp"
#include "qpace/serialize.hpp"
#include "qpace/tensor.hpp"

namespace qpace {

inline constexpr double kStdFloor = 1e-8;

/// Per-node normalization statistics fitted on the training region.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std_dev;  // floored at kStdFloor
};

/// Time-major sensor matrix: row t holds every node's reading at step t.
struct STDataset {
  Tensor values;  // [T, N]
  std::vector<std::string> node_ids;
  std::vector<std::string> timestamps;  // length T
  int interval_minutes = 5;
  std::optional<NormStats> norm;  // set once z-scoring has been applied

  std::size_t rows() const { return values.rank() == 2 ? values.dim(0) : 0; }
  std::size_t nodes() const { return values.rank() == 2 ? values.dim(1) : 0; }
};

/// CSV layout: header `timestamp,<node>,<node>,...`; one reading per cell;
/// LF line endings. Missing or non-numeric cells are rejected.
inline STDataset load_csv(const std::string& path) {
  const std::string content = read_text_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path, 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header = split_on(line, ',');
  if (header.size() < 2 || header[0] != "timestamp") {
    throw ParseError("header must be 'timestamp,<node ids...>'", 1);
  }

  STDataset ds;
  ds.node_ids.assign(header.begin() + 1, header.end());
  const std::size_t n = ds.node_ids.size();

  std::vector<double> flat;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_on(line, ',');
    if (fields.size() != n + 1) {
      throw ParseError("expected " + std::to_string(n + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    ds.timestamps.push_back(fields[0]);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (fields[c].empty()) throw ParseError("missing cell", line_no);
      flat.push_back(parse_double(fields[c], line_no));
    }
  }
  if (ds.timestamps.empty()) throw ParseError("no data rows in " + path, 1);
  ds.values = Tensor({ds.timestamps.size(), n}, std::move(flat));
  ds.values.require_finite("load_csv");
  return ds;
}

inline std::string to_csv(const STDataset& ds) {
  std::string out = "timestamp";
  for (const auto& id : ds.node_ids) {
    out += ',';
    out += id;
  }
  out += '\n';
  for (std::size_t t = 0; t < ds.rows(); ++t) {
    out += ds.timestamps[t];
    for (std::size_t i = 0; i < ds.nodes(); ++i) {
      out += ',';
      out += format_double(ds.values[t * ds.nodes() + i]);
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const STDataset& ds, const std::string& path) {
  write_text_file(path, to_csv(ds));
}

/// Chronological train/val/test fractions; each must sit in (0,1) and they
/// must sum to 1.
struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  void validate() const {
    for (double f : {train, val, test}) {
      if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fractions must lie in (0,1)");
    }
    if (std::fabs(train + val + test - 1.0) > 1e-9) {
      throw ConfigError("split fractions must sum to 1");
    }
  }
};

/// Synthetic generator settings. Difficulty is planted on both axes: a
/// designated block of nodes gets multiplied noise, and randomly placed time
/// spans get an additive regime shift.
struct SyntheticConfig {
  std::size_t nodes = 20;
  std::size_t steps = 4000;
  std::size_t period = 288;  // steps per daily cycle
  double amplitude = 10.0;
  double offset = 50.0;
  double noise_std = 1.0;
  double hard_node_fraction = 0.25;
  double hard_node_noise_multiplier = 4.0;
  double hard_time_fraction = 0.15;
  double shift_magnitude = 8.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (nodes == 0) throw ConfigError("synthetic.nodes must be >= 1");
    if (period == 0) throw ConfigError("synthetic.period must be >= 1");
    if (!(hard_node_fraction >= 0.0 && hard_node_fraction <= 1.0)) {
      throw ConfigError("synthetic.hard_node_fraction must lie in [0,1]");
    }
    if (!(hard_time_fraction >= 0.0 && hard_time_fraction <= 1.0)) {
      throw ConfigError("synthetic.hard_time_fraction must lie in [0,1]");
    }
    if (!(hard_node_noise_multiplier >= 1.0)) {
      throw ConfigError("synthetic.hard_node_noise_multiplier must be >= 1");
    }
    if (!(noise_std >= 0.0)) throw ConfigError("synthetic.noise_std must be >= 0");
    if (!(amplitude >= 0.0)) throw ConfigError("synthetic.amplitude must be >= 0");
    if (!(shift_magnitude >= 0.0)) throw ConfigError("synthetic.shift_magnitude must be >= 0");
  }

  std::size_t hard_node_count() const {
    return static_cast<std::size_t>(hard_node_fraction * static_cast<double>(nodes) + 0.5);
  }
};

/// Hard nodes occupy the tail of the node index range so tests can point at
/// them. Hard, shifted time blocks are one period long and chosen by the
/// "spans" substream; noise comes from the "noise" substream and per-node
/// phases/offsets from "phase", so disabling one leaves the others unchanged.
inline STDataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  RandomStream root(cfg.seed);
  RandomStream phase_stream = root.derive("phase");
  RandomStream noise_stream = root.derive("noise");
  RandomStream span_stream = root.derive("spans");

  const std::size_t n = cfg.nodes;
  const std::size_t t_total = cfg.steps;
  const std::size_t first_hard = n - cfg.hard_node_count();

  std::vector<double> node_phase(n), node_offset(n);
  for (std::size_t i = 0; i < n; ++i) {
    node_phase[i] = phase_stream.uniform(0.0, 2.0 * 3.14159265358979323846);
    node_offset[i] = cfg.offset + phase_stream.uniform(-0.1, 0.1) * cfg.amplitude;
  }

  // Block b covers steps [b*period, (b+1)*period); a block is shifted with
  // probability hard_time_fraction, sign alternating by draw.
  const std::size_t n_blocks = (t_total + cfg.period - 1) / cfg.period;
  std::vector<double> block_shift(n_blocks, 0.0);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const bool hard = span_stream.uniform() < cfg.hard_time_fraction;
    const bool positive = span_stream.uniform() < 0.5;
    if (hard) block_shift[b] = positive ? cfg.shift_magnitude : -cfg.shift_magnitude;
  }

  STDataset ds;
  ds.node_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.node_ids.push_back("n" + std::to_string(i));
  ds.timestamps.reserve(t_total);
  ds.values = Tensor({t_total, n});
  ds.interval_minutes = 5;

  for (std::size_t t = 0; t < t_total; ++t) {
    ds.timestamps.push_back(std::to_string(t));
    const double shift = block_shift[t / cfg.period];
    for (std::size_t i = 0; i < n; ++i) {
      const double angle =
          2.0 * 3.14159265358979323846 * static_cast<double>(t) / static_cast<double>(cfg.period) +
          node_phase[i];
      const double noise_scale =
          i >= first_hard ? cfg.noise_std * cfg.hard_node_noise_multiplier : cfg.noise_std;
      const double noise = noise_stream.normal() * noise_scale;
      ds.values[t * n + i] = cfg.amplitude * std::sin(angle) + node_offset[i] + shift + noise;
    }
  }
  ds.values.require_finite("generate_synthetic");
  return ds;
}

/// Fit per-node mean/std over the first `row_count` rows (the training
/// region). Stds are floored so constant nodes stay usable.
inline NormStats zscore_fit(const STDataset& ds, std::size_t row_count) {
  if (row_count == 0 || row_count > ds.rows()) {
    throw ContractError("zscore_fit: row_count outside 1..T");
  }
  const std::size_t n = ds.nodes();
  NormStats stats;
  stats.mean.assign(n, 0.0);
  stats.std_dev.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < row_count; ++t) acc += ds.values[t * n + i];
    stats.mean[i] = acc / static_cast<double>(row_count);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < row_count; ++t) {
      const double d = ds.values[t * n + i] - stats.mean[i];
      acc += d * d;
    }
    stats.std_dev[i] = std::max(std::sqrt(acc / static_cast<double>(row_count)), kStdFloor);
  }
  return stats;
}

inline STDataset zscore_apply(const STDataset& ds, const NormStats& stats) {
  if (stats.mean.size() != ds.nodes() || stats.std_dev.size() != ds.nodes()) {
    throw ContractError("zscore_apply: stats length " + std::to_string(stats.mean.size()) +
                        " vs " + std::to_string(ds.nodes()) + " nodes");
  }
  STDataset out = ds;
  const std::size_t n = ds.nodes();
  for (std::size_t t = 0; t < ds.rows(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      out.values[t * n + i] = (ds.values[t * n + i] - stats.mean[i]) / stats.std_dev[i];
    }
  }
  out.norm = stats;
  return out;
}

/// Exact inverse of zscore_apply for any tensor whose given axis indexes
/// nodes. Works for prediction blocks [T,N,Q], [W,T,N,Q] and plain [T,N].
inline Tensor zscore_invert(const Tensor& values, const NormStats& stats, std::size_t node_axis) {
  if (node_axis >= values.rank()) throw ContractError("zscore_invert: bad node axis");
  if (values.dim(node_axis) != stats.mean.size()) {
    throw ContractError("zscore_invert: stats length " + std::to_string(stats.mean.size()) +
                        " vs axis size " + std::to_string(values.dim(node_axis)));
  }
  std::size_t inner = 1;
  for (std::size_t a = node_axis + 1; a < values.rank(); ++a) inner *= values.dim(a);
  const std::size_t n = values.dim(node_axis);

  Tensor out = values;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    const std::size_t node = (flat / inner) % n;
    out[flat] = out[flat] * stats.std_dev[node] + stats.mean[node];
  }
  return out;
}

/// Window start j = index of the last input row. Input rows are
/// [j-t_in+1, j]; target rows are [j+1, j+t_out].
inline std::vector<std::size_t> make_windows(const STDataset& ds, std::size_t t_in,
                                             std::size_t t_out) {
  if (t_in == 0 || t_out == 0) throw ContractError("make_windows: t_in and t_out must be >= 1");
  if (ds.rows() < t_in + t_out) {
    throw ContractError("make_windows: need at least " + std::to_string(t_in + t_out) +
                        " rows, have " + std::to_string(ds.rows()));
  }
  const std::size_t count = ds.rows() - t_in - t_out + 1;
  std::vector<std::size_t> starts(count);
  for (std::size_t w = 0; w < count; ++w) starts[w] = t_in - 1 + w;
  return starts;
}

struct WindowSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Contiguous chronological partition of the window list by count. Every
/// window lands on exactly one side; an empty side is an error.
inline WindowSplit split_windows(const std::vector<std::size_t>& windows, const SplitSpec& spec) {
  spec.validate();
  if (windows.empty()) throw ContractError("split_windows: no windows");
  const double w = static_cast<double>(windows.size());
  const std::size_t n_train = static_cast<std::size_t>(std::llround(spec.train * w));
  const std::size_t n_val = static_cast<std::size_t>(std::llround(spec.val * w));
  const std::size_t n_test =
      n_train + n_val < windows.size() ? windows.size() - n_train - n_val : 0;
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw ContractError("split_windows: a split is empty (train " + std::to_string(n_train) +
                        ", val " + std::to_string(n_val) + ", test " + std::to_string(n_test) +
                        ")");
  }
  WindowSplit out;
  out.train.assign(windows.begin(), windows.begin() + n_train);
  out.val.assign(windows.begin() + n_train, windows.begin() + n_train + n_val);
  out.test.assign(windows.begin() + n_train + n_val, windows.end());
  return out;
}

/// Input block [T_in, N] for window start j.
inline Tensor window_input(const STDataset& ds, std::size_t j, std::size_t t_in) {
  const std::size_t n = ds.nodes();
  Tensor block({t_in, n});
  const std::size_t first = j + 1 - t_in;
  for (std::size_t t = 0; t < t_in; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      block[t * n + i] = ds.values[(first + t) * n + i];
    }
  }
  return block;
}

/// Target block [T_out, N] for window start j.
inline Tensor window_target(const STDataset& ds, std::size_t j, std::size_t t_out) {
  const std::size_t n = ds.nodes();
  Tensor block({t_out, n});
  for (std::size_t t = 0; t < t_out; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      block[t * n + i] = ds.values[(j + 1 + t) * n + i];
    }
  }
  return block;
}

}  // namespace qpace

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qpace/errors.hpp"
#include "qpace/random.hpp"

namespace qpace {

enum class PlacementMode { independent, node_correlated, time_correlated };
enum class SimScheduler { instance, spatial_group, temporal_group };

inline const char* placement_name(PlacementMode m) {
  switch (m) {
    case PlacementMode::independent: return "independent";
    case PlacementMode::node_correlated: return "node-correlated";
    default: return "time-correlated";
  }
}

inline const char* sim_scheduler_name(SimScheduler s) {
  switch (s) {
    case SimScheduler::instance: return "instance";
    case SimScheduler::spatial_group: return "spatial-group";
    default: return "temporal-group";
  }
}

/// Batch-matrix simulation settings: each iteration draws a b x N matrix of
/// hard/easy instances and asks a scheduler to organize the batch around it.
struct SimConfig {
  std::size_t nodes = 32;           // N: columns of the instance matrix
  std::size_t batch_groups = 16;    // b: rows (time groups per batch)
  double hard_fraction = 0.3;       // f
  PlacementMode placement = PlacementMode::independent;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (nodes == 0 || batch_groups == 0) throw ConfigError("sim: nodes and batch_groups >= 1");
    if (!(hard_fraction >= 0.0 && hard_fraction <= 1.0)) {
      throw ConfigError("sim: hard_fraction must lie in [0,1]");
    }
    if (iterations == 0) throw ConfigError("sim: iterations >= 1");
  }
};

/// Slot accounting for one scheduler under one placement mode.
///   instance:        the full matrix is computed; hard entries are masked
///                    out after the fact and their slots are wasted.
///   spatial-group:   columns designated hard are shrunk away before the
///                    batch is built; nothing computed is discarded.
///   temporal-group:  rows designated hard are replaced by resampling easy
///                    rows, keeping the matrix shape with zero waste.
struct UtilizationReport {
  std::string scheduler;
  std::string placement;
  double hard_fraction = 0.0;
  double utilization_mean = 0.0;  // useful slots / computed slots
  double utilization_std = 0.0;
  double wasted_fraction_mean = 0.0;  // wasted slots / computed slots
  double throughput_mean = 0.0;       // useful slots per iteration
  std::size_t iterations = 0;
};

inline UtilizationReport simulate(const SimConfig& cfg, SimScheduler scheduler) {
  cfg.validate();
  const std::size_t n = cfg.nodes;
  const std::size_t b = cfg.batch_groups;

  if (cfg.hard_fraction >= 1.0 && scheduler != SimScheduler::instance) {
    throw ContractError("simulate: every group is hard, the batch matrix would be empty");
  }

  RandomStream root(cfg.seed);
  std::vector<double> utilization(cfg.iterations, 0.0);
  double wasted_acc = 0.0;
  double throughput_acc = 0.0;

  std::vector<char> slot_hard(b * n, 0);
  std::vector<char> col_hard(n, 0), row_hard(b, 0);

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    RandomStream stream = root.derive("iter", it);

    std::fill(col_hard.begin(), col_hard.end(), 0);
    std::fill(row_hard.begin(), row_hard.end(), 0);
    switch (cfg.placement) {
      case PlacementMode::independent:
        for (std::size_t s = 0; s < b * n; ++s) {
          slot_hard[s] = stream.uniform() < cfg.hard_fraction ? 1 : 0;
        }
        break;
      case PlacementMode::node_correlated: {
        // a fixed count of whole columns is hard, positions drawn per iteration
        const std::size_t hard_cols =
            static_cast<std::size_t>(cfg.hard_fraction * static_cast<double>(n) + 0.5);
        std::vector<std::size_t> ids(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = i;
        stream.shuffle(ids);
        for (std::size_t h = 0; h < hard_cols; ++h) col_hard[ids[h]] = 1;
        for (std::size_t r = 0; r < b; ++r) {
          for (std::size_t c = 0; c < n; ++c) slot_hard[r * n + c] = col_hard[c];
        }
        break;
      }
      case PlacementMode::time_correlated: {
        const std::size_t hard_rows =
            static_cast<std::size_t>(cfg.hard_fraction * static_cast<double>(b) + 0.5);
        std::vector<std::size_t> ids(b);
        for (std::size_t r = 0; r < b; ++r) ids[r] = r;
        stream.shuffle(ids);
        for (std::size_t h = 0; h < hard_rows; ++h) row_hard[ids[h]] = 1;
        for (std::size_t r = 0; r < b; ++r) {
          for (std::size_t c = 0; c < n; ++c) slot_hard[r * n + c] = row_hard[r];
        }
        break;
      }
    }

    std::size_t computed = 0, useful = 0, wasted = 0;
    switch (scheduler) {
      case SimScheduler::instance: {
        // gaps stay in the matrix: computed everywhere, hard slots unusable
        computed = b * n;
        for (std::size_t s = 0; s < b * n; ++s) wasted += slot_hard[s] ? 1 : 0;
        useful = computed - wasted;
        break;
      }
      case SimScheduler::spatial_group: {
        // hard columns are shrunk away; admitted slots all feed training
        std::size_t kept_cols = 0;
        for (std::size_t c = 0; c < n; ++c) kept_cols += col_hard[c] ? 0 : 1;
        if (kept_cols == 0) {
          throw ContractError("simulate: spatial-group scheduler emptied the matrix");
        }
        computed = b * kept_cols;
        useful = computed;
        wasted = 0;
        break;
      }
      case SimScheduler::temporal_group: {
        // hard rows are swapped for resampled easy rows; shape is unchanged
        std::size_t hard_rows = 0;
        for (std::size_t r = 0; r < b; ++r) hard_rows += row_hard[r] ? 1 : 0;
        if (hard_rows == b) {
          throw ContractError("simulate: temporal-group scheduler has no easy rows to resample");
        }
        computed = b * n;
        useful = computed;
        wasted = 0;
        break;
      }
    }

    utilization[it] = static_cast<double>(useful) / static_cast<double>(computed);
    wasted_acc += static_cast<double>(wasted) / static_cast<double>(computed);
    throughput_acc += static_cast<double>(useful);
  }

  UtilizationReport rep;
  rep.scheduler = sim_scheduler_name(scheduler);
  rep.placement = placement_name(cfg.placement);
  rep.hard_fraction = cfg.hard_fraction;
  rep.iterations = cfg.iterations;
  const double m = static_cast<double>(cfg.iterations);
  double mean = 0.0;
  for (double u : utilization) mean += u;
  mean /= m;
  double var = 0.0;
  for (double u : utilization) var += (u - mean) * (u - mean);
  rep.utilization_mean = mean;
  rep.utilization_std = std::sqrt(var / m);
  rep.wasted_fraction_mean = wasted_acc / m;
  rep.throughput_mean = throughput_acc / m;
  return rep;
}

}  // namespace qpace

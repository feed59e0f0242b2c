#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qpace/dataset.hpp"
#include "qpace/random.hpp"
#include "qpace/tensor.hpp"
#include "qpace/training.hpp"

namespace testsup {

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia] <= b[ib]) {
      ++ia;
    } else {
      ++ib;
    }
    const double fa = static_cast<double>(ia) / static_cast<double>(a.size());
    const double fb = static_cast<double>(ib) / static_cast<double>(b.size());
    d = std::max(d, std::fabs(fa - fb));
  }
  return d;
}

/// Asymptotic two-sample KS critical value; c(0.01) = 1.628.
inline double ks_critical_1pct(std::size_t n, std::size_t m) {
  return 1.628 * std::sqrt(static_cast<double>(n + m) / static_cast<double>(n * m));
}

inline double sample_variance(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return var / static_cast<double>(xs.size());
}

/// Small synthetic dataset + config for fast end-to-end trainer tests.
inline qpace::SyntheticConfig tiny_synthetic(std::uint64_t seed = 11) {
  qpace::SyntheticConfig cfg;
  cfg.nodes = 6;
  cfg.steps = 420;
  cfg.period = 48;
  cfg.amplitude = 10.0;
  cfg.offset = 40.0;
  cfg.noise_std = 1.0;
  cfg.hard_node_fraction = 1.0 / 3.0;
  cfg.hard_node_noise_multiplier = 4.0;
  cfg.hard_time_fraction = 0.2;
  cfg.shift_magnitude = 6.0;
  cfg.seed = seed;
  return cfg;
}

inline qpace::TrainConfig tiny_train_config() {
  qpace::TrainConfig cfg;
  cfg.model.architecture = qpace::Architecture::linear;
  cfg.model.t_in = 8;
  cfg.model.t_out = 4;
  cfg.model.n_quantiles = 3;
  cfg.quantile_levels = {0.1, 0.5, 0.9};
  cfg.split = {0.6, 0.2, 0.2};
  cfg.learning_rate = 1e-2;
  cfg.max_epochs = 8;
  cfg.patience = 10;
  cfg.batch_size = 32;
  cfg.seed = 3;
  cfg.mu_spatial = 4;
  cfg.mu_temporal = 4;
  cfg.mu_quantile = 4;
  cfg.p0 = 30.0;
  cfg.delta_p = 10.0;
  cfg.warm_epochs = 2;
  cfg.horizons = {1, 2, 4};
  return cfg;
}

}  // namespace testsup

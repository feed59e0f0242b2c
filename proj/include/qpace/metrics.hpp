#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qpace/loss.hpp"
#include "qpace/tensor.hpp"

namespace qpace {

/// Targets with |y| below this are left out of MAPE (and only MAPE).
inline constexpr double kMapeZeroGuard = 1e-4;

struct PointMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double mape_percent = 0.0;
};

/// Standard point metrics over aligned flat arrays, original units.
inline PointMetrics point_metrics(const Tensor& median_predictions, const Tensor& targets) {
  require_same_shape(median_predictions, targets, "point_metrics");
  if (targets.size() == 0) throw ContractError("point_metrics: empty input");

  double sq = 0.0;
  double ab = 0.0;
  double pct = 0.0;
  std::size_t pct_count = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double err = median_predictions[i] - targets[i];
    sq += err * err;
    ab += std::fabs(err);
    if (std::fabs(targets[i]) >= kMapeZeroGuard) {
      pct += std::fabs(err) / std::fabs(targets[i]);
      ++pct_count;
    }
  }
  if (pct_count == 0) {
    throw ContractError("point_metrics: every target is below the MAPE zero guard");
  }
  const double n = static_cast<double>(targets.size());
  PointMetrics m;
  m.rmse = std::sqrt(sq / n);
  m.mae = ab / n;
  m.mape_percent = pct / static_cast<double>(pct_count) * 100.0;
  return m;
}

struct HorizonMetrics {
  int horizon = 0;  // 1-based step into the output block
  double rmse = 0.0;
  double mae = 0.0;
  double mape_percent = 0.0;
  std::vector<double> q_loss;  // one entry per quantile head
};

struct MetricsReport {
  std::vector<double> quantile_levels;
  std::vector<HorizonMetrics> rows;  // one per requested horizon, in request order

  const HorizonMetrics& row_for(int horizon) const {
    for (const auto& r : rows) {
      if (r.horizon == horizon) return r;
    }
    throw ContractError("MetricsReport: no row for horizon " + std::to_string(horizon));
  }
};

/// predictions: [W, T_out, N, Q]; targets: [W, T_out, N]; horizons are 1-based
/// steps into the output block. Q-loss per head is the mean pinball at that
/// step; point metrics come from the median head at that step.
inline MetricsReport quantile_report(const Tensor& predictions, const Tensor& targets,
                                     const QuantileSet& quantiles,
                                     const std::vector<int>& horizons) {
  if (predictions.rank() != 4 || targets.rank() != 3) {
    throw ContractError("quantile_report: predictions must be [W,T,N,Q], targets [W,T,N]");
  }
  const std::size_t w_count = predictions.dim(0);
  const std::size_t t_out = predictions.dim(1);
  const std::size_t n_nodes = predictions.dim(2);
  const std::size_t n_q = predictions.dim(3);
  if (targets.dim(0) != w_count || targets.dim(1) != t_out || targets.dim(2) != n_nodes ||
      n_q != quantiles.size()) {
    throw ContractError("quantile_report: shape mismatch");
  }
  if (w_count == 0) throw ContractError("quantile_report: no windows");

  MetricsReport report;
  report.quantile_levels = quantiles.levels;
  const std::size_t median = quantiles.median_index();

  for (int h : horizons) {
    if (h < 1 || static_cast<std::size_t>(h) > t_out) {
      throw ContractError("quantile_report: horizon " + std::to_string(h) +
                          " outside 1.." + std::to_string(t_out));
    }
    const std::size_t t = static_cast<std::size_t>(h - 1);

    Tensor med({w_count, n_nodes});
    Tensor tgt({w_count, n_nodes});
    HorizonMetrics row;
    row.horizon = h;
    row.q_loss.assign(n_q, 0.0);

    for (std::size_t j = 0; j < w_count; ++j) {
      for (std::size_t i = 0; i < n_nodes; ++i) {
        const double y = targets[(j * t_out + t) * n_nodes + i];
        tgt[j * n_nodes + i] = y;
        med[j * n_nodes + i] = predictions[((j * t_out + t) * n_nodes + i) * n_q + median];
        for (std::size_t k = 0; k < n_q; ++k) {
          const double y_hat = predictions[((j * t_out + t) * n_nodes + i) * n_q + k];
          row.q_loss[k] += pinball(y, y_hat, quantiles.levels[k]);
        }
      }
    }
    const double count = static_cast<double>(w_count * n_nodes);
    for (double& q : row.q_loss) q /= count;

    const PointMetrics pm = point_metrics(med, tgt);
    row.rmse = pm.rmse;
    row.mae = pm.mae;
    row.mape_percent = pm.mape_percent;
    report.rows.push_back(std::move(row));
  }
  return report;
}

/// Mean pinball over every (window, step, node, head) at the given levels.
/// This is the scalar monitored for early stopping and seed comparisons.
inline double mean_quantile_loss(const Tensor& predictions, const Tensor& targets,
                                 const QuantileSet& quantiles) {
  if (predictions.rank() != 4 || targets.rank() != 3) {
    throw ContractError("mean_quantile_loss: predictions must be [W,T,N,Q], targets [W,T,N]");
  }
  const std::size_t w_count = predictions.dim(0);
  const std::size_t t_out = predictions.dim(1);
  const std::size_t n_nodes = predictions.dim(2);
  const std::size_t n_q = predictions.dim(3);
  if (targets.size() != w_count * t_out * n_nodes || n_q != quantiles.size()) {
    throw ContractError("mean_quantile_loss: shape mismatch");
  }
  double acc = 0.0;
  for (std::size_t flat = 0; flat < targets.size(); ++flat) {
    const double y = targets[flat];
    for (std::size_t k = 0; k < n_q; ++k) {
      acc += pinball(y, predictions[flat * n_q + k], quantiles.levels[k]);
    }
  }
  return acc / static_cast<double>(targets.size() * n_q);
}

}  // namespace qpace

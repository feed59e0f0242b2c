#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "qpace/tensor.hpp"

namespace qpace {

/// Ordered quantile levels, strictly increasing in (0,1).
struct QuantileSet {
  std::vector<double> levels;

  explicit QuantileSet(std::vector<double> lv) : levels(std::move(lv)) {
    if (levels.empty()) throw ContractError("QuantileSet: empty");
    double prev = 0.0;
    for (double a : levels) {
      if (!(a > 0.0 && a < 1.0)) throw ContractError("QuantileSet: level outside (0,1)");
      if (!(a > prev)) throw ContractError("QuantileSet: levels must be strictly increasing");
      prev = a;
    }
  }

  static QuantileSet defaults() { return QuantileSet({0.1, 0.5, 0.9}); }

  std::size_t size() const { return levels.size(); }
  /// Index of the level closest to 0.5 (the point-forecast head).
  std::size_t median_index() const {
    std::size_t best = 0;
    double best_gap = 2.0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
      double gap = std::fabs(levels[k] - 0.5);
      if (gap < best_gap) {
        best_gap = gap;
        best = k;
      }
    }
    return best;
  }
};

/// Asymmetric quantile (pinball) loss:
///   alpha * (y - y_hat)        if y_hat <= y
///   (1 - alpha) * (y_hat - y)  if y_hat >  y
inline double pinball(double y, double y_hat, double alpha) {
  return y_hat <= y ? alpha * (y - y_hat) : (1.0 - alpha) * (y_hat - y);
}

/// Subgradient of pinball in y_hat. Ties (y_hat == y) take the y_hat <= y branch.
inline double pinball_subgrad(double y, double y_hat, double alpha) {
  return y_hat <= y ? -alpha : (1.0 - alpha);
}

/// Per-instance losses over (node i, window j, quantile k), each averaged
/// across the horizon steps of its window. Stored as a tensor [N, W, Q].
struct LossTensor {
  Tensor values;

  LossTensor() = default;
  LossTensor(std::size_t n_nodes, std::size_t n_windows, std::size_t n_quantiles)
      : values(Tensor({n_nodes, n_windows, n_quantiles})) {}

  std::size_t nodes() const { return values.dim(0); }
  std::size_t windows() const { return values.dim(1); }
  std::size_t quantiles() const { return values.dim(2); }

  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return values[(i * windows() + j) * quantiles() + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values[(i * windows() + j) * quantiles() + k];
  }
};

/// predictions: [W, T_out, N, Q]; targets: [W, T_out, N].
/// Result entry (i, j, k) is the mean pinball loss of head k for node i over
/// the horizon steps of window j.
inline LossTensor instance_loss_tensor(const Tensor& predictions, const Tensor& targets,
                                       const QuantileSet& quantiles) {
  if (predictions.rank() != 4 || targets.rank() != 3) {
    throw ContractError("instance_loss_tensor: predictions must be [W,T,N,Q], targets [W,T,N]");
  }
  const std::size_t w_count = predictions.dim(0);
  const std::size_t horizon = predictions.dim(1);
  const std::size_t n_nodes = predictions.dim(2);
  const std::size_t n_q = predictions.dim(3);
  if (targets.dim(0) != w_count || targets.dim(1) != horizon || targets.dim(2) != n_nodes ||
      n_q != quantiles.size()) {
    throw ContractError("instance_loss_tensor: shape mismatch");
  }

  LossTensor loss(n_nodes, w_count, n_q);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    for (std::size_t j = 0; j < w_count; ++j) {
      for (std::size_t k = 0; k < n_q; ++k) {
        double acc = 0.0;
        for (std::size_t t = 0; t < horizon; ++t) {
          const double y = targets[(j * horizon + t) * n_nodes + i];
          const double y_hat = predictions[((j * horizon + t) * n_nodes + i) * n_q + k];
          acc += pinball(y, y_hat, quantiles.levels[k]);
        }
        loss.at(i, j, k) = acc / static_cast<double>(horizon);
      }
    }
  }
  loss.values.require_finite("instance_loss_tensor");
  return loss;
}

struct MaskedValue {
  double value = 0.0;       // weighted mean; 0 when nothing is active
  double weight_sum = 0.0;  // sum of mask entries
  bool any_active = false;
};

/// Weighted mean of the loss tensor under mask v (entries in [0,1]):
///   sum(v * l) / sum(v), or 0 with any_active=false when v is all zero.
inline MaskedValue masked_objective(const LossTensor& loss, const Tensor& v) {
  require_same_shape(loss.values, v, "masked_objective");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    num += v[i] * loss.values[i];
    den += v[i];
  }
  MaskedValue out;
  out.weight_sum = den;
  out.any_active = den > 0.0;
  out.value = out.any_active ? num / den : 0.0;
  return out;
}

/// Diagnostic self-paced objective: sum(v*l) - lambda * sum(v).
/// Unnormalized by design; not used for gradient steps.
inline double spl_objective(const LossTensor& loss, const Tensor& v, double lambda) {
  require_same_shape(loss.values, v, "spl_objective");
  double weighted = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    weighted += v[i] * loss.values[i];
    count += v[i];
  }
  return weighted - lambda * count;
}

}  // namespace qpace

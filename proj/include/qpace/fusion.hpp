#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "qpace/adam.hpp"
#include "qpace/loss.hpp"
#include "qpace/random.hpp"
#include "qpace/tensor.hpp"

namespace qpace {

/// Stacking head: one linear map from the three experts' concatenated
/// quantile outputs to the final Q outputs, shared across every (t, n)
/// position.
struct FusionParams {
  Tensor weight;  // [Q, 3Q]
  Tensor bias;    // [Q]

  std::size_t heads() const { return bias.size(); }

  /// Equal-weight blend of the three experts; the natural starting point.
  static FusionParams averaging(std::size_t q) {
    FusionParams p;
    p.weight = Tensor({q, 3 * q});
    p.bias = Tensor({q});
    for (std::size_t k = 0; k < q; ++k) {
      for (std::size_t e = 0; e < 3; ++e) p.weight[k * 3 * q + e * q + k] = 1.0 / 3.0;
    }
    return p;
  }

  /// Weights that copy expert `which` through untouched.
  static FusionParams selector(std::size_t q, std::size_t which) {
    if (which >= 3) throw ContractError("FusionParams::selector: expert index 0..2");
    FusionParams p;
    p.weight = Tensor({q, 3 * q});
    p.bias = Tensor({q});
    for (std::size_t k = 0; k < q; ++k) p.weight[k * 3 * q + which * q + k] = 1.0;
    return p;
  }
};

/// Z = W * concat(o_s, o_t, o_q) + b applied at every position. The experts
/// must share shape [..., Q]; the result keeps that shape.
inline Tensor fuse(const Tensor& o_s, const Tensor& o_t, const Tensor& o_q,
                   const FusionParams& params) {
  require_same_shape(o_s, o_t, "fuse");
  require_same_shape(o_s, o_q, "fuse");
  if (o_s.rank() < 1 || o_s.shape().back() != params.heads()) {
    throw ContractError("fuse: trailing axis must hold the quantile heads");
  }
  const std::size_t q = params.heads();
  const std::size_t positions = o_s.size() / q;
  Tensor out(o_s.shape());
  for (std::size_t pos = 0; pos < positions; ++pos) {
    const double* a = o_s.data() + pos * q;
    const double* b = o_t.data() + pos * q;
    const double* c = o_q.data() + pos * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double* wrow = params.weight.data() + k * 3 * q;
      double acc = params.bias[k];
      for (std::size_t u = 0; u < q; ++u) {
        acc += wrow[u] * a[u] + wrow[q + u] * b[u] + wrow[2 * q + u] * c[u];
      }
      out[pos * q + k] = acc;
    }
  }
  return out;
}

// The stacking head has 3Q^2 + Q parameters and trains full-batch. Adam
// orbits the pinball kinks at a radius proportional to the step size, so the
// default favors a small step over a fast approach.
struct FusionTrainConfig {
  double learning_rate = 2e-3;
  int max_epochs = 500;
  int patience = 10;
};

namespace detail {

struct FusionGrad {
  Tensor flat;  // [Q*3Q + Q]
  double loss = 0.0;
};

/// Mean pinball of the fused output and its exact gradient in (W, b).
inline FusionGrad fusion_grad(const Tensor& o_s, const Tensor& o_t, const Tensor& o_q,
                              const Tensor& targets, const QuantileSet& quantiles,
                              const FusionParams& params) {
  const std::size_t q = params.heads();
  const std::size_t positions = targets.size();
  if (o_s.size() != positions * q) throw ContractError("fusion_grad: shape mismatch");

  FusionGrad g;
  g.flat = Tensor({q * 3 * q + q});
  double* gw = g.flat.data();
  double* gb = g.flat.data() + q * 3 * q;
  const double inv = 1.0 / static_cast<double>(positions * q);

  for (std::size_t pos = 0; pos < positions; ++pos) {
    const double* a = o_s.data() + pos * q;
    const double* b = o_t.data() + pos * q;
    const double* c = o_q.data() + pos * q;
    const double y = targets[pos];
    for (std::size_t k = 0; k < q; ++k) {
      const double* wrow = params.weight.data() + k * 3 * q;
      double z = params.bias[k];
      for (std::size_t u = 0; u < q; ++u) {
        z += wrow[u] * a[u] + wrow[q + u] * b[u] + wrow[2 * q + u] * c[u];
      }
      const double alpha = quantiles.levels[k];
      g.loss += pinball(y, z, alpha) * inv;
      const double dz = pinball_subgrad(y, z, alpha) * inv;
      double* grow = gw + k * 3 * q;
      for (std::size_t u = 0; u < q; ++u) {
        grow[u] += dz * a[u];
        grow[q + u] += dz * b[u];
        grow[2 * q + u] += dz * c[u];
      }
      gb[k] += dz;
    }
  }
  return g;
}

inline double fusion_loss(const Tensor& o_s, const Tensor& o_t, const Tensor& o_q,
                          const Tensor& targets, const QuantileSet& quantiles,
                          const FusionParams& params) {
  Tensor z = fuse(o_s, o_t, o_q, params);
  const std::size_t q = params.heads();
  double acc = 0.0;
  for (std::size_t pos = 0; pos < targets.size(); ++pos) {
    for (std::size_t k = 0; k < q; ++k) {
      acc += pinball(targets[pos], z[pos * q + k], quantiles.levels[k]);
    }
  }
  return acc / static_cast<double>(targets.size() * q);
}

}  // namespace detail

/// Fit the stacking head on frozen expert outputs by full-batch Adam,
/// starting from the averaging blend. Early-stops on the validation pinball
/// with the given patience and restores the best epoch (epoch 0 is the
/// untouched initialization, so training can never end worse than averaging).
inline FusionParams train_fusion(const Tensor& train_s, const Tensor& train_t,
                                 const Tensor& train_q, const Tensor& train_targets,
                                 const Tensor& val_s, const Tensor& val_t, const Tensor& val_q,
                                 const Tensor& val_targets, const QuantileSet& quantiles,
                                 RandomStream /*stream*/, FusionTrainConfig cfg = {}) {
  const std::size_t q = quantiles.size();
  FusionParams params = FusionParams::averaging(q);

  Tensor flat({q * 3 * q + q});
  std::copy(params.weight.data(), params.weight.data() + q * 3 * q, flat.data());
  std::copy(params.bias.data(), params.bias.data() + q, flat.data() + q * 3 * q);
  AdamConfig acfg;
  acfg.learning_rate = cfg.learning_rate;
  AdamState adam = AdamState::init(flat.shape(), acfg);

  auto unpack = [&](const Tensor& f) {
    FusionParams p;
    p.weight = Tensor({q, 3 * q});
    p.bias = Tensor({q});
    std::copy(f.data(), f.data() + q * 3 * q, p.weight.data());
    std::copy(f.data() + q * 3 * q, f.data() + q * 3 * q + q, p.bias.data());
    return p;
  };

  double best_val = detail::fusion_loss(val_s, val_t, val_q, val_targets, quantiles, params);
  Tensor best_flat = flat;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    FusionParams current = unpack(flat);
    detail::FusionGrad g =
        detail::fusion_grad(train_s, train_t, train_q, train_targets, quantiles, current);
    adam_step_inplace(flat, g.flat, adam);

    const double val =
        detail::fusion_loss(val_s, val_t, val_q, val_targets, quantiles, unpack(flat));
    if (val < best_val) {
      best_val = val;
      best_flat = flat;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.patience) break;
    }
  }
  return unpack(best_flat);
}

}  // namespace qpace

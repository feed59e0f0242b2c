#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "qpace/tensor.hpp"

namespace qpace {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter vector. Moments share the parameter
/// shape; the step counter advances by exactly one per update.
struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t step = 0;
  AdamConfig config;

  static AdamState init(const std::vector<std::size_t>& param_shape, AdamConfig cfg = {}) {
    AdamState s;
    s.m = Tensor(param_shape);
    s.v = Tensor(param_shape);
    s.step = 0;
    s.config = cfg;
    return s;
  }
};

/// One bias-corrected Adam update:
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2,  t <- t+1
///   p <- p - lr * (m / (1-b1^t)) / sqrt(v / (1-b2^t) + eps)
inline void adam_step_inplace(Tensor& params, const Tensor& grads, AdamState& state) {
  require_same_shape(params, grads, "adam_step");
  require_same_shape(params, state.m, "adam_step moments");
  require_same_shape(params, state.v, "adam_step moments");
  grads.require_finite("adam_step gradients");

  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double m_corr = 1.0 - std::pow(c.beta1, t);
  const double v_corr = 1.0 - std::pow(c.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / m_corr;
    const double v_hat = state.v[i] / v_corr;
    params[i] -= c.learning_rate * m_hat / std::sqrt(v_hat + c.epsilon);
  }
  params.require_finite("adam_step parameters");
}

inline std::pair<Tensor, AdamState> adam_step(const Tensor& params, const Tensor& grads,
                                              const AdamState& state) {
  Tensor p = params;
  AdamState s = state;
  adam_step_inplace(p, grads, s);
  return {std::move(p), std::move(s)};
}

}  // namespace qpace

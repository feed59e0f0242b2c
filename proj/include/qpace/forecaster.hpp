#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qpace/loss.hpp"
#include "qpace/random.hpp"
#include "qpace/tensor.hpp"

namespace qpace {

enum class Architecture { linear, mlp };
enum class Sharing { shared, per_node };

/// Shape of the base multi-quantile forecaster. Each node's T_in history maps
/// to T_out * Q outputs; under `shared` one weight set serves every node,
/// under `per_node` each node owns a copy.
struct ModelSpec {
  Architecture architecture = Architecture::linear;
  std::size_t hidden = 32;  // mlp only
  std::size_t t_in = 12;
  std::size_t t_out = 12;
  std::size_t n_quantiles = 3;
  Sharing sharing = Sharing::shared;
  std::size_t n_nodes = 0;  // required for per_node

  std::size_t out_dim() const { return t_out * n_quantiles; }

  void validate() const {
    if (t_in == 0 || t_out == 0) throw ContractError("ModelSpec: t_in/t_out must be >= 1");
    if (n_quantiles == 0) throw ContractError("ModelSpec: need at least one quantile head");
    if (architecture == Architecture::mlp && hidden == 0) {
      throw ContractError("ModelSpec: mlp hidden width must be >= 1");
    }
    if (sharing == Sharing::per_node && n_nodes == 0) {
      throw ContractError("ModelSpec: per_node sharing requires n_nodes");
    }
  }
};

struct LayerDesc {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// All parameters in one flat tensor plus a layer catalog. The flat layout
/// keeps the optimizer and checkpoints trivial; layers are views.
struct ModelParams {
  ModelSpec spec;
  std::vector<LayerDesc> layers;
  Tensor flat;

  double* layer_data(std::size_t idx) { return flat.data() + layers[idx].offset; }
  const double* layer_data(std::size_t idx) const { return flat.data() + layers[idx].offset; }

  const LayerDesc& layer_named(const std::string& name) const {
    for (const auto& l : layers) {
      if (l.name == name) return l;
    }
    throw ContractError("ModelParams: no layer named " + name);
  }
};

namespace detail {

inline std::vector<LayerDesc> layer_catalog(const ModelSpec& spec) {
  const std::size_t copies = spec.sharing == Sharing::per_node ? spec.n_nodes : 1;
  auto with_copies = [&](std::vector<std::size_t> shape) {
    if (spec.sharing == Sharing::per_node) shape.insert(shape.begin(), copies);
    return shape;
  };
  std::vector<LayerDesc> layers;
  auto add = [&](const std::string& name, std::vector<std::size_t> shape) {
    LayerDesc d;
    d.name = name;
    d.shape = std::move(shape);
    d.size = Tensor::numel_of(d.shape);
    layers.push_back(std::move(d));
  };
  if (spec.architecture == Architecture::linear) {
    add("w", with_copies({spec.t_in, spec.out_dim()}));
    add("b", with_copies({spec.out_dim()}));
  } else {
    add("w1", with_copies({spec.t_in, spec.hidden}));
    add("b1", with_copies({spec.hidden}));
    add("w2", with_copies({spec.hidden, spec.out_dim()}));
    add("b2", with_copies({spec.out_dim()}));
  }
  std::size_t offset = 0;
  for (auto& l : layers) {
    l.offset = offset;
    offset += l.size;
  }
  return layers;
}

inline std::size_t total_size(const std::vector<LayerDesc>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.size;
  return n;
}

}  // namespace detail

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
inline ModelParams init_params(const ModelSpec& spec, RandomStream stream) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  p.layers = detail::layer_catalog(spec);
  p.flat = Tensor({detail::total_size(p.layers)});

  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const LayerDesc& d = p.layers[li];
    if (d.name[0] != 'w') continue;  // biases stay zero
    const std::size_t fan_in = d.shape[d.shape.size() - 2];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    RandomStream ls = stream.derive(d.name);
    double* out = p.layer_data(li);
    for (std::size_t i = 0; i < d.size; ++i) out[i] = ls.uniform(-bound, bound);
  }
  return p;
}

namespace detail {

/// Per-node forward: x is the node's T_in history, y receives out_dim values.
inline void node_forward(const ModelParams& p, const double* x, std::size_t node, double* y,
                         double* hidden_scratch) {
  const ModelSpec& s = p.spec;
  const std::size_t out_dim = s.out_dim();
  const std::size_t copy = s.sharing == Sharing::per_node ? node : 0;
  if (s.architecture == Architecture::linear) {
    const double* w = p.layer_data(0) + copy * s.t_in * out_dim;
    const double* b = p.layer_data(1) + copy * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) y[o] = b[o];
    for (std::size_t ti = 0; ti < s.t_in; ++ti) {
      const double xv = x[ti];
      const double* wrow = w + ti * out_dim;
      for (std::size_t o = 0; o < out_dim; ++o) y[o] += xv * wrow[o];
    }
  } else {
    const double* w1 = p.layer_data(0) + copy * s.t_in * s.hidden;
    const double* b1 = p.layer_data(1) + copy * s.hidden;
    const double* w2 = p.layer_data(2) + copy * s.hidden * out_dim;
    const double* b2 = p.layer_data(3) + copy * out_dim;
    double* h = hidden_scratch;
    for (std::size_t u = 0; u < s.hidden; ++u) h[u] = b1[u];
    for (std::size_t ti = 0; ti < s.t_in; ++ti) {
      const double xv = x[ti];
      const double* wrow = w1 + ti * s.hidden;
      for (std::size_t u = 0; u < s.hidden; ++u) h[u] += xv * wrow[u];
    }
    for (std::size_t u = 0; u < s.hidden; ++u) h[u] = std::tanh(h[u]);
    for (std::size_t o = 0; o < out_dim; ++o) y[o] = b2[o];
    for (std::size_t u = 0; u < s.hidden; ++u) {
      const double hv = h[u];
      const double* wrow = w2 + u * out_dim;
      for (std::size_t o = 0; o < out_dim; ++o) y[o] += hv * wrow[o];
    }
  }
}

inline std::vector<std::size_t> identity_columns(std::size_t n) {
  std::vector<std::size_t> cols(n);
  for (std::size_t i = 0; i < n; ++i) cols[i] = i;
  return cols;
}

}  // namespace detail

/// input: [T_in, N_active] -> predictions [T_out, N_active, Q].
/// `column_nodes` maps input columns to original node ids; empty means
/// identity. Only per_node sharing reads it.
inline Tensor forward(const ModelParams& p, const Tensor& input,
                      const std::vector<std::size_t>& column_nodes = {}) {
  const ModelSpec& s = p.spec;
  if (input.rank() != 2 || input.dim(0) != s.t_in) {
    throw ContractError("forward: input must be [T_in, N_active], got " + shape_string(input));
  }
  const std::size_t n_active = input.dim(1);
  if (!column_nodes.empty() && column_nodes.size() != n_active) {
    throw ContractError("forward: column_nodes size mismatch");
  }

  Tensor out({s.t_out, n_active, s.n_quantiles});
  std::vector<double> x(s.t_in), y(s.out_dim());
  std::vector<double> h(s.architecture == Architecture::mlp ? s.hidden : 0);
  for (std::size_t c = 0; c < n_active; ++c) {
    const std::size_t node = column_nodes.empty() ? c : column_nodes[c];
    for (std::size_t ti = 0; ti < s.t_in; ++ti) x[ti] = input[ti * n_active + c];
    detail::node_forward(p, x.data(), node, y.data(), h.data());
    for (std::size_t t = 0; t < s.t_out; ++t) {
      for (std::size_t k = 0; k < s.n_quantiles; ++k) {
        out[(t * n_active + c) * s.n_quantiles + k] = y[t * s.n_quantiles + k];
      }
    }
  }
  out.require_finite("forward");
  return out;
}

/// inputs: [B, T_in, N_active] -> [B, T_out, N_active, Q].
inline Tensor forward_batch(const ModelParams& p, const Tensor& inputs,
                            const std::vector<std::size_t>& column_nodes = {}) {
  if (inputs.rank() != 3) throw ContractError("forward_batch: inputs must be [B, T_in, N]");
  const std::size_t batch = inputs.dim(0);
  const std::size_t t_in = inputs.dim(1);
  const std::size_t n_active = inputs.dim(2);
  Tensor out({batch, p.spec.t_out, n_active, p.spec.n_quantiles});
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor one({t_in, n_active});
    std::copy(inputs.data() + b * t_in * n_active, inputs.data() + (b + 1) * t_in * n_active,
              one.data());
    Tensor pred = forward(p, one, column_nodes);
    std::copy(pred.data(), pred.data() + pred.size(), out.data() + b * pred.size());
  }
  return out;
}

/// Sort the quantile heads ascending at every (t, n) so the reported curves
/// cannot cross. Applied at evaluation only.
inline Tensor sort_quantile_heads(const Tensor& predictions) {
  if (predictions.rank() < 1) throw ContractError("sort_quantile_heads: empty tensor");
  const std::size_t q = predictions.shape().back();
  Tensor out = predictions;
  for (std::size_t base = 0; base + q <= out.size(); base += q) {
    std::sort(out.data() + base, out.data() + base + q);
  }
  return out;
}

struct BatchGrad {
  Tensor grads;            // same layout as ModelParams::flat
  double loss = 0.0;       // masked objective over the batch
  double weight_sum = 0.0;
  bool any_active = false;
};

/// Exact gradient of the masked quantile objective composed with forward.
///   inputs  [B, T_in, Na], targets [B, T_out, Na], vweights [B, Na, Q]
/// Loss per (b, c, k) is pinball averaged over the horizon at level
/// `levels[k]`; entries are weighted by vweights and, when `normalize` is
/// set, the total is divided by the weight sum. Ties at the pinball kink
/// follow the y_hat <= y branch.
inline BatchGrad backward(const ModelParams& p, const Tensor& inputs, const Tensor& targets,
                          const Tensor& vweights, const std::vector<double>& levels,
                          const std::vector<std::size_t>& column_nodes = {},
                          bool normalize = true) {
  const ModelSpec& s = p.spec;
  if (inputs.rank() != 3 || targets.rank() != 3 || vweights.rank() != 3) {
    throw ContractError("backward: inputs [B,T_in,N], targets [B,T_out,N], vweights [B,N,Q]");
  }
  const std::size_t batch = inputs.dim(0);
  const std::size_t n_active = inputs.dim(2);
  if (inputs.dim(1) != s.t_in || targets.dim(1) != s.t_out || targets.dim(0) != batch ||
      targets.dim(2) != n_active || vweights.dim(0) != batch || vweights.dim(1) != n_active ||
      vweights.dim(2) != s.n_quantiles || levels.size() != s.n_quantiles) {
    throw ContractError("backward: shape mismatch");
  }

  BatchGrad out;
  out.grads = Tensor(p.flat.shape());

  // Pass 1: the weight sum fixes the normalization constant.
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < vweights.size(); ++i) weight_sum += vweights[i];
  out.weight_sum = weight_sum;
  out.any_active = weight_sum > 0.0;
  const double scale = normalize ? (out.any_active ? 1.0 / weight_sum : 0.0) : 1.0;
  const double horizon_inv = 1.0 / static_cast<double>(s.t_out);

  const std::size_t out_dim = s.out_dim();
  std::vector<double> x(s.t_in), y(out_dim), dy(out_dim);
  std::vector<double> h(s.architecture == Architecture::mlp ? s.hidden : 0);
  std::vector<double> dpre(s.architecture == Architecture::mlp ? s.hidden : 0);

  double loss_num = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < n_active; ++c) {
      const std::size_t node = column_nodes.empty() ? c : column_nodes[c];
      for (std::size_t ti = 0; ti < s.t_in; ++ti) {
        x[ti] = inputs[(b * s.t_in + ti) * n_active + c];
      }
      detail::node_forward(p, x.data(), node, y.data(), h.data());

      bool column_active = false;
      for (std::size_t o = 0; o < out_dim; ++o) dy[o] = 0.0;
      for (std::size_t k = 0; k < s.n_quantiles; ++k) {
        const double vw = vweights[(b * n_active + c) * s.n_quantiles + k];
        if (vw == 0.0) continue;
        column_active = true;
        const double alpha = levels[k];
        double node_loss = 0.0;
        for (std::size_t t = 0; t < s.t_out; ++t) {
          const double yt = targets[(b * s.t_out + t) * n_active + c];
          const double yh = y[t * s.n_quantiles + k];
          node_loss += pinball(yt, yh, alpha);
          dy[t * s.n_quantiles + k] = vw * scale * horizon_inv * pinball_subgrad(yt, yh, alpha);
        }
        loss_num += vw * node_loss * horizon_inv;
      }
      if (!column_active) continue;

      const std::size_t copy = s.sharing == Sharing::per_node ? node : 0;
      if (s.architecture == Architecture::linear) {
        double* gw = out.grads.data() + p.layers[0].offset + copy * s.t_in * out_dim;
        double* gb = out.grads.data() + p.layers[1].offset + copy * out_dim;
        for (std::size_t o = 0; o < out_dim; ++o) gb[o] += dy[o];
        for (std::size_t ti = 0; ti < s.t_in; ++ti) {
          const double xv = x[ti];
          double* grow = gw + ti * out_dim;
          for (std::size_t o = 0; o < out_dim; ++o) grow[o] += xv * dy[o];
        }
      } else {
        const double* w2 = p.layer_data(2) + copy * s.hidden * out_dim;
        double* gw1 = out.grads.data() + p.layers[0].offset + copy * s.t_in * s.hidden;
        double* gb1 = out.grads.data() + p.layers[1].offset + copy * s.hidden;
        double* gw2 = out.grads.data() + p.layers[2].offset + copy * s.hidden * out_dim;
        double* gb2 = out.grads.data() + p.layers[3].offset + copy * out_dim;

        for (std::size_t o = 0; o < out_dim; ++o) gb2[o] += dy[o];
        for (std::size_t u = 0; u < s.hidden; ++u) {
          const double hv = h[u];
          double* grow = gw2 + u * out_dim;
          double acc = 0.0;
          const double* wrow = w2 + u * out_dim;
          for (std::size_t o = 0; o < out_dim; ++o) {
            grow[o] += hv * dy[o];
            acc += wrow[o] * dy[o];
          }
          dpre[u] = acc * (1.0 - hv * hv);  // through tanh
        }
        for (std::size_t u = 0; u < s.hidden; ++u) gb1[u] += dpre[u];
        for (std::size_t ti = 0; ti < s.t_in; ++ti) {
          const double xv = x[ti];
          double* grow = gw1 + ti * s.hidden;
          for (std::size_t u = 0; u < s.hidden; ++u) grow[u] += xv * dpre[u];
        }
      }
    }
  }

  out.loss = normalize ? (out.any_active ? loss_num / weight_sum : 0.0) : loss_num;
  out.grads.require_finite("backward gradients");
  return out;
}

}  // namespace qpace

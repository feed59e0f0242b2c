#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "qpace/loss.hpp"
#include "qpace/tensor.hpp"

namespace qpace {

/// Group difficulty: each view averages the loss tensor over the other two
/// axes. spatial[i] over (window, quantile); temporal[j] over (node,
/// quantile); quantile[k] over (node, window).
struct DifficultyScores {
  std::vector<double> spatial;
  std::vector<double> temporal;
  std::vector<double> quantile;
};

inline DifficultyScores score_groups(const LossTensor& loss) {
  loss.values.require_finite("score_groups");
  const std::size_t n = loss.nodes();
  const std::size_t w = loss.windows();
  const std::size_t q = loss.quantiles();
  DifficultyScores s;
  s.spatial.assign(n, 0.0);
  s.temporal.assign(w, 0.0);
  s.quantile.assign(q, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t k = 0; k < q; ++k) {
        const double l = loss.at(i, j, k);
        s.spatial[i] += l;
        s.temporal[j] += l;
        s.quantile[k] += l;
      }
    }
  }
  for (double& v : s.spatial) v /= static_cast<double>(w * q);
  for (double& v : s.temporal) v /= static_cast<double>(n * q);
  for (double& v : s.quantile) v /= static_cast<double>(n * w);
  return s;
}

/// Dense indicator of the instance-level rule: v = 1 iff l < lambda (strict).
inline Tensor instance_mask(const LossTensor& loss, double lambda) {
  if (!(lambda > 0.0)) throw ContractError("instance_mask: lambda must be > 0");
  Tensor v(loss.values.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = loss.values[i] < lambda ? 1.0 : 0.0;
  return v;
}

/// Indices with score strictly below the threshold. May be empty; the caller
/// reacts by advancing the pace.
inline std::vector<std::size_t> threshold_set(const std::vector<double>& scores, double lambda) {
  std::vector<std::size_t> included;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] < lambda) included.push_back(i);
  }
  return included;
}

inline std::vector<std::size_t> spatial_mask(const std::vector<double>& spatial_scores,
                                             double lambda_s) {
  return threshold_set(spatial_scores, lambda_s);
}

inline std::vector<std::size_t> temporal_mask(const std::vector<double>& temporal_scores,
                                              double lambda_t) {
  return threshold_set(temporal_scores, lambda_t);
}

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value. p >= 100
/// returns +infinity so a saturated pace admits every group under the strict
/// comparison.
inline double nearest_rank_percentile(std::vector<double> scores, double p) {
  if (scores.empty()) throw ContractError("nearest_rank_percentile: empty scores");
  if (p >= 100.0) return std::numeric_limits<double>::infinity();
  if (p < 0.0) throw ContractError("nearest_rank_percentile: p must be >= 0");
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  if (rank == 0) rank = 1;
  if (rank > scores.size()) rank = scores.size();
  return scores[rank - 1];
}

/// Per-head schedule: training levels move linearly from `start` to `target`
/// as the pace percentile saturates.
struct QuantileSchedule {
  std::vector<double> start;
  std::vector<double> target;

  static QuantileSchedule defaults() { return {{0.02, 0.5, 0.98}, {0.1, 0.5, 0.9}}; }
  static QuantileSchedule pinned(const std::vector<double>& levels) { return {levels, levels}; }

  void validate() const {
    if (start.size() != target.size() || start.empty()) {
      throw ConfigError("quantile schedule: start/target length mismatch");
    }
    for (std::size_t k = 0; k < start.size(); ++k) {
      if (!(start[k] > 0.0 && start[k] < 1.0 && target[k] > 0.0 && target[k] < 1.0)) {
        throw ConfigError("quantile schedule: levels must lie in (0,1)");
      }
    }
  }
};

enum class View { spatial, temporal, quantile };

inline const char* view_name(View v) {
  switch (v) {
    case View::spatial: return "spatial";
    case View::temporal: return "temporal";
    default: return "quantile";
  }
}

/// Pace of the three schedulers. Percentiles and thresholds only ever move
/// up; the quantile progress is derived from the quantile percentile so the
/// schedule hits its target exactly when the percentile saturates.
struct PaceState {
  double lambda_s = 0.0;
  double lambda_t = 0.0;
  double lambda_q = 0.0;
  std::size_t mu_s = 300;
  std::size_t mu_t = 300;
  std::size_t mu_q = 300;
  double p_s = 30.0;
  double p_t = 30.0;
  double p_q = 30.0;
  double p0 = 30.0;
  double delta_p = 10.0;
  QuantileSchedule schedule = QuantileSchedule::defaults();

  double progress() const {
    if (p0 >= 100.0) return 1.0;
    const double fraction = (p_q - p0) / (100.0 - p0);
    return std::clamp(fraction, 0.0, 1.0);
  }

  double lambda_of(View v) const {
    return v == View::spatial ? lambda_s : v == View::temporal ? lambda_t : lambda_q;
  }
  double percentile_of(View v) const {
    return v == View::spatial ? p_s : v == View::temporal ? p_t : p_q;
  }
  std::size_t mu_of(View v) const {
    return v == View::spatial ? mu_s : v == View::temporal ? mu_t : mu_q;
  }
};

struct QuantileWeights {
  std::vector<double> level;   // effective training level per head
  std::vector<double> weight;  // 1 if the head is active this phase, else 0
};

/// Effective levels interpolate start -> target by pace progress; heads whose
/// difficulty score is not yet under lambda_q are gated off.
inline QuantileWeights quantile_weights(const PaceState& state,
                                        const std::vector<double>& quantile_scores) {
  state.schedule.validate();
  if (quantile_scores.size() != state.schedule.start.size()) {
    throw ContractError("quantile_weights: score/schedule length mismatch");
  }
  const double progress = state.progress();
  QuantileWeights out;
  out.level.resize(quantile_scores.size());
  out.weight.resize(quantile_scores.size());
  for (std::size_t k = 0; k < quantile_scores.size(); ++k) {
    // endpoints are exact so a saturated schedule matches the target levels
    // bit for bit
    if (progress >= 1.0) {
      out.level[k] = state.schedule.target[k];
    } else if (progress <= 0.0) {
      out.level[k] = state.schedule.start[k];
    } else {
      out.level[k] = state.schedule.start[k] +
                     progress * (state.schedule.target[k] - state.schedule.start[k]);
    }
    out.weight[k] = quantile_scores[k] < state.lambda_q ? 1.0 : 0.0;
  }
  return out;
}

/// One pace step for a single view: the threshold moves to the current
/// percentile of the fresh scores (never downward), then the percentile
/// advances by delta_p.
inline PaceState advance_view(PaceState state, View view, const std::vector<double>& scores) {
  const double p = state.percentile_of(view);
  const double lambda = std::max(state.lambda_of(view), nearest_rank_percentile(scores, p));
  const double next_p = std::min(100.0, p + state.delta_p);
  switch (view) {
    case View::spatial:
      state.lambda_s = lambda;
      state.p_s = next_p;
      break;
    case View::temporal:
      state.lambda_t = lambda;
      state.p_t = next_p;
      break;
    case View::quantile:
      state.lambda_q = lambda;
      state.p_q = next_p;
      break;
  }
  return state;
}

/// Algorithm-style guard: view v acts only when `iteration` is a positive
/// multiple of its step size.
inline PaceState advance_pace(PaceState state, const DifficultyScores& scores,
                              std::size_t iteration) {
  if (iteration == 0) return state;
  if (state.mu_s > 0 && iteration % state.mu_s == 0) {
    state = advance_view(state, View::spatial, scores.spatial);
  }
  if (state.mu_t > 0 && iteration % state.mu_t == 0) {
    state = advance_view(state, View::temporal, scores.temporal);
  }
  if (state.mu_q > 0 && iteration % state.mu_q == 0) {
    state = advance_view(state, View::quantile, scores.quantile);
  }
  return state;
}

/// Factored indicator tensor: excluded nodes and windows zero whole slabs;
/// the remaining entries carry the per-quantile weight.
struct CurriculumMask {
  std::vector<std::size_t> nodes;    // included node ids, ascending
  std::vector<std::size_t> windows;  // included positions in the window list, ascending
  std::vector<double> head_weight;   // 0/1 per quantile head
  std::vector<double> level;         // effective training level per head

  static CurriculumMask full(std::size_t n_nodes, std::size_t n_windows,
                             const std::vector<double>& levels) {
    CurriculumMask m;
    m.nodes.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) m.nodes[i] = i;
    m.windows.resize(n_windows);
    for (std::size_t j = 0; j < n_windows; ++j) m.windows[j] = j;
    m.head_weight.assign(levels.size(), 1.0);
    m.level = levels;
    return m;
  }

  bool empty() const { return nodes.empty() || windows.empty() || active_heads() == 0; }

  std::size_t active_heads() const {
    std::size_t c = 0;
    for (double w : head_weight) c += w > 0.0 ? 1 : 0;
    return c;
  }
};

/// Dense expansion of the factored mask over [N, W, Q]. With
/// `paper_quantile_weighting` the included heads carry their quantile level
/// instead of 1, mirroring the quantile scheduler rule literally.
inline Tensor dense_mask(const CurriculumMask& mask, std::size_t n_nodes, std::size_t n_windows,
                         bool paper_quantile_weighting = false) {
  const std::size_t q = mask.head_weight.size();
  std::vector<char> node_in(n_nodes, 0), window_in(n_windows, 0);
  for (std::size_t i : mask.nodes) node_in.at(i) = 1;
  for (std::size_t j : mask.windows) window_in.at(j) = 1;

  Tensor v({n_nodes, n_windows, q});
  for (std::size_t i = 0; i < n_nodes; ++i) {
    for (std::size_t j = 0; j < n_windows; ++j) {
      for (std::size_t k = 0; k < q; ++k) {
        double w = node_in[i] && window_in[j] ? mask.head_weight[k] : 0.0;
        if (paper_quantile_weighting && w > 0.0) w = mask.level[k];
        v[(i * n_windows + j) * q + k] = w;
      }
    }
  }
  return v;
}

/// Union of ascending index sets; curriculum inclusion only ever grows.
inline std::vector<std::size_t> merge_included(const std::vector<std::size_t>& previous,
                                               const std::vector<std::size_t>& fresh) {
  std::vector<std::size_t> merged;
  merged.reserve(previous.size() + fresh.size());
  std::set_union(previous.begin(), previous.end(), fresh.begin(), fresh.end(),
                 std::back_inserter(merged));
  return merged;
}

/// One row of the pace trace.
struct PaceEvent {
  std::size_t iteration = 0;
  View view = View::spatial;
  double percentile = 0.0;
  double lambda = 0.0;
  std::size_t included = 0;
  std::vector<double> levels;
};

}  // namespace qpace

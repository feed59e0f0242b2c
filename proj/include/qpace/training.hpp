#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qpace/adam.hpp"
#include "qpace/batching.hpp"
#include "qpace/curriculum.hpp"
#include "qpace/dataset.hpp"
#include "qpace/forecaster.hpp"
#include "qpace/fusion.hpp"
#include "qpace/loss.hpp"
#include "qpace/metrics.hpp"
#include "qpace/random.hpp"

namespace qpace {

enum class SchedulerKind { none, spatial, temporal, quantile, all };

inline const char* scheduler_name(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::none: return "none";
    case SchedulerKind::spatial: return "spatial";
    case SchedulerKind::temporal: return "temporal";
    case SchedulerKind::quantile: return "quantile";
    default: return "all";
  }
}

inline SchedulerKind scheduler_from_name(const std::string& name) {
  if (name == "none") return SchedulerKind::none;
  if (name == "spatial") return SchedulerKind::spatial;
  if (name == "temporal") return SchedulerKind::temporal;
  if (name == "quantile") return SchedulerKind::quantile;
  if (name == "all") return SchedulerKind::all;
  throw ConfigError("unknown scheduler '" + name + "'");
}

struct TrainConfig {
  ModelSpec model;
  std::vector<double> quantile_levels = {0.1, 0.5, 0.9};
  SplitSpec split;
  double learning_rate = 1e-3;
  int max_epochs = 100;
  int patience = 10;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
  SchedulerKind scheduler = SchedulerKind::none;
  // curriculum pace
  std::size_t mu_spatial = 300;
  std::size_t mu_temporal = 300;
  std::size_t mu_quantile = 300;
  double p0 = 30.0;
  double delta_p = 10.0;
  int warm_epochs = 5;  // E0
  QuantileSchedule quantile_schedule = QuantileSchedule::defaults();
  // evaluation
  std::vector<int> horizons = {3, 6, 12};
  bool noncrossing_eval = true;
  // keep the last epoch instead of the best-validation epoch (prefix runs)
  bool restore_best = true;

  QuantileSet quantiles() const { return QuantileSet(quantile_levels); }

  void validate() const {
    model.validate();
    split.validate();
    QuantileSet qs(quantile_levels);
    quantile_schedule.validate();
    if (quantile_schedule.start.size() != quantile_levels.size()) {
      throw ConfigError("quantile schedule length must match the quantile set");
    }
    if (model.n_quantiles != quantile_levels.size()) {
      throw ConfigError("model head count must match the quantile set");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (warm_epochs < 0) throw ConfigError("warm_epochs must be >= 0");
    if (!(p0 >= 0.0 && p0 <= 100.0)) throw ConfigError("p0 must lie in [0,100]");
    if (!(delta_p > 0.0)) throw ConfigError("delta_p must be > 0");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct RunReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<PaceEvent> pace_trace;
  MetricsReport metrics;
  double wall_seconds = 0.0;
};

struct TrainOutcome {
  ModelParams params;
  RunReport report;
};

/// Normalized series plus the window bookkeeping shared by every loop.
struct PreparedData {
  STDataset raw;
  STDataset normalized;
  NormStats stats;
  std::vector<std::size_t> windows;
  WindowSplit split;
};

inline PreparedData prepare_data(const STDataset& raw, const TrainConfig& cfg) {
  PreparedData d;
  d.raw = raw;
  d.windows = make_windows(raw, cfg.model.t_in, cfg.model.t_out);
  d.split = split_windows(d.windows, cfg.split);
  // Normalization sees exactly the rows the training windows touch.
  const std::size_t last_train_row = d.split.train.back() + cfg.model.t_out;
  d.stats = zscore_fit(raw, last_train_row + 1);
  d.normalized = zscore_apply(raw, d.stats);
  return d;
}

/// Model predictions for a list of windows: [W, T_out, N, Q] in normalized
/// units, every node included.
inline Tensor predict_windows(const ModelParams& params, const STDataset& normalized,
                              const std::vector<std::size_t>& starts) {
  const std::size_t n = normalized.nodes();
  const std::size_t t_out = params.spec.t_out;
  const std::size_t q = params.spec.n_quantiles;
  Tensor out({starts.size(), t_out, n, q});
  for (std::size_t w = 0; w < starts.size(); ++w) {
    Tensor pred = forward(params, window_input(normalized, starts[w], params.spec.t_in));
    std::copy(pred.data(), pred.data() + pred.size(), out.data() + w * pred.size());
  }
  return out;
}

/// Raw-unit targets for a list of windows: [W, T_out, N].
inline Tensor stack_targets(const STDataset& raw, const std::vector<std::size_t>& starts,
                            std::size_t t_out) {
  const std::size_t n = raw.nodes();
  Tensor out({starts.size(), t_out, n});
  for (std::size_t w = 0; w < starts.size(); ++w) {
    Tensor t = window_target(raw, starts[w], t_out);
    std::copy(t.data(), t.data() + t.size(), out.data() + w * t.size());
  }
  return out;
}

/// Metrics for already-denormalized predictions against raw targets.
inline MetricsReport evaluate_predictions(const Tensor& denorm_predictions,
                                          const Tensor& raw_targets, const TrainConfig& cfg) {
  Tensor preds =
      cfg.noncrossing_eval ? sort_quantile_heads(denorm_predictions) : denorm_predictions;
  return quantile_report(preds, raw_targets, cfg.quantiles(), cfg.horizons);
}

/// Evaluate a single model on the given windows (usually the test split).
inline MetricsReport evaluate_model(const ModelParams& params, const PreparedData& data,
                                    const TrainConfig& cfg,
                                    const std::vector<std::size_t>& starts) {
  Tensor preds = predict_windows(params, data.normalized, starts);
  Tensor denorm = zscore_invert(preds, data.stats, 2);
  Tensor targets = stack_targets(data.raw, starts, cfg.model.t_out);
  return evaluate_predictions(denorm, targets, cfg);
}

namespace detail {

/// Mean pinball on a window set in original units at the target levels; the
/// quantity watched by early stopping.
inline double validation_loss(const ModelParams& params, const PreparedData& data,
                              const TrainConfig& cfg, const std::vector<std::size_t>& starts) {
  Tensor preds = predict_windows(params, data.normalized, starts);
  Tensor denorm = zscore_invert(preds, data.stats, 2);
  Tensor targets = stack_targets(data.raw, starts, cfg.model.t_out);
  return mean_quantile_loss(denorm, targets, cfg.quantiles());
}

/// Loss tensor of the current model over the whole training split, computed
/// at the levels the model is actually training against.
inline LossTensor train_loss_tensor(const ModelParams& params, const PreparedData& data,
                                    const std::vector<double>& levels) {
  Tensor preds = predict_windows(params, data.normalized, data.split.train);
  Tensor targets = stack_targets(data.normalized, data.split.train, params.spec.t_out);
  // instance_loss_tensor wants a QuantileSet; levels here may be mid-schedule.
  return instance_loss_tensor(preds, targets, QuantileSet(levels));
}

struct LoopState {
  ModelParams params;
  AdamState adam;
  CurriculumMask mask;
  PaceState pace;
  bool curriculum_active = false;
  std::size_t cl_iteration = 0;  // optimizer steps since the curriculum began
  // early stopping
  double best_val = std::numeric_limits<double>::infinity();
  Tensor best_flat;
  int best_epoch = -1;
  int since_best = 0;
};

inline PaceState init_pace(const TrainConfig& cfg, const DifficultyScores& scores) {
  PaceState pace;
  pace.mu_s = cfg.mu_spatial;
  pace.mu_t = cfg.mu_temporal;
  pace.mu_q = cfg.mu_quantile;
  pace.p_s = pace.p_t = pace.p_q = cfg.p0;
  pace.p0 = cfg.p0;
  pace.delta_p = cfg.delta_p;
  pace.schedule = cfg.quantile_schedule;
  pace.lambda_s = nearest_rank_percentile(scores.spatial, cfg.p0);
  pace.lambda_t = nearest_rank_percentile(scores.temporal, cfg.p0);
  pace.lambda_q = nearest_rank_percentile(scores.quantile, cfg.p0);
  return pace;
}

/// Rebuild the scheduler's view of the mask from fresh scores. Inclusion
/// only grows: new threshold sets are merged into the previous ones. An
/// empty result advances the pace on the spot until something is included
/// (lambda reaches +inf at percentile 100, which admits every group).
inline void refresh_mask(LoopState& st, SchedulerKind kind, const DifficultyScores& scores,
                         std::vector<PaceEvent>* trace) {
  auto log_event = [&](View view, std::size_t included) {
    if (!trace) return;
    PaceEvent e;
    e.iteration = st.cl_iteration;
    e.view = view;
    e.percentile = st.pace.percentile_of(view);
    e.lambda = st.pace.lambda_of(view);
    e.included = included;
    e.levels = st.mask.level;
    trace->push_back(std::move(e));
  };

  if (kind == SchedulerKind::spatial) {
    std::vector<std::size_t> fresh = spatial_mask(scores.spatial, st.pace.lambda_s);
    while (fresh.empty()) {
      st.pace = advance_view(st.pace, View::spatial, scores.spatial);
      fresh = spatial_mask(scores.spatial, st.pace.lambda_s);
    }
    st.mask.nodes = merge_included(st.mask.nodes, fresh);
    log_event(View::spatial, st.mask.nodes.size());
  } else if (kind == SchedulerKind::temporal) {
    std::vector<std::size_t> fresh = temporal_mask(scores.temporal, st.pace.lambda_t);
    while (fresh.empty()) {
      st.pace = advance_view(st.pace, View::temporal, scores.temporal);
      fresh = temporal_mask(scores.temporal, st.pace.lambda_t);
    }
    st.mask.windows = merge_included(st.mask.windows, fresh);
    log_event(View::temporal, st.mask.windows.size());
  } else if (kind == SchedulerKind::quantile) {
    auto any_on = [](const QuantileWeights& qw) {
      for (double w : qw.weight) {
        if (w > 0.0) return true;
      }
      return false;
    };
    QuantileWeights qw = quantile_weights(st.pace, scores.quantile);
    while (!any_on(qw)) {
      st.pace = advance_view(st.pace, View::quantile, scores.quantile);
      qw = quantile_weights(st.pace, scores.quantile);
    }
    // heads never switch back off; levels follow the schedule
    for (std::size_t k = 0; k < qw.weight.size(); ++k) {
      st.mask.head_weight[k] = std::max(st.mask.head_weight[k], qw.weight[k]);
    }
    st.mask.level = qw.level;
    log_event(View::quantile, st.mask.active_heads());
  }
}

inline View view_of(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::spatial: return View::spatial;
    case SchedulerKind::temporal: return View::temporal;
    default: return View::quantile;
  }
}

/// The whole lifecycle for one model: optional warm phase, optional
/// single-view curriculum, early stopping on validation loss, best-epoch
/// restore. `kind` must be none/spatial/temporal/quantile here.
/// `restore_best=false` keeps the last epoch's parameters (used when the run
/// is a prefix of a longer one, i.e. the published warm start).
inline TrainOutcome train_single(const TrainConfig& cfg, const PreparedData& data,
                                 SchedulerKind kind) {
  const bool restore_best = cfg.restore_best;
  cfg.validate();
  if (kind == SchedulerKind::all) throw ContractError("train_single: kind must be a single view");

  const QuantileSet targets_q = cfg.quantiles();
  const std::size_t n_nodes = data.raw.nodes();
  const std::size_t n_train = data.split.train.size();

  RandomStream root(cfg.seed);
  LoopState st;
  st.params = init_params(cfg.model, root.derive("init"));
  AdamConfig acfg;
  acfg.learning_rate = cfg.learning_rate;
  st.adam = AdamState::init(st.params.flat.shape(), acfg);
  st.mask = CurriculumMask::full(n_nodes, n_train, cfg.quantile_levels);
  st.best_flat = st.params.flat;

  RunReport report;
  report.variant = scheduler_name(kind);
  report.seed = cfg.seed;

  const auto t0 = std::chrono::steady_clock::now();
  const int warm = kind == SchedulerKind::none ? 0 : cfg.warm_epochs;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    // Curriculum switches on right after the warm phase.
    if (kind != SchedulerKind::none && !st.curriculum_active && epoch >= warm) {
      LossTensor warm_loss = train_loss_tensor(st.params, data, st.mask.level);
      DifficultyScores scores = score_groups(warm_loss);
      st.pace = init_pace(cfg, scores);
      st.curriculum_active = true;
      if (kind == SchedulerKind::quantile) st.mask.head_weight.assign(targets_q.size(), 0.0);
      if (kind == SchedulerKind::spatial) st.mask.nodes.clear();
      if (kind == SchedulerKind::temporal) st.mask.windows.clear();
      refresh_mask(st, kind, scores, &report.pace_trace);
    }

    RandomStream epoch_stream = root.derive("epoch", static_cast<std::uint64_t>(epoch));
    auto chunks = epoch_plan(data.split.train, st.mask, cfg.batch_size, epoch_stream);

    double loss_num = 0.0;
    double loss_den = 0.0;
    for (const auto& chunk : chunks) {
      Batch batch =
          gather_batch(data.normalized, chunk, st.mask.nodes, cfg.model.t_in, cfg.model.t_out);
      Tensor vw = batch_weights(st.mask, chunk.size(), st.mask.nodes.size());
      BatchGrad bg = backward(st.params, batch.inputs, batch.targets, vw, st.mask.level,
                              st.mask.nodes, /*normalize=*/true);
      adam_step_inplace(st.params.flat, bg.grads, st.adam);
      loss_num += bg.loss * bg.weight_sum;
      loss_den += bg.weight_sum;

      if (st.curriculum_active) {
        ++st.cl_iteration;
        const std::size_t mu = st.pace.mu_of(view_of(kind));
        if (mu > 0 && st.cl_iteration % mu == 0) {
          LossTensor fresh = train_loss_tensor(st.params, data, st.mask.level);
          DifficultyScores scores = score_groups(fresh);
          const std::vector<double>& view_scores = kind == SchedulerKind::spatial
                                                       ? scores.spatial
                                                       : kind == SchedulerKind::temporal
                                                             ? scores.temporal
                                                             : scores.quantile;
          st.pace = advance_view(st.pace, view_of(kind), view_scores);
          refresh_mask(st, kind, scores, &report.pace_trace);
        }
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_den > 0.0 ? loss_num / loss_den : 0.0;
    rec.val_loss = validation_loss(st.params, data, cfg, data.split.val);
    report.epochs.push_back(rec);

    if (rec.val_loss < st.best_val) {
      st.best_val = rec.val_loss;
      st.best_flat = st.params.flat;
      st.best_epoch = epoch;
      st.since_best = 0;
    } else {
      ++st.since_best;
      if (st.since_best >= cfg.patience) break;
    }
  }

  if (restore_best) st.params.flat = st.best_flat;
  report.best_epoch = st.best_epoch;
  report.best_val = st.best_val;
  report.metrics = evaluate_model(st.params, data, cfg, data.split.test);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  TrainOutcome out;
  out.params = std::move(st.params);
  out.report = std::move(report);
  return out;
}

}  // namespace detail

/// Plain quantile training on the full data, no curriculum.
inline TrainOutcome train_vanilla(const TrainConfig& cfg, const STDataset& raw) {
  PreparedData data = prepare_data(raw, cfg);
  return detail::train_single(cfg, data, SchedulerKind::none);
}

/// Warm start then a single-view self-paced curriculum.
inline TrainOutcome train_spl(const TrainConfig& cfg, const STDataset& raw, SchedulerKind kind) {
  if (kind != SchedulerKind::spatial && kind != SchedulerKind::temporal &&
      kind != SchedulerKind::quantile) {
    throw ContractError("train_spl: kind must be spatial, temporal or quantile");
  }
  PreparedData data = prepare_data(raw, cfg);
  return detail::train_single(cfg, data, kind);
}

/// Warm start published on its own: the model after E0 full-data epochs plus
/// the pace thresholds implied by its training-set difficulty scores.
struct WarmStartResult {
  ModelParams params;
  PaceState pace;
  DifficultyScores scores;
};

inline WarmStartResult warm_start(const TrainConfig& cfg, const STDataset& raw) {
  PreparedData data = prepare_data(raw, cfg);

  WarmStartResult out;
  if (cfg.warm_epochs == 0) {
    RandomStream root(cfg.seed);
    out.params = init_params(cfg.model, root.derive("init"));
  } else {
    TrainConfig warm_cfg = cfg;
    warm_cfg.scheduler = SchedulerKind::none;
    warm_cfg.max_epochs = cfg.warm_epochs;
    warm_cfg.patience = cfg.warm_epochs + 1;  // the prefix never early-stops
    warm_cfg.restore_best = false;  // this model is a prefix of a longer run
    TrainOutcome warm = detail::train_single(warm_cfg, data, SchedulerKind::none);
    out.params = std::move(warm.params);
  }
  LossTensor loss = detail::train_loss_tensor(out.params, data, cfg.quantile_levels);
  out.scores = score_groups(loss);
  out.pace = detail::init_pace(cfg, out.scores);
  return out;
}

struct StqclOutcome {
  TrainOutcome spatial;
  TrainOutcome temporal;
  TrainOutcome quantile;
  FusionParams fusion;
  RunReport report;  // the fused run: merged trace, fused test metrics
};

/// The full pipeline: one warm start shared by construction (all experts use
/// the same seed, init and warm-phase stream), three single-view experts,
/// then the stacking head fitted on their frozen outputs.
inline StqclOutcome train_stqcl(const TrainConfig& cfg, const STDataset& raw) {
  PreparedData data = prepare_data(raw, cfg);

  StqclOutcome out;
  out.spatial = detail::train_single(cfg, data, SchedulerKind::spatial);
  out.temporal = detail::train_single(cfg, data, SchedulerKind::temporal);
  out.quantile = detail::train_single(cfg, data, SchedulerKind::quantile);

  const QuantileSet qs = cfg.quantiles();
  const auto t0 = std::chrono::steady_clock::now();

  // Frozen expert outputs, normalized space.
  Tensor tr_s = predict_windows(out.spatial.params, data.normalized, data.split.train);
  Tensor tr_t = predict_windows(out.temporal.params, data.normalized, data.split.train);
  Tensor tr_q = predict_windows(out.quantile.params, data.normalized, data.split.train);
  Tensor tr_y = stack_targets(data.normalized, data.split.train, cfg.model.t_out);

  Tensor va_s = predict_windows(out.spatial.params, data.normalized, data.split.val);
  Tensor va_t = predict_windows(out.temporal.params, data.normalized, data.split.val);
  Tensor va_q = predict_windows(out.quantile.params, data.normalized, data.split.val);
  Tensor va_y = stack_targets(data.normalized, data.split.val, cfg.model.t_out);

  RandomStream root(cfg.seed);
  FusionTrainConfig fcfg;
  fcfg.patience = cfg.patience;
  out.fusion = train_fusion(tr_s, tr_t, tr_q, tr_y, va_s, va_t, va_q, va_y, qs,
                            root.derive("fusion"), fcfg);

  // Fused test metrics.
  Tensor te_s = predict_windows(out.spatial.params, data.normalized, data.split.test);
  Tensor te_t = predict_windows(out.temporal.params, data.normalized, data.split.test);
  Tensor te_q = predict_windows(out.quantile.params, data.normalized, data.split.test);
  Tensor fused = fuse(te_s, te_t, te_q, out.fusion);
  Tensor denorm = zscore_invert(fused, data.stats, 2);
  Tensor targets = stack_targets(data.raw, data.split.test, cfg.model.t_out);

  RunReport report;
  report.variant = "all";
  report.seed = cfg.seed;
  report.metrics = evaluate_predictions(denorm, targets, cfg);
  // epoch histories and traces of the experts, concatenated for the audit log
  for (const TrainOutcome* expert : {&out.spatial, &out.temporal, &out.quantile}) {
    for (const auto& e : expert->report.pace_trace) report.pace_trace.push_back(e);
  }
  report.epochs = out.spatial.report.epochs;
  report.best_epoch = out.spatial.report.best_epoch;
  // the fused validation loss is what seed comparisons read
  Tensor va_fused = fuse(va_s, va_t, va_q, out.fusion);
  Tensor va_denorm = zscore_invert(va_fused, data.stats, 2);
  Tensor va_raw = stack_targets(data.raw, data.split.val, cfg.model.t_out);
  report.best_val = mean_quantile_loss(va_denorm, va_raw, qs);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                            .count() +
                        out.spatial.report.wall_seconds + out.temporal.report.wall_seconds +
                        out.quantile.report.wall_seconds;
  out.report = std::move(report);
  return out;
}

/// Fused predictions for arbitrary windows, original units.
inline Tensor predict_fused(const StqclOutcome& stq, const PreparedData& data,
                            const std::vector<std::size_t>& starts) {
  Tensor s = predict_windows(stq.spatial.params, data.normalized, starts);
  Tensor t = predict_windows(stq.temporal.params, data.normalized, starts);
  Tensor q = predict_windows(stq.quantile.params, data.normalized, starts);
  Tensor fused = fuse(s, t, q, stq.fusion);
  return zscore_invert(fused, data.stats, 2);
}

}  // namespace qpace

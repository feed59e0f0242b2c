#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "qpace/dataset.hpp"
#include "qpace/efficiency.hpp"
#include "qpace/training.hpp"

namespace qpace {

/// Run configuration as read from the JSON config file. Every field has a
/// default; the manifest records the fully resolved values.
namespace config {

using nlohmann::ordered_json;

template <typename T>
T take(const ordered_json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

inline ordered_json section(const ordered_json& j, const char* name) {
  if (!j.contains(name)) return ordered_json::object();
  if (!j.at(name).is_object()) throw ConfigError(std::string("config section '") + name +
                                                 "' must be an object");
  return j.at(name);
}

inline SyntheticConfig synthetic_from_json(const ordered_json& j) {
  SyntheticConfig cfg;
  cfg.nodes = take<std::size_t>(j, "nodes", cfg.nodes);
  cfg.steps = take<std::size_t>(j, "steps", cfg.steps);
  cfg.period = take<std::size_t>(j, "period", cfg.period);
  cfg.amplitude = take<double>(j, "amplitude", cfg.amplitude);
  cfg.offset = take<double>(j, "offset", cfg.offset);
  cfg.noise_std = take<double>(j, "noise_std", cfg.noise_std);
  cfg.hard_node_fraction = take<double>(j, "hard_node_fraction", cfg.hard_node_fraction);
  cfg.hard_node_noise_multiplier =
      take<double>(j, "hard_node_noise_multiplier", cfg.hard_node_noise_multiplier);
  cfg.hard_time_fraction = take<double>(j, "hard_time_fraction", cfg.hard_time_fraction);
  cfg.shift_magnitude = take<double>(j, "shift_magnitude", cfg.shift_magnitude);
  cfg.seed = take<std::uint64_t>(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

inline ordered_json synthetic_to_json(const SyntheticConfig& cfg) {
  ordered_json j;
  j["nodes"] = cfg.nodes;
  j["steps"] = cfg.steps;
  j["period"] = cfg.period;
  j["amplitude"] = cfg.amplitude;
  j["offset"] = cfg.offset;
  j["noise_std"] = cfg.noise_std;
  j["hard_node_fraction"] = cfg.hard_node_fraction;
  j["hard_node_noise_multiplier"] = cfg.hard_node_noise_multiplier;
  j["hard_time_fraction"] = cfg.hard_time_fraction;
  j["shift_magnitude"] = cfg.shift_magnitude;
  j["seed"] = cfg.seed;
  return j;
}

inline TrainConfig train_from_json(const ordered_json& root) {
  TrainConfig cfg;

  const ordered_json model = section(root, "model");
  const std::string arch = take<std::string>(model, "architecture", "linear");
  if (arch == "linear") {
    cfg.model.architecture = Architecture::linear;
  } else if (arch == "mlp") {
    cfg.model.architecture = Architecture::mlp;
  } else {
    throw ConfigError("model.architecture must be 'linear' or 'mlp'");
  }
  cfg.model.hidden = take<std::size_t>(model, "hidden", cfg.model.hidden);
  cfg.model.t_in = take<std::size_t>(model, "t_in", cfg.model.t_in);
  cfg.model.t_out = take<std::size_t>(model, "t_out", cfg.model.t_out);
  const std::string sharing = take<std::string>(model, "sharing", "shared");
  if (sharing == "shared") {
    cfg.model.sharing = Sharing::shared;
  } else if (sharing == "per_node") {
    cfg.model.sharing = Sharing::per_node;
  } else {
    throw ConfigError("model.sharing must be 'shared' or 'per_node'");
  }

  cfg.quantile_levels = take<std::vector<double>>(root, "quantiles", cfg.quantile_levels);
  cfg.model.n_quantiles = cfg.quantile_levels.size();

  const ordered_json split = section(root, "split");
  cfg.split.train = take<double>(split, "train", cfg.split.train);
  cfg.split.val = take<double>(split, "val", cfg.split.val);
  cfg.split.test = take<double>(split, "test", cfg.split.test);

  const ordered_json train = section(root, "train");
  cfg.learning_rate = take<double>(train, "learning_rate", cfg.learning_rate);
  cfg.max_epochs = take<int>(train, "max_epochs", cfg.max_epochs);
  cfg.patience = take<int>(train, "patience", cfg.patience);
  cfg.batch_size = take<std::size_t>(train, "batch_size", cfg.batch_size);
  cfg.seed = take<std::uint64_t>(train, "seed", cfg.seed);
  cfg.mu_spatial = take<std::size_t>(train, "mu_spatial", cfg.mu_spatial);
  cfg.mu_temporal = take<std::size_t>(train, "mu_temporal", cfg.mu_temporal);
  cfg.mu_quantile = take<std::size_t>(train, "mu_quantile", cfg.mu_quantile);
  cfg.p0 = take<double>(train, "p0", cfg.p0);
  cfg.delta_p = take<double>(train, "delta_p", cfg.delta_p);
  cfg.warm_epochs = take<int>(train, "warm_epochs", cfg.warm_epochs);
  cfg.quantile_schedule.start =
      take<std::vector<double>>(train, "quantile_start", QuantileSchedule::defaults().start);
  cfg.quantile_schedule.target = cfg.quantile_levels;
  cfg.horizons = take<std::vector<int>>(train, "horizons", cfg.horizons);
  cfg.noncrossing_eval = take<bool>(train, "noncrossing_eval", cfg.noncrossing_eval);

  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline ordered_json train_to_json(const TrainConfig& cfg) {
  ordered_json root;
  ordered_json model;
  model["architecture"] = cfg.model.architecture == Architecture::linear ? "linear" : "mlp";
  model["hidden"] = cfg.model.hidden;
  model["t_in"] = cfg.model.t_in;
  model["t_out"] = cfg.model.t_out;
  model["sharing"] = cfg.model.sharing == Sharing::shared ? "shared" : "per_node";
  root["model"] = std::move(model);
  root["quantiles"] = cfg.quantile_levels;
  ordered_json split;
  split["train"] = cfg.split.train;
  split["val"] = cfg.split.val;
  split["test"] = cfg.split.test;
  root["split"] = std::move(split);
  ordered_json train;
  train["learning_rate"] = cfg.learning_rate;
  train["max_epochs"] = cfg.max_epochs;
  train["patience"] = cfg.patience;
  train["batch_size"] = cfg.batch_size;
  train["seed"] = cfg.seed;
  train["mu_spatial"] = cfg.mu_spatial;
  train["mu_temporal"] = cfg.mu_temporal;
  train["mu_quantile"] = cfg.mu_quantile;
  train["p0"] = cfg.p0;
  train["delta_p"] = cfg.delta_p;
  train["warm_epochs"] = cfg.warm_epochs;
  train["quantile_start"] = cfg.quantile_schedule.start;
  train["horizons"] = cfg.horizons;
  train["noncrossing_eval"] = cfg.noncrossing_eval;
  root["train"] = std::move(train);
  return root;
}

inline SimConfig sim_from_json(const ordered_json& j) {
  SimConfig cfg;
  cfg.nodes = take<std::size_t>(j, "nodes", cfg.nodes);
  cfg.batch_groups = take<std::size_t>(j, "batch_groups", cfg.batch_groups);
  cfg.hard_fraction = take<double>(j, "hard_fraction", cfg.hard_fraction);
  const std::string placement = take<std::string>(j, "placement", "independent");
  if (placement == "independent") {
    cfg.placement = PlacementMode::independent;
  } else if (placement == "node-correlated") {
    cfg.placement = PlacementMode::node_correlated;
  } else if (placement == "time-correlated") {
    cfg.placement = PlacementMode::time_correlated;
  } else {
    throw ConfigError("sim.placement must be independent, node-correlated or time-correlated");
  }
  cfg.iterations = take<std::size_t>(j, "iterations", cfg.iterations);
  cfg.seed = take<std::uint64_t>(j, "seed", cfg.seed);
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline ordered_json sim_to_json(const SimConfig& cfg) {
  ordered_json j;
  j["nodes"] = cfg.nodes;
  j["batch_groups"] = cfg.batch_groups;
  j["hard_fraction"] = cfg.hard_fraction;
  j["placement"] = placement_name(cfg.placement);
  j["iterations"] = cfg.iterations;
  j["seed"] = cfg.seed;
  return j;
}

inline ordered_json parse_file(const std::string& path) {
  const std::string text = read_text_file(path);
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  return j;
}

}  // namespace config
}  // namespace qpace

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpace/efficiency.hpp"
#include "qpace/forecaster.hpp"
#include "qpace/fusion.hpp"
#include "qpace/metrics.hpp"
#include "qpace/serialize.hpp"
#include "qpace/training.hpp"

namespace qpace {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string quantile_key(double level) {
  return "q" + std::to_string(static_cast<int>(std::lround(level * 100.0)));
}

// ---- metrics -------------------------------------------------------------

inline ordered_json metrics_to_json(const MetricsReport& report) {
  ordered_json out;
  for (const auto& row : report.rows) {
    ordered_json entry;
    entry["rmse"] = row.rmse;
    entry["mae"] = row.mae;
    entry["mape"] = row.mape_percent;
    for (std::size_t k = 0; k < report.quantile_levels.size(); ++k) {
      entry[quantile_key(report.quantile_levels[k])] = row.q_loss[k];
    }
    out[std::to_string(row.horizon)] = std::move(entry);
  }
  return out;
}

inline std::string metrics_to_csv(const MetricsReport& report) {
  std::string csv = "horizon,rmse,mae,mape";
  for (double level : report.quantile_levels) csv += "," + quantile_key(level);
  csv += "\n";
  for (const auto& row : report.rows) {
    csv += std::to_string(row.horizon);
    csv += "," + format_double(row.rmse);
    csv += "," + format_double(row.mae);
    csv += "," + format_double(row.mape_percent);
    for (double q : row.q_loss) csv += "," + format_double(q);
    csv += "\n";
  }
  return csv;
}

inline MetricsReport metrics_from_json(const ordered_json& j) {
  MetricsReport report;
  for (auto it = j.begin(); it != j.end(); ++it) {
    HorizonMetrics row;
    row.horizon = std::stoi(it.key());
    const auto& entry = it.value();
    row.rmse = entry.at("rmse").get<double>();
    row.mae = entry.at("mae").get<double>();
    row.mape_percent = entry.at("mape").get<double>();
    for (auto f = entry.begin(); f != entry.end(); ++f) {
      if (f.key().size() > 1 && f.key()[0] == 'q' && std::isdigit(f.key()[1])) {
        row.q_loss.push_back(f.value().get<double>());
        if (report.rows.empty()) {
          report.quantile_levels.push_back(std::stod(f.key().substr(1)) / 100.0);
        }
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---- run artifacts --------------------------------------------------------

inline std::string epochs_to_csv(const RunReport& report) {
  std::string csv = "epoch,train_loss,val_loss\n";
  for (const auto& e : report.epochs) {
    csv += std::to_string(e.epoch);
    csv += "," + format_double(e.train_loss);
    csv += "," + format_double(e.val_loss);
    csv += "\n";
  }
  return csv;
}

inline std::string pace_trace_to_csv(const std::vector<PaceEvent>& trace) {
  std::string csv = "iteration,view,percentile,lambda,included,levels\n";
  for (const auto& e : trace) {
    csv += std::to_string(e.iteration);
    csv += ",";
    csv += view_name(e.view);
    csv += "," + format_double(e.percentile);
    csv += "," + format_double(e.lambda);
    csv += "," + std::to_string(e.included);
    csv += ",";
    for (std::size_t k = 0; k < e.levels.size(); ++k) {
      if (k) csv += "|";
      csv += format_double(e.levels[k]);
    }
    csv += "\n";
  }
  return csv;
}

// ---- checkpoints ----------------------------------------------------------

inline ordered_json params_to_json(const ModelParams& params) {
  ordered_json j;
  j["format_version"] = 1;
  j["kind"] = "forecaster";
  j["architecture"] = params.spec.architecture == Architecture::linear ? "linear" : "mlp";
  j["sharing"] = params.spec.sharing == Sharing::shared ? "shared" : "per_node";
  j["t_in"] = params.spec.t_in;
  j["t_out"] = params.spec.t_out;
  j["hidden"] = params.spec.hidden;
  j["n_quantiles"] = params.spec.n_quantiles;
  j["n_nodes"] = params.spec.n_nodes;
  ordered_json layers = ordered_json::array();
  for (const auto& layer : params.layers) {
    ordered_json l;
    l["name"] = layer.name;
    l["shape"] = layer.shape;
    std::vector<double> values(params.flat.data() + layer.offset,
                               params.flat.data() + layer.offset + layer.size);
    l["values"] = values;
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline ModelParams params_from_json(const ordered_json& j) {
  if (j.at("format_version").get<int>() != 1 || j.at("kind").get<std::string>() != "forecaster") {
    throw ParseError("unsupported checkpoint format");
  }
  ModelSpec spec;
  spec.architecture = j.at("architecture").get<std::string>() == "linear" ? Architecture::linear
                                                                          : Architecture::mlp;
  spec.sharing =
      j.at("sharing").get<std::string>() == "shared" ? Sharing::shared : Sharing::per_node;
  spec.t_in = j.at("t_in").get<std::size_t>();
  spec.t_out = j.at("t_out").get<std::size_t>();
  spec.hidden = j.at("hidden").get<std::size_t>();
  spec.n_quantiles = j.at("n_quantiles").get<std::size_t>();
  spec.n_nodes = j.at("n_nodes").get<std::size_t>();

  ModelParams params = init_params(spec, RandomStream(0));
  for (const auto& l : j.at("layers")) {
    const std::string name = l.at("name").get<std::string>();
    const LayerDesc& desc = params.layer_named(name);
    std::vector<double> values = l.at("values").get<std::vector<double>>();
    if (values.size() != desc.size) {
      throw ParseError("checkpoint layer '" + name + "' has wrong size");
    }
    std::copy(values.begin(), values.end(), params.flat.data() + desc.offset);
  }
  return params;
}

inline ordered_json fusion_to_json(const FusionParams& params) {
  ordered_json j;
  j["format_version"] = 1;
  j["kind"] = "fusion";
  j["heads"] = params.heads();
  j["weight"] = params.weight.values();
  j["bias"] = params.bias.values();
  return j;
}

inline FusionParams fusion_from_json(const ordered_json& j) {
  if (j.at("format_version").get<int>() != 1 || j.at("kind").get<std::string>() != "fusion") {
    throw ParseError("unsupported fusion checkpoint format");
  }
  const std::size_t q = j.at("heads").get<std::size_t>();
  FusionParams p;
  p.weight = Tensor({q, 3 * q}, j.at("weight").get<std::vector<double>>());
  p.bias = Tensor({q}, j.at("bias").get<std::vector<double>>());
  return p;
}

// ---- efficiency -----------------------------------------------------------

inline std::string utilization_csv_header() {
  return "scheduler,mode,f,utilization_mean,utilization_std,wasted_fraction,throughput,"
         "iterations\n";
}

inline std::string utilization_to_csv_row(const UtilizationReport& r) {
  std::string csv = r.scheduler;
  csv += "," + r.placement;
  csv += "," + format_double(r.hard_fraction);
  csv += "," + format_double(r.utilization_mean);
  csv += "," + format_double(r.utilization_std);
  csv += "," + format_double(r.wasted_fraction_mean);
  csv += "," + format_double(r.throughput_mean);
  csv += "," + std::to_string(r.iterations);
  csv += "\n";
  return csv;
}

}  // namespace qpace

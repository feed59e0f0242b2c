// qpace: training engine and experiment harness for spatio-temporal quantile
// forecasting with self-paced group-level curricula.
//
// Subcommands:
//   gen-data   write a synthetic dataset CSV plus its manifest
//   train      train one variant (none|spatial|temporal|quantile|all)
//   compare    combine run directories into one table
//   sim-eff    batch-utilization simulation for the three scheduler kinds
//   gradcheck  finite-difference verification of the analytic gradients
//
// Exit codes: 0 ok, 1 I/O or dataset error, 2 config validation error,
// 3 tolerance failure (gradcheck).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpace/qpace.hpp"

namespace fs = std::filesystem;
using qpace::config::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitTolerance = 3;

std::string out_root_override(const std::string& path) {
  const char* root = std::getenv("QPACE_OUT_ROOT");
  if (!root || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw qpace::IoError("cannot create directory " + path + ": " + ec.message());
}

ordered_json dataset_stanza(const std::string& path) {
  const std::string bytes = qpace::read_text_file(path);
  ordered_json j;
  j["path"] = path;
  j["fingerprint"] = qpace::hex64(qpace::fnv1a_bytes(bytes));
  return j;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_path) {
  ordered_json root = qpace::config::parse_file(config_path);
  ordered_json dataset = qpace::config::section(root, "dataset");
  if (!dataset.contains("synthetic")) {
    throw qpace::ConfigError("gen-data requires a dataset.synthetic section");
  }
  qpace::SyntheticConfig cfg = qpace::config::synthetic_from_json(dataset.at("synthetic"));
  qpace::STDataset ds = qpace::generate_synthetic(cfg);

  const std::string out = out_root_override(out_path);
  ensure_dir(fs::path(out).parent_path().string().empty()
                 ? "."
                 : fs::path(out).parent_path().string());
  qpace::write_csv(ds, out);

  ordered_json manifest;
  manifest["tool"] = "qpace";
  manifest["version"] = qpace::kToolVersion;
  manifest["command"] = "gen-data";
  manifest["synthetic"] = qpace::config::synthetic_to_json(cfg);
  manifest["dataset"] = dataset_stanza(out);
  qpace::write_text_file(out + ".manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << out << " (" << ds.rows() << " rows, " << ds.nodes() << " nodes)\n";
  return kExitOk;
}

void write_run_report(const std::string& dir, const qpace::RunReport& report) {
  qpace::write_text_file(dir + "/epochs.csv", qpace::epochs_to_csv(report));
  qpace::write_text_file(dir + "/pace_trace.csv", qpace::pace_trace_to_csv(report.pace_trace));
  qpace::write_text_file(dir + "/metrics.json",
                         qpace::metrics_to_json(report.metrics).dump(2) + "\n");
  qpace::write_text_file(dir + "/metrics.csv", qpace::metrics_to_csv(report.metrics));
  // wall time lives apart so every other artifact is byte-stable
  ordered_json timing;
  timing["wall_seconds"] = report.wall_seconds;
  qpace::write_text_file(dir + "/timing.json", timing.dump(2) + "\n");
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& scheduler, std::int64_t seed_override,
              const std::string& out_dir) {
  ordered_json root = qpace::config::parse_file(config_path);
  qpace::TrainConfig cfg = qpace::config::train_from_json(root);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  cfg.scheduler = qpace::scheduler_from_name(scheduler);

  if (!fs::exists(data_path)) throw qpace::IoError("dataset not found: " + data_path);
  qpace::STDataset ds = qpace::load_csv(data_path);

  const std::string dir = out_root_override(out_dir);
  ensure_dir(dir);

  ordered_json manifest;
  manifest["tool"] = "qpace";
  manifest["version"] = qpace::kToolVersion;
  manifest["command"] = "train";
  manifest["variant"] = scheduler;
  manifest["seed"] = cfg.seed;
  manifest["dataset"] = dataset_stanza(data_path);
  manifest["config"] = qpace::config::train_to_json(cfg);
  qpace::write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");

  if (cfg.scheduler == qpace::SchedulerKind::all) {
    qpace::StqclOutcome out = qpace::train_stqcl(cfg, ds);
    write_run_report(dir, out.report);
    qpace::write_text_file(dir + "/checkpoint_spatial.json",
                           qpace::params_to_json(out.spatial.params).dump() + "\n");
    qpace::write_text_file(dir + "/checkpoint_temporal.json",
                           qpace::params_to_json(out.temporal.params).dump() + "\n");
    qpace::write_text_file(dir + "/checkpoint_quantile.json",
                           qpace::params_to_json(out.quantile.params).dump() + "\n");
    qpace::write_text_file(dir + "/checkpoint_fusion.json",
                           qpace::fusion_to_json(out.fusion).dump() + "\n");
  } else if (cfg.scheduler == qpace::SchedulerKind::none) {
    qpace::TrainOutcome out = qpace::train_vanilla(cfg, ds);
    write_run_report(dir, out.report);
    qpace::write_text_file(dir + "/checkpoint.json",
                           qpace::params_to_json(out.params).dump() + "\n");
  } else {
    qpace::TrainOutcome out = qpace::train_spl(cfg, ds, cfg.scheduler);
    write_run_report(dir, out.report);
    qpace::write_text_file(dir + "/checkpoint.json",
                           qpace::params_to_json(out.params).dump() + "\n");
  }
  std::cout << "run written to " << dir << "\n";
  return kExitOk;
}

struct LoadedRun {
  std::string variant;
  std::uint64_t seed = 0;
  qpace::MetricsReport metrics;
};

LoadedRun load_run(const std::string& dir) {
  LoadedRun run;
  ordered_json manifest = ordered_json::parse(qpace::read_text_file(dir + "/manifest.json"));
  run.variant = manifest.at("variant").get<std::string>();
  run.seed = manifest.at("seed").get<std::uint64_t>();
  ordered_json metrics = ordered_json::parse(qpace::read_text_file(dir + "/metrics.json"));
  run.metrics = qpace::metrics_from_json(metrics);
  return run;
}

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_path) {
  if (run_dirs.size() < 2) throw qpace::ConfigError("compare needs at least two run directories");
  std::vector<LoadedRun> runs;
  for (const auto& dir : run_dirs) runs.push_back(load_run(dir));

  // all runs must report the same horizons
  std::vector<int> horizons;
  for (const auto& row : runs.front().metrics.rows) horizons.push_back(row.horizon);
  for (const auto& run : runs) {
    std::vector<int> h;
    for (const auto& row : run.metrics.rows) h.push_back(row.horizon);
    if (h != horizons) throw qpace::ConfigError("compare: runs report different horizons");
  }
  const std::vector<double>& levels = runs.front().metrics.quantile_levels;

  // group seeds by variant
  std::vector<std::string> variants;
  for (const auto& run : runs) {
    if (std::find(variants.begin(), variants.end(), run.variant) == variants.end()) {
      variants.push_back(run.variant);
    }
  }

  struct Cell {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
  };
  auto metric_names = [&]() {
    std::vector<std::string> names = {"rmse", "mae", "mape"};
    for (double level : levels) names.push_back(qpace::quantile_key(level));
    return names;
  }();
  auto metric_value = [&](const qpace::HorizonMetrics& row, std::size_t m) {
    switch (m) {
      case 0: return row.rmse;
      case 1: return row.mae;
      case 2: return row.mape_percent;
      default: return row.q_loss.at(m - 3);
    }
  };

  // cells[variant][horizon][metric]
  std::vector<std::vector<std::vector<Cell>>> cells(
      variants.size(),
      std::vector<std::vector<Cell>>(horizons.size(),
                                     std::vector<Cell>(metric_names.size())));
  for (const auto& run : runs) {
    const std::size_t v =
        std::find(variants.begin(), variants.end(), run.variant) - variants.begin();
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const auto& row = run.metrics.row_for(horizons[h]);
      for (std::size_t m = 0; m < metric_names.size(); ++m) {
        Cell& c = cells[v][h][m];
        const double x = metric_value(row, m);
        c.mean += x;
        c.stddev += x * x;
        c.count += 1;
      }
    }
  }
  bool seed_groups = false;
  for (auto& per_variant : cells) {
    for (auto& per_horizon : per_variant) {
      for (Cell& c : per_horizon) {
        c.mean /= static_cast<double>(c.count);
        const double var =
            c.stddev / static_cast<double>(c.count) - c.mean * c.mean;
        c.stddev = var > 0.0 ? std::sqrt(var) : 0.0;
        if (c.count > 1) seed_groups = true;
      }
    }
  }

  std::string csv = "variant,horizon";
  for (const auto& name : metric_names) {
    csv += "," + name;
    if (seed_groups) csv += "," + name + "_std";
    csv += "," + name + "_winner";
  }
  csv += "\n";

  ordered_json jout = ordered_json::array();
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      csv += variants[v] + "," + std::to_string(horizons[h]);
      ordered_json jrow;
      jrow["variant"] = variants[v];
      jrow["horizon"] = horizons[h];
      for (std::size_t m = 0; m < metric_names.size(); ++m) {
        const Cell& c = cells[v][h][m];
        bool winner = true;
        for (std::size_t other = 0; other < variants.size(); ++other) {
          if (cells[other][h][m].mean < c.mean) winner = false;
        }
        csv += "," + qpace::format_double(c.mean);
        if (seed_groups) csv += "," + qpace::format_double(c.stddev);
        csv += winner ? ",1" : ",0";
        jrow[metric_names[m]] = c.mean;
        if (seed_groups) jrow[metric_names[m] + "_std"] = c.stddev;
        jrow[metric_names[m] + "_winner"] = winner;
      }
      csv += "\n";
      jout.push_back(std::move(jrow));
    }
  }

  const std::string out = out_root_override(out_path);
  qpace::write_text_file(out + ".csv", csv);
  qpace::write_text_file(out + ".json", jout.dump(2) + "\n");
  std::cout << "comparison written to " << out << ".csv\n";
  return kExitOk;
}

int cmd_sim_eff(const std::string& config_path, const std::string& out_path) {
  qpace::SimConfig base;
  if (!config_path.empty()) {
    ordered_json root = qpace::config::parse_file(config_path);
    base = qpace::config::sim_from_json(qpace::config::section(root, "sim"));
  }
  std::string csv = qpace::utilization_csv_header();
  for (auto scheduler : {qpace::SimScheduler::instance, qpace::SimScheduler::spatial_group,
                         qpace::SimScheduler::temporal_group}) {
    for (auto placement : {qpace::PlacementMode::independent,
                           qpace::PlacementMode::node_correlated,
                           qpace::PlacementMode::time_correlated}) {
      qpace::SimConfig cfg = base;
      cfg.placement = placement;
      csv += qpace::utilization_to_csv_row(qpace::simulate(cfg, scheduler));
    }
  }
  const std::string out = out_root_override(out_path);
  qpace::write_text_file(out, csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t configurations) {
  qpace::RandomStream root(seed);
  double worst = 0.0;
  std::size_t checked = 0;

  for (std::size_t trial = 0; trial < configurations; ++trial) {
    qpace::RandomStream ts = root.derive("trial", trial);
    qpace::ModelSpec spec;
    spec.architecture =
        ts.uniform() < 0.5 ? qpace::Architecture::linear : qpace::Architecture::mlp;
    spec.hidden = 2 + ts.index(6);
    spec.t_in = 2 + ts.index(5);
    spec.t_out = 1 + ts.index(3);
    spec.n_quantiles = 3;
    spec.sharing = ts.uniform() < 0.25 ? qpace::Sharing::per_node : qpace::Sharing::shared;
    const std::size_t n = 1 + ts.index(4);
    spec.n_nodes = n;

    const std::size_t batch = 1 + ts.index(3);
    qpace::ModelParams params = qpace::init_params(spec, ts.derive("init"));
    qpace::Tensor inputs({batch, spec.t_in, n});
    qpace::Tensor targets({batch, spec.t_out, n});
    qpace::Tensor vweights({batch, n, spec.n_quantiles});
    for (auto& v : inputs.values()) v = ts.uniform(-2.0, 2.0);
    for (auto& v : targets.values()) v = ts.uniform(-2.0, 2.0);
    for (auto& v : vweights.values()) v = ts.uniform() < 0.25 ? 0.0 : ts.uniform(0.1, 1.0);
    std::vector<double> levels = {0.1, 0.5, 0.9};

    // keep the finite-difference probe away from the pinball kinks
    qpace::Tensor preds = qpace::forward_batch(params, inputs);
    bool near_kink = false;
    for (std::size_t b = 0; b < batch && !near_kink; ++b) {
      for (std::size_t t = 0; t < spec.t_out && !near_kink; ++t) {
        for (std::size_t c = 0; c < n && !near_kink; ++c) {
          for (std::size_t k = 0; k < spec.n_quantiles; ++k) {
            const double y = targets[(b * spec.t_out + t) * n + c];
            const double yh = preds[((b * spec.t_out + t) * n + c) * spec.n_quantiles + k];
            if (std::fabs(yh - y) < 1e-3) {
              near_kink = true;
              break;
            }
          }
        }
      }
    }
    if (near_kink) continue;

    qpace::BatchGrad bg =
        qpace::backward(params, inputs, targets, vweights, levels, {}, true);
    auto objective = [&](const qpace::Tensor& flat) {
      qpace::ModelParams probe = params;
      probe.flat = flat;
      qpace::BatchGrad r = qpace::backward(probe, inputs, targets, vweights, levels, {}, true);
      return r.loss;
    };
    qpace::Tensor numeric = qpace::finite_diff_grad(objective, params.flat, 1e-5);
    qpace::GradCompare cmp = qpace::compare_gradients(bg.grads, numeric, 1e-4, 1e-7);
    worst = std::max(worst, cmp.max_rel);
    ++checked;
    if (!cmp.ok) {
      std::printf("gradcheck FAILED at configuration %zu: max rel err %.3e\n", trial,
                  cmp.max_rel);
      return kExitTolerance;
    }
  }
  std::printf("gradcheck ok: %zu configurations, max relative error %.3e (< 1e-4)\n", checked,
              worst);
  return checked >= 20 ? kExitOk : kExitTolerance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-paced curriculum training for spatio-temporal quantile forecasting"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, scheduler = "none";
  std::int64_t seed_override = -1;
  std::uint64_t gc_seed = 7;
  std::size_t gc_configs = 24;
  std::vector<std::string> run_dirs;

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset CSV");
  gen->add_option("--config", config_path, "config file with a dataset.synthetic section")
      ->required();
  gen->add_option("--out", out_path, "output CSV path")->required();

  CLI::App* train = app.add_subcommand("train", "train one variant and write a run directory");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--data", data_path, "dataset CSV")->required();
  train->add_option("--scheduler", scheduler, "none|spatial|temporal|quantile|all");
  train->add_option("--seed", seed_override, "override train.seed");
  train->add_option("--out", out_path, "run directory")->required();

  CLI::App* compare = app.add_subcommand("compare", "combine >= 2 run directories");
  compare->add_option("--runs", run_dirs, "run directories")->required()->expected(-2);
  compare->add_option("--out", out_path, "output path stem (.csv/.json appended)")->required();

  CLI::App* sim = app.add_subcommand("sim-eff", "batch-utilization simulation");
  sim->add_option("--config", config_path, "config file with a sim section");
  sim->add_option("--out", out_path, "output CSV path")->required();

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->add_option("--seed", gc_seed, "random seed");
  gc->add_option("--configurations", gc_configs, "number of random configurations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, out_path);
    if (train->parsed()) {
      return cmd_train(config_path, data_path, scheduler, seed_override, out_path);
    }
    if (compare->parsed()) return cmd_compare(run_dirs, out_path);
    if (sim->parsed()) return cmd_sim_eff(config_path, out_path);
    if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_configs);
  } catch (const qpace::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qpace::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const qpace::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const qpace::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

// Command-line front end: train, evaluate, baseline and compare runs.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime abort.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ecodrive/harness/run.hpp"

namespace fs = std::filesystem;
using namespace ecodrive;

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeAbort = 2;

struct Options {
  std::string config;
  std::vector<std::string> cycles;
  std::string units;
  std::string weights;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> workers;
  std::vector<std::string> checkpoints;
  std::string out;
  bool trace = false;
};

RunConfig build_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.cycles.empty()) cfg.cycles = o.cycles;
  if (!o.units.empty()) {
    try {
      cfg.units = parse_units(o.units);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.weights == "A" || o.weights == "a") cfg.weights = RewardWeights::set_a();
  else if (o.weights == "B" || o.weights == "b") cfg.weights = RewardWeights::set_b();
  else if (!o.weights.empty()) cfg.weights = load_weights_file(o.weights);
  if (o.seed) cfg.seed = *o.seed;
  if (o.episodes) cfg.schedule.episodes = *o.episodes;
  if (o.workers) cfg.schedule.workers = *o.workers;
  cfg.validate();
  for (const auto& c : cfg.cycles)
    if (!fs::exists(c)) throw ConfigError("drive cycle not found: " + c);
  return cfg;
}

// Cycles given together are driven back to back, in the order given.
DriveCycle joined_cycle(const RunConfig& cfg) {
  DriveCycle joined;
  for (const auto& c : load_cycles(cfg)) joined = concat_cycles(joined, c);
  return joined;
}

nn::Checkpoint load_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
  try {
    return nn::Checkpoint::load(path);
  } catch (const nn::CheckpointError& e) {
    throw ConfigError(e.what());
  }
}

void print_metrics(const std::string& label, const EpisodeMetrics& m) {
  std::cout << std::fixed << std::setprecision(4) << label << ": mpg " << m.mpg << ", accel RMSE " << m.accel_rmse
            << " m/s^2, shifts " << m.shifts << ", distance " << m.distance_mi << " mi, fuel " << m.fuel_gal
            << " gal, mean reward " << m.mean_reward << (m.crashed ? " (crashed)" : "") << '\n';
}

void write_single(const fs::path& out, const EpisodeResult& r) {
  fs::create_directories(out);
  std::ofstream metrics(out / "metrics.csv");
  metrics << EpisodeMetrics::csv_header() << '\n';
  r.metrics.write_csv_row(metrics);
  std::ofstream trace(out / "trace.csv");
  write_trace_csv(trace, r.trace);
}

int run_train(const Options& o) {
  RunConfig cfg = build_config(o);
  if (o.out.empty()) throw ConfigError("train needs --out");
  DriveCycle cycle = joined_cycle(cfg);
  std::cout << "training " << cfg.schedule.episodes << " episodes on " << cycle.name << " (" << cycle.size() << " s), seed "
            << cfg.seed << '\n';
  auto progress = [](const EpisodeMetrics& m, const LearnerLogRow& log) {
    std::cout << std::fixed << std::setprecision(3) << "episode " << std::setw(4) << m.episode << "  train return "
              << std::setw(9) << log.train_return << "  eval return " << std::setw(9) << m.total_reward << "  mpg "
              << std::setw(7) << m.mpg << "  rmse " << std::setw(6) << m.accel_rmse << "  shifts " << m.shifts << '\n'
              << std::flush;
  };
  TrainResult r = train_run(cfg, {cycle}, o.out, progress);
  std::cout << "checkpoint written to " << r.checkpoint.string() << '\n';
  return 0;
}

int run_evaluate(const Options& o) {
  RunConfig cfg = build_config(o);
  if (o.checkpoints.size() != 1) throw ConfigError("evaluate needs exactly one --checkpoint");
  nn::Checkpoint ck = load_checkpoint(o.checkpoints.front());
  EpisodeResult r;
  try {
    r = evaluate_run(cfg, joined_cycle(cfg), ck, !o.out.empty());
  } catch (const nn::CheckpointError& e) {
    throw ConfigError(e.what());
  }
  print_metrics("policy", r.metrics);
  if (!o.out.empty()) write_single(o.out, r);
  return 0;
}

int run_baseline(const Options& o) {
  RunConfig cfg = build_config(o);
  EpisodeResult r = baseline_run(cfg, joined_cycle(cfg), !o.out.empty());
  print_metrics("baseline", r.metrics);
  if (!o.out.empty()) write_single(o.out, r);
  return 0;
}

int run_compare(const Options& o) {
  RunConfig cfg = build_config(o);
  if (o.checkpoints.empty()) throw ConfigError("compare needs at least one --checkpoint");
  std::vector<std::pair<std::string, nn::Checkpoint>> policies;
  for (std::size_t i = 0; i < o.checkpoints.size(); ++i) {
    // LABEL=PATH, or a bare path labelled RL1, RL2, ...
    std::string spec = o.checkpoints[i], label = "RL" + std::to_string(i + 1), path = spec;
    if (auto eq = spec.find('='); eq != std::string::npos) {
      label = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    policies.emplace_back(label, load_checkpoint(path));
  }
  std::vector<ComparisonRow> rows;
  try {
    rows = compare_run(cfg, joined_cycle(cfg), policies);
  } catch (const nn::CheckpointError& e) {
    throw ConfigError(e.what());
  }
  write_comparison_table(std::cout, rows);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream csv(fs::path(o.out) / "comparison.csv");
    write_comparison_csv(csv, rows);
  }
  return 0;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "JSON run configuration");
  app->add_option("--cycle", o.cycles, "Drive-cycle CSV files, driven in the given order");
  app->add_option("--units", o.units, "Speed units of the cycle files")->check(CLI::IsMember({"mps", "mph"}));
  app->add_option("--weights", o.weights, "Reward weights: A, B or a JSON file");
  app->add_option("--seed", o.seed, "Run seed");
  app->add_option("--out", o.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eco-driving powertrain control with hybrid-action MPO"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a policy and log an evaluation after every episode");
  add_common(train, o);
  train->add_option("--episodes", o.episodes, "Training episodes")->check(CLI::NonNegativeNumber);
  train->add_option("--workers", o.workers, "Parallel rollout workers")->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Deterministic rollout of a checkpoint");
  add_common(evaluate, o);
  evaluate->add_option("--checkpoint", o.checkpoints, "Learner checkpoint")->required();

  auto* baseline = app.add_subcommand("baseline", "Rollout of the rule-based controller");
  add_common(baseline, o);

  auto* compare = app.add_subcommand("compare", "Baseline against one or more checkpoints");
  add_common(compare, o);
  compare->add_option("--checkpoint", o.checkpoints, "Checkpoints as PATH or LABEL=PATH")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*train) return run_train(o);
    if (*evaluate) return run_evaluate(o);
    if (*baseline) return run_baseline(o);
    return run_compare(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kRuntimeAbort;
  }
}

#pragma once

// Training, evaluation and comparison runs. All randomness is derived from
// the run seed, so a single-worker run is reproducible bit for bit.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ecodrive/harness/config_io.hpp"
#include "ecodrive/harness/episode.hpp"
#include "ecodrive/harness/metrics.hpp"
#include "ecodrive/mpo/learner.hpp"
#include "ecodrive/mpo/replay_buffer.hpp"

namespace ecodrive {

/// Raised when training produces a non-finite signal; a diagnostic dump is
/// written next to the metrics before it propagates.
class TrainingAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Independent 64-bit seed for (stream, index) under one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ stream) ^ index);
}

inline std::vector<DriveCycle> load_cycles(const RunConfig& cfg) {
  if (cfg.cycles.empty()) throw ConfigError("no drive cycle given");
  std::vector<DriveCycle> out;
  for (const auto& p : cfg.cycles) out.push_back(load_cycle(p, cfg.units));
  return out;
}

inline EpisodeResult run_controller(const RunConfig& cfg, const DriveCycle& cycle, Controller& controller, bool trace = false) {
  EpisodeOptions opt = cfg.episode;
  opt.randomize_lead = false;
  opt.record_trace = trace;
  opt.record_transitions = false;
  return run_episode(cycle, controller, cfg.vehicle, cfg.weights, cfg.idm_for(cycle), opt);
}

inline EpisodeResult baseline_run(const RunConfig& cfg, const DriveCycle& cycle, bool trace = false) {
  BaselineController controller(cfg.vehicle, cfg.baseline);
  return run_controller(cfg, cycle, controller, trace);
}

/// Deterministic rollout of a learner checkpoint: Gaussian mean, most
/// probable gear command.
inline EpisodeResult evaluate_run(const RunConfig& cfg, const DriveCycle& cycle, const nn::Checkpoint& ck, bool trace = false) {
  PolicyController controller(load_actor(ck), true, 0);
  return run_controller(cfg, cycle, controller, trace);
}

struct LearnerLogRow {
  int episode = 0;
  int updates = 0;
  double train_return = 0.0;
  LearnerStats last;

  static const char* csv_header() {
    return "episode,updates,train_return,critic_loss,temperature,mean_q,kl_mean,kl_stddev,kl_discrete,alpha_mean,alpha_stddev,"
           "alpha_discrete";
  }
  void write_csv_row(std::ostream& out) const {
    out << episode << ',' << updates << ',' << std::setprecision(17) << train_return << ',' << last.critic_loss << ','
        << last.temperature << ',' << last.mean_q << ',' << last.mstep.kl_mean << ',' << last.mstep.kl_stddev << ','
        << last.mstep.kl_discrete << ',' << last.alpha.mean << ',' << last.alpha.stddev << ',' << last.alpha.discrete << '\n';
  }
};

struct TrainResult {
  std::vector<EpisodeMetrics> evaluations;
  std::filesystem::path checkpoint;
};

using TrainProgress = std::function<void(const EpisodeMetrics& eval, const LearnerLogRow& log)>;

/// Writes `metrics.csv` (one deterministic evaluation per training
/// episode), `learner.csv`, periodic `checkpoint_<episode>.bin` and the
/// final `checkpoint.bin` under `out_dir`.
inline TrainResult train_run(const RunConfig& cfg, const std::vector<DriveCycle>& cycles, const std::filesystem::path& out_dir,
                             const TrainProgress& progress = {}) {
  cfg.validate();
  if (cycles.empty()) throw ConfigError("no drive cycle given");
  std::filesystem::create_directories(out_dir);
  std::ofstream metrics(out_dir / "metrics.csv");
  std::ofstream learner_log(out_dir / "learner.csv");
  if (!metrics || !learner_log) throw std::runtime_error("cannot write to " + out_dir.string());
  metrics << EpisodeMetrics::csv_header() << '\n';
  learner_log << LearnerLogRow::csv_header() << '\n';

  MpoLearner learner(cfg.mpo, derive_seed(cfg.seed, 0, 0));
  ReplayBuffer buffer(cfg.mpo.replay_capacity);
  TrainResult result;
  const DriveCycle& eval_cycle = cycles.front();

  auto save = [&](const std::filesystem::path& p) {
    learner.checkpoint().save(p.string());
    return p;
  };

  int done = 0;
  const int workers = cfg.schedule.workers;
  while (done < cfg.schedule.episodes) {
    int round = std::min(workers, cfg.schedule.episodes - done);
    std::vector<EpisodeResult> rollouts(static_cast<std::size_t>(round));
    auto rollout = [&](int w) {
      int ep = done + w;
      const DriveCycle& cycle = cycles[static_cast<std::size_t>(ep) % cycles.size()];
      EpisodeOptions opt = cfg.episode;
      opt.randomize_lead = true;
      opt.lead_seed = derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(ep));
      opt.record_transitions = true;
      PolicyController behavior(learner.actor(), false, derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(ep)));
      rollouts[static_cast<std::size_t>(w)] = run_episode(cycle, behavior, cfg.vehicle, cfg.weights, cfg.idm_for(cycle), opt);
    };
    if (round == 1) {
      rollout(0);
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < round; ++w) threads.emplace_back(rollout, w);
      for (auto& t : threads) t.join();
    }

    for (int w = 0; w < round; ++w) {
      int ep = done + w;
      EpisodeResult& r = rollouts[static_cast<std::size_t>(w)];
      LearnerLogRow log;
      log.episode = ep;
      log.train_return = r.metrics.total_reward;
      // Scheduled from the cycle length, so an early crash does not starve the learner.
      const DriveCycle& cycle = cycles[static_cast<std::size_t>(ep) % cycles.size()];
      buffer.push(std::move(r.transitions));
      log.updates = cfg.mpo.updates_for_episode(cycle.size() - 1);
      try {
        for (int u = 0; u < log.updates; ++u) log.last = learner.update(buffer);
      } catch (const std::runtime_error& e) {
        std::ofstream dump(out_dir / "abort.txt");
        dump << "episode " << ep << ", learner step " << learner.steps() << ": " << e.what() << '\n';
        dump << LearnerLogRow::csv_header() << '\n';
        log.write_csv_row(dump);
        save(out_dir / "abort_checkpoint.bin");
        throw TrainingAbort(std::string("training aborted: ") + e.what());
      }

      EpisodeResult eval = evaluate_run(cfg, eval_cycle, learner.checkpoint());
      eval.metrics.episode = ep;
      eval.metrics.write_csv_row(metrics);
      log.write_csv_row(learner_log);
      metrics.flush();
      learner_log.flush();
      result.evaluations.push_back(eval.metrics);
      if (progress) progress(eval.metrics, log);
      if (cfg.schedule.checkpoint_every > 0 && (ep + 1) % cfg.schedule.checkpoint_every == 0)
        save(out_dir / ("checkpoint_" + std::to_string(ep + 1) + ".bin"));
    }
    done += round;
  }
  result.checkpoint = save(out_dir / "checkpoint.bin");
  return result;
}

struct ComparisonRow {
  std::string label;
  EpisodeMetrics metrics;
  double mpg_delta = 0.0;    // % vs baseline
  double rmse_delta = 0.0;   // %
  double shift_delta = 0.0;  // %
};

inline double percent_delta(double value, double reference) {
  if (reference == 0.0) return value == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), value);
  return (value - reference) / reference * 100.0;
}

/// Baseline first, then one row per labelled checkpoint, all on `cycle`.
inline std::vector<ComparisonRow> compare_run(const RunConfig& cfg, const DriveCycle& cycle,
                                              const std::vector<std::pair<std::string, nn::Checkpoint>>& policies) {
  std::vector<ComparisonRow> rows;
  rows.push_back({"Baseline", baseline_run(cfg, cycle).metrics});
  for (const auto& [label, ck] : policies) rows.push_back({label, evaluate_run(cfg, cycle, ck).metrics});
  const EpisodeMetrics& base = rows.front().metrics;
  for (auto& r : rows) {
    r.mpg_delta = percent_delta(r.metrics.mpg, base.mpg);
    r.rmse_delta = percent_delta(r.metrics.accel_rmse, base.accel_rmse);
    r.shift_delta = percent_delta(r.metrics.shifts, base.shifts);
  }
  return rows;
}

inline void write_comparison_table(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  auto old_flags = out.flags();
  out << std::left << std::setw(14) << "Controller" << std::right << std::setw(10) << "MPG" << std::setw(10) << "dMPG%"
      << std::setw(12) << "RMSE m/s2" << std::setw(10) << "dRMSE%" << std::setw(9) << "Shifts" << std::setw(10) << "dShift%"
      << '\n';
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(14) << r.label << std::right << std::setprecision(3) << std::setw(10) << r.metrics.mpg
        << std::setprecision(2) << std::setw(10) << r.mpg_delta << std::setprecision(4) << std::setw(12) << r.metrics.accel_rmse
        << std::setprecision(2) << std::setw(10) << r.rmse_delta << std::setw(9) << r.metrics.shifts << std::setw(10)
        << r.shift_delta << '\n';
  }
  out.flags(old_flags);
}

inline void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "controller,mpg,mpg_delta_pct,accel_rmse,rmse_delta_pct,shifts,shift_delta_pct\n" << std::setprecision(17);
  for (const auto& r : rows)
    out << r.label << ',' << r.metrics.mpg << ',' << r.mpg_delta << ',' << r.metrics.accel_rmse << ',' << r.rmse_delta << ','
        << r.metrics.shifts << ',' << r.shift_delta << '\n';
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << TraceRow::csv_header() << '\n' << std::setprecision(10);
  for (const auto& row : trace) row.write_csv_row(out);
}

}  // namespace ecodrive

#pragma once

// JSON run configuration. Every section and key is optional; omitted
// values keep their defaults. Unknown keys are rejected so typos surface
// as errors instead of silently running the defaults. The schema is
// described in docs/config_schema.md.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecodrive/baseline.hpp"
#include "ecodrive/driver.hpp"
#include "ecodrive/harness/episode.hpp"
#include "ecodrive/mpo/config.hpp"
#include "ecodrive/powertrain_env.hpp"
#include "ecodrive/vehicle.hpp"

namespace ecodrive {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainSchedule {
  int episodes = 100;
  int checkpoint_every = 10;
  int workers = 1;
};

struct RunConfig {
  VehicleConfig vehicle = default_vehicle();
  IdmParams idm{};
  bool idm_speed_from_cycle = true;  // 90th-percentile lead speed unless set explicitly
  RewardWeights weights{};
  MpoConfig mpo{};
  BaselineConfig baseline{};
  EpisodeOptions episode{};
  TrainSchedule schedule{};
  std::uint64_t seed = 1;
  std::vector<std::string> cycles;  // resolved paths
  SpeedUnits units = SpeedUnits::mps;

  IdmParams idm_for(const DriveCycle& c) const {
    IdmParams p = idm;
    if (idm_speed_from_cycle) p.desired_speed = 0.0;
    return idm_for_cycle(p, c);
  }

  void validate() const {
    try {
      vehicle.validate();
      IdmParams p = idm;
      if (idm_speed_from_cycle) p.desired_speed = 1.0;
      p.validate();
      weights.validate();
      mpo.validate();
      baseline.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!vehicle.valid_gear(episode.initial_gear)) throw ConfigError("episode.initial_gear is not a valid gear");
    if (!(episode.dt > 0.0 && episode.substep > 0.0 && episode.substep <= episode.dt))
      throw ConfigError("episode: need 0 < substep <= dt");
    if (schedule.episodes < 0 || schedule.checkpoint_every < 0 || schedule.workers < 1)
      throw ConfigError("schedule: episodes and checkpoint_every must be >= 0, workers >= 1");
  }
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(section + ": unknown key '" + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path.string() : (base / path).lexically_normal().string();
}

inline void read_vehicle(const json& j, VehicleConfig& v, const std::filesystem::path& base) {
  const std::string s = "vehicle";
  check_keys(j, s,
             {"mass", "frontal_area", "drag_coefficient", "rolling_coefficient", "wheel_radius", "air_density", "gravity",
              "gear_ratios", "final_drive", "idle_speed_rpm", "max_speed_rpm", "max_torque_curve", "max_torque_csv",
              "engine_brake_peak", "service_brake_limit", "idle_fuel_rate", "fuel_map_csv", "fuel_map_shape", "grade"});
  read(j, "mass", v.mass, s);
  read(j, "frontal_area", v.frontal_area, s);
  read(j, "drag_coefficient", v.drag_coefficient, s);
  read(j, "rolling_coefficient", v.rolling_coefficient, s);
  read(j, "wheel_radius", v.wheel_radius, s);
  read(j, "air_density", v.air_density, s);
  read(j, "gravity", v.gravity, s);
  read(j, "gear_ratios", v.gear_ratios, s);
  read(j, "final_drive", v.final_drive, s);
  if (j.contains("idle_speed_rpm")) v.idle_speed = j.at("idle_speed_rpm").get<double>() * kRpmToRadPerSec;
  if (j.contains("max_speed_rpm")) v.max_speed = j.at("max_speed_rpm").get<double>() * kRpmToRadPerSec;
  read(j, "engine_brake_peak", v.engine_brake_peak, s);
  read(j, "service_brake_limit", v.service_brake_limit, s);
  read(j, "idle_fuel_rate", v.idle_fuel_rate, s);

  try {
    if (j.contains("max_torque_curve") && j.contains("max_torque_csv"))
      throw ConfigError("vehicle: give max_torque_curve or max_torque_csv, not both");
    if (j.contains("max_torque_curve")) {
      const json& c = j.at("max_torque_curve");
      check_keys(c, "vehicle.max_torque_curve", {"rpm", "torque"});
      std::vector<double> rpm = c.at("rpm").get<std::vector<double>>();
      for (double& r : rpm) r *= kRpmToRadPerSec;
      v.max_torque_curve = Curve1d(std::move(rpm), c.at("torque").get<std::vector<double>>());
    }
    if (j.contains("max_torque_csv")) v.max_torque_curve = load_curve_csv(resolve(base, j.at("max_torque_csv").get<std::string>()));

    if (j.contains("fuel_map_csv")) {
      if (j.contains("fuel_map_shape")) throw ConfigError("vehicle: give fuel_map_csv or fuel_map_shape, not both");
      v.fuel_map = load_fuel_map_csv(resolve(base, j.at("fuel_map_csv").get<std::string>()));
    } else {
      FuelMapShape shape;
      if (j.contains("fuel_map_shape")) {
        const json& f = j.at("fuel_map_shape");
        const std::string fs = "vehicle.fuel_map_shape";
        check_keys(f, fs, {"bsfc_min", "sweet_speed_frac", "sweet_torque_frac", "speed_curvature", "torque_curvature"});
        read(f, "bsfc_min", shape.bsfc_min, fs);
        read(f, "sweet_speed_frac", shape.sweet_speed_frac, fs);
        read(f, "sweet_torque_frac", shape.sweet_torque_frac, fs);
        read(f, "speed_curvature", shape.speed_curvature, fs);
        read(f, "torque_curvature", shape.torque_curvature, fs);
      }
      // Regenerated so it follows any engine-speed or torque overrides above.
      v.fuel_map = synthetic_fuel_map(v.idle_speed, v.max_speed, v.peak_engine_torque(), v.idle_fuel_rate, shape);
    }

    if (j.contains("grade")) {
      const json& g = j.at("grade");
      check_keys(g, "vehicle.grade", {"position", "angle"});
      v.grade = Curve1d(g.at("position").get<std::vector<double>>(), g.at("angle").get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("vehicle: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("vehicle: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("vehicle: ") + e.what());
  }
}

inline void read_weights(const json& j, RewardWeights& w) {
  const std::string s = "reward";
  check_keys(j, s, {"set", "tracking", "torque", "fuel", "shift", "reserve", "max_accel_error"});
  if (j.contains("set")) {
    std::string name = j.at("set").get<std::string>();
    if (name == "A" || name == "a") w = RewardWeights::set_a();
    else if (name == "B" || name == "b") w = RewardWeights::set_b();
    else throw ConfigError("reward.set must be A or B");
  }
  read(j, "tracking", w.tracking, s);
  read(j, "torque", w.torque, s);
  read(j, "fuel", w.fuel, s);
  read(j, "shift", w.shift, s);
  read(j, "reserve", w.reserve, s);
  read(j, "max_accel_error", w.max_accel_error, s);
}

inline void read_mpo(const json& j, MpoConfig& m) {
  const std::string s = "mpo";
  check_keys(j, s,
             {"actor_lr", "critic_lr", "dual_epsilon", "eps_mean", "eps_stddev", "eps_discrete", "alpha_lr", "alpha_min",
              "alpha_max", "alpha_continuous", "alpha_discrete", "retrace_window", "action_samples", "batch_size", "gamma",
              "lambda", "target_sync_period", "steps_per_update", "actor_hidden", "critic_hidden", "stddev_min",
              "stddev_max", "replay_capacity", "output_init_scale", "initial_stddev", "initial_mean"});
  read(j, "actor_lr", m.actor_lr, s);
  read(j, "critic_lr", m.critic_lr, s);
  read(j, "dual_epsilon", m.dual_epsilon, s);
  read(j, "eps_mean", m.constraints.eps_mean, s);
  read(j, "eps_stddev", m.constraints.eps_stddev, s);
  read(j, "eps_discrete", m.constraints.eps_discrete, s);
  read(j, "alpha_lr", m.constraints.alpha_lr, s);
  read(j, "alpha_min", m.constraints.alpha_min, s);
  read(j, "alpha_max", m.constraints.alpha_max, s);
  read(j, "alpha_continuous", m.alpha_continuous, s);
  read(j, "alpha_discrete", m.alpha_discrete, s);
  read(j, "retrace_window", m.retrace_window, s);
  read(j, "action_samples", m.action_samples, s);
  read(j, "batch_size", m.batch_size, s);
  read(j, "gamma", m.gamma, s);
  read(j, "lambda", m.lambda, s);
  read(j, "target_sync_period", m.target_sync_period, s);
  read(j, "steps_per_update", m.steps_per_update, s);
  read(j, "actor_hidden", m.actor_hidden, s);
  read(j, "critic_hidden", m.critic_hidden, s);
  read(j, "stddev_min", m.stddev.min, s);
  read(j, "stddev_max", m.stddev.max, s);
  read(j, "replay_capacity", m.replay_capacity, s);
  read(j, "output_init_scale", m.output_init_scale, s);
  read(j, "initial_stddev", m.initial_stddev, s);
  read(j, "initial_mean", m.initial_mean, s);
}

}  // namespace detail

/// Applies a parsed JSON document on top of `cfg`. Relative paths are
/// resolved against `base`.
inline void apply_config(const nlohmann::json& j, RunConfig& cfg, const std::filesystem::path& base = ".") {
  using detail::read;
  detail::check_keys(j, "config", {"vehicle", "idm", "reward", "mpo", "baseline", "episode", "run"});
  if (j.contains("vehicle")) detail::read_vehicle(j.at("vehicle"), cfg.vehicle, base);
  if (j.contains("idm")) {
    const auto& d = j.at("idm");
    const std::string s = "idm";
    detail::check_keys(d, s, {"max_accel", "comfort_decel", "exponent", "time_headway", "standstill_gap", "desired_speed", "max_brake"});
    read(d, "max_accel", cfg.idm.max_accel, s);
    read(d, "comfort_decel", cfg.idm.comfort_decel, s);
    read(d, "exponent", cfg.idm.exponent, s);
    read(d, "time_headway", cfg.idm.time_headway, s);
    read(d, "standstill_gap", cfg.idm.standstill_gap, s);
    read(d, "max_brake", cfg.idm.max_brake, s);
    if (d.contains("desired_speed") && !d.at("desired_speed").is_null()) {
      read(d, "desired_speed", cfg.idm.desired_speed, s);
      cfg.idm_speed_from_cycle = false;
    }
  }
  if (j.contains("reward")) detail::read_weights(j.at("reward"), cfg.weights);
  if (j.contains("mpo")) detail::read_mpo(j.at("mpo"), cfg.mpo);
  if (j.contains("baseline")) {
    detail::check_keys(j.at("baseline"), "baseline", {"shift_penalty"});
    read(j.at("baseline"), "shift_penalty", cfg.baseline.shift_penalty, "baseline");
  }
  if (j.contains("episode")) {
    const auto& e = j.at("episode");
    const std::string s = "episode";
    detail::check_keys(e, s,
                       {"dt", "substep", "initial_gear", "randomize_lead", "crash_gap", "crash_penalty", "stall_shaping",
                        "stall_accel", "stall_seconds", "stall_penalty"});
    read(e, "dt", cfg.episode.dt, s);
    read(e, "substep", cfg.episode.substep, s);
    read(e, "initial_gear", cfg.episode.initial_gear, s);
    read(e, "randomize_lead", cfg.episode.randomize_lead, s);
    read(e, "crash_gap", cfg.episode.crash_gap, s);
    read(e, "crash_penalty", cfg.episode.crash_penalty, s);
    read(e, "stall_shaping", cfg.episode.stall_shaping, s);
    read(e, "stall_accel", cfg.episode.stall_accel, s);
    read(e, "stall_seconds", cfg.episode.stall_seconds, s);
    read(e, "stall_penalty", cfg.episode.stall_penalty, s);
  }
  if (j.contains("run")) {
    const auto& r = j.at("run");
    const std::string s = "run";
    detail::check_keys(r, s, {"episodes", "checkpoint_every", "workers", "seed", "cycles", "units"});
    read(r, "episodes", cfg.schedule.episodes, s);
    read(r, "checkpoint_every", cfg.schedule.checkpoint_every, s);
    read(r, "workers", cfg.schedule.workers, s);
    read(r, "seed", cfg.seed, s);
    if (r.contains("cycles")) {
      cfg.cycles.clear();
      for (const auto& c : r.at("cycles")) cfg.cycles.push_back(detail::resolve(base, c.get<std::string>()));
    }
    if (r.contains("units")) {
      try {
        cfg.units = parse_units(r.at("units").get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("run.units: ") + e.what());
      }
    }
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  RunConfig cfg;
  apply_config(j, cfg, std::filesystem::path(path).parent_path());
  return cfg;
}

/// Reward weights from a standalone JSON file (the `reward` section schema).
inline RewardWeights load_weights_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open weights file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  RewardWeights w;
  detail::read_weights(j, w);
  return w;
}

}  // namespace ecodrive

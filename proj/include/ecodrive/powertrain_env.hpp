#pragma once

// Longitudinal dynamics, torque allocation, gear feasibility and the
// multi-objective step reward of the ego vehicle.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <stdexcept>
#include <string>

#include "ecodrive/vehicle.hpp"

namespace ecodrive {

struct EnvState {
  double velocity = 0.0;       // m/s
  double acceleration = 0.0;   // m/s^2, realized over the previous step
  double desired_accel = 0.0;  // m/s^2, driver demand
  int gear = 1;

  bool valid(const VehicleConfig& cfg) const {
    return std::isfinite(velocity) && std::isfinite(acceleration) && std::isfinite(desired_accel) && velocity >= 0.0 &&
           cfg.valid_gear(gear);
  }
};

struct HybridAction {
  double torque = 0.0;  // normalized, [-1, 1]
  int gear_command = 0; // -1 down, 0 hold, +1 up
};

struct RewardWeights {
  double tracking = 0.65;
  double torque = 0.095;
  double fuel = 0.15;
  double shift = 0.1;
  double reserve = 0.005;
  double max_accel_error = 4.0;  // m/s^2
  double max_wheel_torque = 0.0; // N·m; <= 0 means derive from the vehicle
  double max_fuel_rate = 0.0;    // g/s; <= 0 means derive from the fuel map

  static RewardWeights set_a() { return {}; }
  static RewardWeights set_b() {
    RewardWeights w;
    w.torque = 0.055;
    w.shift = 0.14;
    return w;
  }

  /// Fills derived normalizers from the vehicle.
  RewardWeights resolved(const VehicleConfig& cfg) const {
    RewardWeights w = *this;
    if (w.max_wheel_torque <= 0.0) w.max_wheel_torque = cfg.max_wheel_torque();
    if (w.max_fuel_rate <= 0.0) w.max_fuel_rate = cfg.fuel_map.max_value();
    return w;
  }

  void validate() const {
    for (double v : {tracking, torque, fuel, shift, reserve})
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("reward weights must be finite and >= 0");
    if (!(max_accel_error > 0.0)) throw std::invalid_argument("reward normalizer max_accel_error must be > 0");
  }
};

/// Per-term penalties (each >= 0); the reward is minus their sum.
struct RewardBreakdown {
  double tracking = 0.0;
  double torque = 0.0;
  double fuel = 0.0;
  double shift = 0.0;
  double reserve = 0.0;

  double total() const { return -(tracking + torque + fuel + shift + reserve); }
};

struct TorqueSplit {
  double wheel = 0.0;    // N·m at the wheels, engine + service brake
  double engine = 0.0;   // N·m at the crankshaft
  double service = 0.0;  // N·m at the wheels, <= 0
};

struct PowerReserve {
  double reserve = 0.0;  // W
  double ceiling = 0.0;  // W
};

struct StepOutcome {
  EnvState next_state;
  double reward = 0.0;
  RewardBreakdown penalties;
  double wheel_torque = 0.0;   // N·m, step mean
  double engine_torque = 0.0;  // N·m, step mean
  double engine_speed = 0.0;   // rad/s, step mean
  double fuel_mass = 0.0;      // g
  double distance = 0.0;       // m
  bool shift_applied = false;
  bool shift_rejected = false;

  double fuel_rate(double dt) const { return fuel_mass / dt; }
};

inline double rolling_resistance(double grade, const VehicleConfig& cfg) {
  return cfg.mass * cfg.gravity * cfg.rolling_coefficient * std::cos(grade);
}

inline double aero_drag(double velocity, const VehicleConfig& cfg) {
  return 0.5 * cfg.air_density * cfg.drag_coefficient * cfg.frontal_area * velocity * velocity;
}

inline double grade_resistance(double grade, const VehicleConfig& cfg) {
  return cfg.mass * cfg.gravity * std::sin(grade);
}

/// dV/dt with resistances opposing motion. At standstill rolling resistance
/// acts as static friction: the vehicle only moves off once the net
/// driving force exceeds it, and it never rolls backwards.
inline double longitudinal_accel(double velocity, double wheel_torque, double grade, const VehicleConfig& cfg) {
  if (!std::isfinite(velocity) || !std::isfinite(wheel_torque) || !std::isfinite(grade))
    throw std::invalid_argument("longitudinal_accel: non-finite input");
  if (velocity < 0.0) throw std::invalid_argument("longitudinal_accel: negative velocity");
  double traction = wheel_torque / cfg.wheel_radius;
  double roll = rolling_resistance(grade, cfg);
  double drive = traction - aero_drag(velocity, cfg) - grade_resistance(grade, cfg);
  if (velocity > 0.0) return (drive - roll) / cfg.mass;
  if (drive <= roll) return 0.0;
  return (drive - roll) / cfg.mass;
}

inline double engine_speed(double velocity, int gear, const VehicleConfig& cfg) {
  return std::max(cfg.idle_speed, cfg.coupled_engine_speed(velocity, gear));
}

/// Fuel cut on overrun: negative engine torque burns nothing.
inline double fuel_rate(double engine_speed, double engine_torque, const VehicleConfig& cfg) {
  if (engine_torque < 0.0) return 0.0;
  return std::max(0.0, cfg.fuel_map(engine_speed, engine_torque));
}

inline bool gear_command_feasible(int gear, double velocity, int command, const VehicleConfig& cfg) {
  if (command == 0) return true;
  if (command != -1 && command != 1) return false;
  int target = gear + command;
  if (!cfg.valid_gear(target)) return false;
  double w = cfg.coupled_engine_speed(velocity, target);
  if (w > cfg.max_speed) return false;
  // Upshifts must not lug the engine below idle; downshifts only raise speed.
  if (command > 0 && w < cfg.idle_speed) return false;
  return true;
}

/// Feasible commands in the order {-1, 0, +1}; `mask[u + 1]` is true when u is allowed.
inline std::array<bool, 3> feasible_gear_commands(const EnvState& state, const VehicleConfig& cfg) {
  return {gear_command_feasible(state.gear, state.velocity, -1, cfg), true,
          gear_command_feasible(state.gear, state.velocity, +1, cfg)};
}

/// Maps a normalized request onto engine and service brake torque at the
/// current operating point. Engine braking is only available while the
/// driveline is coupled (wheel-imposed engine speed at or above idle).
inline TorqueSplit apply_torque(double request, double velocity, int gear, const VehicleConfig& cfg) {
  request = std::clamp(request, -1.0, 1.0);
  TorqueSplit out;
  if (request == 0.0) return out;
  double ratio = cfg.total_ratio(gear);
  double demand = request * cfg.max_wheel_torque();
  double w = engine_speed(velocity, gear, cfg);
  if (demand > 0.0) {
    out.engine = std::min(demand / ratio, cfg.max_engine_torque(w));
    out.wheel = out.engine * ratio;
    return out;
  }
  bool coupled = cfg.coupled_engine_speed(velocity, gear) >= cfg.idle_speed;
  double engine_capacity = coupled ? cfg.engine_brake_torque(w) : 0.0;
  out.engine = std::max(demand / ratio, engine_capacity);
  double remainder = demand - out.engine * ratio;
  out.service = std::max(remainder, -cfg.service_brake_limit);
  out.wheel = out.engine * ratio + out.service;
  return out;
}

inline TorqueSplit apply_torque(double request, const EnvState& state, const VehicleConfig& cfg) {
  return apply_torque(request, state.velocity, state.gear, cfg);
}

/// Engine power still available in the current gear, and the best
/// available over all gears at this road speed.
inline PowerReserve power_reserve(double velocity, int gear, double engine_torque, const VehicleConfig& cfg) {
  PowerReserve out;
  for (int g = 1; g <= cfg.gear_count(); ++g) {
    double w = engine_speed(velocity, g, cfg);
    out.ceiling = std::max(out.ceiling, cfg.max_engine_torque(w) * w);
  }
  double w = engine_speed(velocity, gear, cfg);
  out.reserve = std::clamp((cfg.max_engine_torque(w) - engine_torque) * w, 0.0, out.ceiling);
  return out;
}

/// Penalty terms for the transition s_t -> s_{t+1}. `w` must be resolved.
inline RewardBreakdown reward_terms(const EnvState& current, const EnvState& next, double wheel_torque,
                                    double fuel_rate_next, const PowerReserve& reserve_next, const RewardWeights& w) {
  if (!(w.max_accel_error > 0.0) || !(w.max_wheel_torque > 0.0) || !(w.max_fuel_rate > 0.0))
    throw std::invalid_argument("reward: normalizers must be positive (resolve the weights first)");
  RewardBreakdown p;
  p.tracking = w.tracking * std::abs(current.desired_accel - next.acceleration) / w.max_accel_error;
  p.torque = w.torque * std::abs(wheel_torque) / w.max_wheel_torque;
  p.fuel = w.fuel * std::max(0.0, fuel_rate_next) / w.max_fuel_rate;
  p.shift = w.shift * std::abs(next.gear - current.gear);
  if (reserve_next.ceiling > 0.0)
    p.reserve = w.reserve * std::max(0.0, reserve_next.ceiling - reserve_next.reserve) / reserve_next.ceiling;
  return p;
}

inline double reward(const EnvState& current, const StepOutcome& outcome, double dt, const VehicleConfig& cfg,
                     const RewardWeights& w) {
  auto reserve = power_reserve(outcome.next_state.velocity, outcome.next_state.gear, outcome.engine_torque, cfg);
  return reward_terms(current, outcome.next_state, outcome.wheel_torque, outcome.fuel_rate(dt), reserve, w).total();
}

struct StepOptions {
  double substep = 0.1;  // s
  double position = 0.0; // m, for grade lookup
};

/// Advances one control period. `driver` is called with (v_next, distance
/// travelled) and returns the driver demand injected into the next state.
template <typename Driver>
  requires std::invocable<Driver, double, double>
StepOutcome env_step(const EnvState& state, const HybridAction& action, Driver&& driver, double dt,
                     const VehicleConfig& cfg, const RewardWeights& weights, const StepOptions& opt = {}) {
  if (!(dt > 0.0) || !(opt.substep > 0.0)) throw std::invalid_argument("env_step: dt must be positive");
  if (!std::isfinite(action.torque)) throw std::invalid_argument("env_step: non-finite torque command");
  if (action.gear_command < -1 || action.gear_command > 1) throw std::invalid_argument("env_step: gear command out of range");
  if (!state.valid(cfg)) throw std::invalid_argument("env_step: invalid state");

  StepOutcome out;
  int gear = state.gear;
  if (action.gear_command != 0) {
    if (gear_command_feasible(gear, state.velocity, action.gear_command, cfg)) {
      gear += action.gear_command;
      out.shift_applied = true;
    } else {
      out.shift_rejected = true;
    }
  }

  double request = std::clamp(action.torque, -1.0, 1.0);
  int n = std::max(1, static_cast<int>(std::lround(dt / opt.substep)));
  double h = dt / n;
  double v = state.velocity;
  double s = opt.position;
  for (int k = 0; k < n; ++k) {
    TorqueSplit split = apply_torque(request, v, gear, cfg);
    double w = engine_speed(v, gear, cfg);
    double a = longitudinal_accel(v, split.wheel, cfg.road_grade(s), cfg);
    double v_new = std::max(0.0, v + a * h);
    s += 0.5 * (v + v_new) * h;
    out.fuel_mass += fuel_rate(w, split.engine, cfg) * h;
    out.wheel_torque += split.wheel / n;
    out.engine_torque += split.engine / n;
    out.engine_speed += w / n;
    v = v_new;
  }
  out.distance = s - opt.position;

  out.next_state.velocity = v;
  out.next_state.acceleration = (v - state.velocity) / dt;
  out.next_state.gear = gear;
  out.next_state.desired_accel = driver(v, out.distance);

  RewardWeights w = weights.resolved(cfg);
  auto reserve = power_reserve(v, gear, out.engine_torque, cfg);
  out.penalties = reward_terms(state, out.next_state, out.wheel_torque, out.fuel_rate(dt), reserve, w);
  out.reward = out.penalties.total();
  return out;
}

inline StepOutcome env_step(const EnvState& state, const HybridAction& action, double next_desired_accel, double dt,
                            const VehicleConfig& cfg, const RewardWeights& weights, const StepOptions& opt = {}) {
  return env_step(state, action, [next_desired_accel](double, double) { return next_desired_accel; }, dt, cfg, weights, opt);
}

}  // namespace ecodrive

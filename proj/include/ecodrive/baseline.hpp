#pragma once

// Reference controller: inverse-dynamics torque that realizes the driver
// demand, and a myopic gear selector with full knowledge of the fuel map.

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "ecodrive/powertrain_env.hpp"

namespace ecodrive {

struct BaselineConfig {
  double shift_penalty = 0.05;  // g/s-equivalent per shift

  void validate() const {
    if (!(shift_penalty >= 0.0)) throw std::invalid_argument("baseline shift penalty must be >= 0");
  }
};

/// Normalized torque command that produces `desired_accel` under the
/// longitudinal model (exact while neither engine nor brakes saturate).
inline double baseline_torque(double desired_accel, const EnvState& state, const VehicleConfig& cfg, double grade = 0.0) {
  double v = state.velocity;
  if (v <= 0.0 && desired_accel <= 0.0) return 0.0;
  double force = cfg.mass * desired_accel + rolling_resistance(grade, cfg) + aero_drag(v, cfg) + grade_resistance(grade, cfg);
  return std::clamp(force * cfg.wheel_radius / cfg.max_wheel_torque(), -1.0, 1.0);
}

/// Gear-command cost J = fuel rate + q_c * |u| for one candidate.
struct GearCandidate {
  int command = 0;
  double wheel_torque = 0.0;  // deliverable at the candidate operating point
  double fuel_rate = 0.0;     // g/s
  double cost = 0.0;
  bool delivers = false;      // meets the planned wheel torque
};

inline GearCandidate evaluate_gear_candidate(const EnvState& state, double planned_torque, int command,
                                             const VehicleConfig& cfg, const BaselineConfig& bc) {
  GearCandidate c;
  c.command = command;
  int gear = state.gear + command;
  TorqueSplit split = apply_torque(planned_torque, state.velocity, gear, cfg);
  double demand = std::clamp(planned_torque, -1.0, 1.0) * cfg.max_wheel_torque();
  c.wheel_torque = split.wheel;
  c.fuel_rate = fuel_rate(engine_speed(state.velocity, gear, cfg), split.engine, cfg);
  c.cost = c.fuel_rate + bc.shift_penalty * std::abs(command);
  c.delivers = demand <= 0.0 || split.wheel >= demand * (1.0 - 1e-9);
  return c;
}

/// Picks the cheapest candidate among those that deliver the planned
/// torque; if none can, the one delivering the most. Candidates are given in
/// preference order (hold, upshift, downshift), which settles ties.
inline int pick_gear_command(const std::vector<GearCandidate>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("pick_gear_command: no candidates");
  GearCandidate best = candidates.front();
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const GearCandidate& c = candidates[i];
    if (c.delivers != best.delivers) {
      if (c.delivers) best = c;
      continue;
    }
    bool better = c.delivers ? c.cost < best.cost : c.wheel_torque > best.wheel_torque;
    if (better) best = c;
  }
  return best.command;
}

inline int baseline_gear(const EnvState& state, double planned_torque, const VehicleConfig& cfg, const BaselineConfig& bc) {
  auto feasible = feasible_gear_commands(state, cfg);
  std::vector<GearCandidate> candidates;
  for (int u : {0, +1, -1})
    if (feasible[static_cast<std::size_t>(u + 1)]) candidates.push_back(evaluate_gear_candidate(state, planned_torque, u, cfg, bc));
  return pick_gear_command(candidates);
}

/// Torque first, then the gear that best realizes it.
inline HybridAction baseline_action(const EnvState& state, const VehicleConfig& cfg, const BaselineConfig& bc,
                                    double grade = 0.0) {
  HybridAction a;
  a.torque = baseline_torque(state.desired_accel, state, cfg, grade);
  a.gear_command = baseline_gear(state, a.torque, cfg, bc);
  return a;
}

}  // namespace ecodrive

#pragma once

// Closed-loop episode: lead vehicle -> IDM driver -> controller -> powertrain.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "ecodrive/baseline.hpp"
#include "ecodrive/controller.hpp"
#include "ecodrive/driver.hpp"
#include "ecodrive/harness/metrics.hpp"
#include "ecodrive/mpo/replay_buffer.hpp"
#include "ecodrive/powertrain_env.hpp"

namespace ecodrive {

class BaselineController final : public Controller {
 public:
  BaselineController(const VehicleConfig& vehicle, BaselineConfig cfg) : vehicle_(&vehicle), cfg_(cfg) {}

  ControlDecision decide(const EnvState& state, double grade) override {
    ControlDecision d;
    d.action.torque = baseline_torque(state.desired_accel, state, *vehicle_, grade);
    d.action.gear_command = baseline_gear(state, d.action.torque, *vehicle_, cfg_);
    d.continuous_sample = d.action.torque;
    return d;
  }

 private:
  const VehicleConfig* vehicle_;
  BaselineConfig cfg_;
};

struct TraceRow {
  double t, velocity, lead_speed, gap, desired_accel, acceleration;
  int gear;
  double wheel_torque, engine_speed, engine_torque, fuel_rate, reward;
  RewardBreakdown penalties;

  static const char* csv_header() {
    return "t,v_e,v_lead,gap,a_des,a_e,n_g,T_t,w_e,T_e,fuel_rate,r,pen_tracking,pen_torque,pen_fuel,pen_shift,pen_reserve";
  }
  void write_csv_row(std::ostream& out) const {
    out << t << ',' << velocity << ',' << lead_speed << ',' << gap << ',' << desired_accel << ',' << acceleration << ','
        << gear << ',' << wheel_torque << ',' << engine_speed << ',' << engine_torque << ',' << fuel_rate << ',' << reward
        << ',' << penalties.tracking << ',' << penalties.torque << ',' << penalties.fuel << ',' << penalties.shift << ','
        << penalties.reserve << '\n';
  }
};

struct EpisodeOptions {
  double dt = 1.0;
  double substep = 0.1;
  int initial_gear = 1;
  bool randomize_lead = false;
  std::uint64_t lead_seed = 0;
  double crash_gap = 0.5;         // m
  double crash_penalty = -10.0;
  bool stall_shaping = false;     // -1 when stopped while the driver wants to go
  double stall_accel = 0.5;       // m/s^2
  double stall_seconds = 5.0;
  double stall_penalty = -1.0;
  bool record_transitions = false;
  bool record_trace = false;
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::vector<Transition> transitions;
  std::vector<TraceRow> trace;
};

/// Driver speed preference derived from the cycle when not configured.
inline IdmParams idm_for_cycle(IdmParams p, const DriveCycle& cycle) {
  if (!(p.desired_speed > 0.0)) p.desired_speed = std::max(1.0, cycle.speed_quantile(0.9));
  return p;
}

inline EpisodeResult run_episode(const DriveCycle& cycle, Controller& controller, const VehicleConfig& vehicle,
                                 const RewardWeights& weights, const IdmParams& idm_in, const EpisodeOptions& opt) {
  if (cycle.size() < 2) throw std::invalid_argument("run_episode: cycle needs at least two samples");
  IdmParams idm = idm_for_cycle(idm_in, cycle);
  RewardWeights w = weights.resolved(vehicle);
  LeadProfile::Randomization rnd;
  rnd.enabled = opt.randomize_lead;
  LeadProfile lead(cycle, rnd, opt.lead_seed);

  EpisodeResult result;
  EpisodeMetrics& m = result.metrics;
  double t0 = cycle.time.front();
  double lead_v = lead.speed(t0);
  double lead_pos = idm.standstill_gap + lead_v * idm.time_headway;
  double ego_pos = 0.0;

  EnvState state;
  state.velocity = lead_v;
  state.gear = opt.initial_gear;
  state.desired_accel = std::max(idm_accel(state.velocity, {lead_v, lead_pos, lead_pos - ego_pos, state.velocity - lead_v}, idm),
                                 -state.velocity / opt.dt);

  std::vector<std::pair<double, double>> accel_pairs;
  double meters = 0.0, grams = 0.0, stall_time = 0.0;
  auto steps = static_cast<int>(cycle.size()) - 1;
  for (int k = 0; k < steps; ++k) {
    double t = t0 + k * opt.dt;
    double grade = vehicle.road_grade(ego_pos);
    ControlDecision decision = controller.decide(state, grade);
    HybridAction applied = decision.action;
    applied.torque = std::clamp(applied.torque, -1.0, 1.0);

    double next_lead_v = lead.speed(t + opt.dt);
    double next_lead_pos = lead_pos + 0.5 * (lead_v + next_lead_v) * opt.dt;
    double next_gap = 0.0;
    auto driver = [&](double v_next, double distance) {
      next_gap = next_lead_pos - (ego_pos + distance);
      TrafficState traffic{next_lead_v, next_lead_pos, std::max(next_gap, 1e-3), v_next - next_lead_v};
      // A stopped vehicle cannot be asked to decelerate further.
      return std::max(idm_accel(v_next, traffic, idm), -v_next / opt.dt);
    };
    StepOptions so;
    so.substep = opt.substep;
    so.position = ego_pos;
    StepOutcome out = env_step(state, applied, driver, opt.dt, vehicle, w, so);

    double r = out.reward;
    bool crashed = next_gap < opt.crash_gap;
    if (crashed) r += opt.crash_penalty;
    if (opt.stall_shaping) {
      stall_time = (out.next_state.velocity <= 0.0 && out.next_state.desired_accel > opt.stall_accel) ? stall_time + opt.dt : 0.0;
      if (stall_time >= opt.stall_seconds) r += opt.stall_penalty;
    }
    bool done = crashed || k + 1 == steps;

    if (opt.record_transitions) {
      Transition tr;
      tr.state = state;
      tr.action = applied;
      tr.continuous_sample = decision.continuous_sample;
      tr.reward = r;
      tr.next_state = out.next_state;
      tr.behavior_logprob = decision.behavior_logprob;
      tr.behavior_prob = decision.behavior_prob;
      tr.done = done;
      result.transitions.push_back(tr);
    }
    if (opt.record_trace) {
      result.trace.push_back({t + opt.dt, out.next_state.velocity, next_lead_v, next_gap, state.desired_accel,
                              out.next_state.acceleration, out.next_state.gear, out.wheel_torque, out.engine_speed,
                              out.engine_torque, out.fuel_rate(opt.dt), r, out.penalties});
    }

    accel_pairs.emplace_back(state.desired_accel, out.next_state.acceleration);
    meters += out.distance;
    grams += out.fuel_mass;
    m.shifts += out.shift_applied ? 1 : 0;
    m.rejected_shifts += out.shift_rejected ? 1 : 0;
    m.total_reward += r;
    m.tracking += out.penalties.tracking;
    m.torque += out.penalties.torque;
    m.fuel += out.penalties.fuel;
    m.shift += out.penalties.shift;
    m.reserve += out.penalties.reserve;
    m.steps += 1;

    ego_pos += out.distance;
    lead_pos = next_lead_pos;
    lead_v = next_lead_v;
    state = out.next_state;
    if (crashed) {
      m.crashed = true;
      break;
    }
  }

  double n = static_cast<double>(m.steps);
  m.distance_mi = meters / kMetersPerMile;
  m.fuel_gal = grams_to_gallons(grams);
  m.mpg = compute_mpg(meters, grams);
  m.accel_rmse = compute_accel_rmse(accel_pairs);
  m.mean_reward = m.total_reward / n;
  m.tracking /= n;
  m.torque /= n;
  m.fuel /= n;
  m.shift /= n;
  m.reserve /= n;
  return result;
}

}  // namespace ecodrive

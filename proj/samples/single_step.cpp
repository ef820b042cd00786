// One powertrain step by hand: pick a gear and torque, look at the
// resulting speed, fuel and reward terms.

#include <iostream>

#include "ecodrive/baseline.hpp"
#include "ecodrive/powertrain_env.hpp"

int main() {
  using namespace ecodrive;
  VehicleConfig truck = default_vehicle();
  RewardWeights weights = RewardWeights::set_a().resolved(truck);

  EnvState s;
  s.velocity = 12.0;
  s.gear = 6;
  s.desired_accel = 0.5;

  HybridAction a = baseline_action(s, truck, BaselineConfig{});
  StepOutcome out = env_step(s, a, 0.0, 1.0, truck, weights);

  std::cout << "torque command " << a.torque << ", gear command " << a.gear_command << '\n'
            << "speed " << s.velocity << " -> " << out.next_state.velocity << " m/s in gear " << out.next_state.gear << '\n'
            << "engine " << out.engine_speed / kRpmToRadPerSec << " rpm at " << out.engine_torque << " N m\n"
            << "fuel " << out.fuel_mass << " g, reward " << out.reward << " (tracking " << out.penalties.tracking
            << ", torque " << out.penalties.torque << ", fuel " << out.penalties.fuel << ", shift " << out.penalties.shift
            << ", reserve " << out.penalties.reserve << ")\n";
  return 0;
}

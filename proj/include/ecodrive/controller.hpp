#pragma once

#include "ecodrive/powertrain_env.hpp"

namespace ecodrive {

/// What a controller did at one step, including the behavior-policy
/// probabilities a learner needs later.
struct ControlDecision {
  HybridAction action;
  double continuous_sample = 0.0;  // unclipped draw (== action.torque for deterministic controllers)
  double behavior_logprob = 0.0;   // log-density of continuous_sample
  double behavior_prob = 1.0;      // probability of the gear command
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControlDecision decide(const EnvState& state, double grade) = 0;
};

}  // namespace ecodrive

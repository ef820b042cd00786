#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ecodrive/mpo/estep.hpp"
#include "ecodrive/mpo/mstep.hpp"
#include "ecodrive/nn/policy.hpp"

namespace ecodrive {

struct MpoConfig {
  double actor_lr = 1e-5;
  double critic_lr = 1e-4;
  double dual_epsilon = 0.1;
  MStepConstraints constraints{};  // eps_mu 0.1, eps_sigma 0.001, eps_d 0.1, alpha lr 1e-2
  double alpha_continuous = 10.0;  // initial value for both Gaussian multipliers
  double alpha_discrete = 10.0;
  int retrace_window = 15;
  int action_samples = 40;
  int batch_size = 3072;  // transitions per learner step
  double gamma = 0.99;
  double lambda = 0.9;
  int target_sync_period = 200;
  int steps_per_update = 4;  // environment steps per learner step
  std::vector<int> actor_hidden{256, 256, 256};
  std::vector<int> critic_hidden{256, 256, 256};
  nn::StddevRange stddev{};
  // Actor output layer at initialization: weight multiplier (1 keeps the
  // plain Xavier draw), starting stddev (<= 0 keeps the zero gate bias) and
  // starting torque mean.
  double output_init_scale = 1.0;
  double initial_stddev = 0.0;
  double initial_mean = 0.0;
  std::size_t replay_capacity = 1'000'000;  // transitions

  int windows_per_batch() const { return (batch_size + retrace_window - 1) / retrace_window; }

  /// Learner steps scheduled after an episode of `steps` transitions.
  int updates_for_episode(std::size_t steps) const {
    return static_cast<int>((steps + static_cast<std::size_t>(steps_per_update) - 1) / static_cast<std::size_t>(steps_per_update));
  }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0)) throw std::invalid_argument(std::string("MpoConfig: ") + what + " must be positive");
    };
    positive(actor_lr, "actor_lr");
    positive(critic_lr, "critic_lr");
    positive(dual_epsilon, "dual_epsilon");
    positive(constraints.eps_mean, "eps_mean");
    positive(constraints.eps_stddev, "eps_stddev");
    positive(constraints.eps_discrete, "eps_discrete");
    positive(constraints.alpha_lr, "alpha_lr");
    positive(alpha_continuous, "alpha_continuous");
    positive(alpha_discrete, "alpha_discrete");
    if (!(constraints.alpha_min > 0.0 && constraints.alpha_max >= constraints.alpha_min))
      throw std::invalid_argument("MpoConfig: bad multiplier bounds");
    if (retrace_window < 1 || action_samples < 1 || batch_size < 1 || target_sync_period < 1 || steps_per_update < 1)
      throw std::invalid_argument("MpoConfig: counts must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("MpoConfig: gamma must lie in (0, 1]");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("MpoConfig: lambda must lie in (0, 1]");
    if (actor_hidden.empty() || critic_hidden.empty()) throw std::invalid_argument("MpoConfig: networks need a hidden layer");
    for (int h : actor_hidden)
      if (h < 1) throw std::invalid_argument("MpoConfig: hidden sizes must be >= 1");
    for (int h : critic_hidden)
      if (h < 1) throw std::invalid_argument("MpoConfig: hidden sizes must be >= 1");
    if (!(stddev.min > 0.0 && stddev.max > stddev.min)) throw std::invalid_argument("MpoConfig: bad stddev range");
    if (!(output_init_scale > 0.0)) throw std::invalid_argument("MpoConfig: output_init_scale must be positive");
    if (initial_stddev > 0.0 && !(initial_stddev > stddev.min && initial_stddev < stddev.max))
      throw std::invalid_argument("MpoConfig: initial_stddev must lie inside the stddev range");
    if (!(std::abs(initial_mean) < 1.0)) throw std::invalid_argument("MpoConfig: initial_mean must lie in (-1, 1)");
    if (replay_capacity < 1) throw std::invalid_argument("MpoConfig: replay capacity must be >= 1");
  }
};

}  // namespace ecodrive

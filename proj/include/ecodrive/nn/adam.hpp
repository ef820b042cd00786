#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "ecodrive/nn/mlp.hpp"

namespace ecodrive::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments. Moments are allocated on the first step.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(MlpParams& params, const MlpParams& grads) {
    if (!params.same_shape(grads)) throw std::invalid_argument("Adam: gradient shape does not match parameters");
    if (!grads.all_finite()) throw std::runtime_error("Adam: non-finite gradient");
    if (steps_ == 0 && !first_.same_shape(params)) {
      first_ = params.zeros_like();
      second_ = params.zeros_like();
    }
    ++steps_;
    double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    double lr = cfg_.learning_rate;
    auto update = [&](auto&& p, const auto& g, auto&& m, auto&& v) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.square();
      p -= lr * (m / c1) / ((v / c2).sqrt() + cfg_.epsilon);
    };
    for (std::size_t i = 0; i < params.weights.size(); ++i)
      update(params.weights[i].array(), grads.weights[i].array(), first_.weights[i].array(), second_.weights[i].array());
    for (std::size_t i = 0; i < params.biases.size(); ++i)
      update(params.biases[i].array(), grads.biases[i].array(), first_.biases[i].array(), second_.biases[i].array());
  }

  const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  std::uint64_t steps() const { return steps_; }
  const MlpParams& first_moment() const { return first_; }
  const MlpParams& second_moment() const { return second_; }

  void restore(std::uint64_t steps, MlpParams first, MlpParams second) {
    if (!first.same_shape(second)) throw std::invalid_argument("Adam::restore: moment shapes differ");
    steps_ = steps;
    first_ = std::move(first);
    second_ = std::move(second);
  }

 private:
  AdamConfig cfg_;
  std::uint64_t steps_ = 0;
  MlpParams first_;
  MlpParams second_;
};

}  // namespace ecodrive::nn

#pragma once

// Hybrid actor (Gaussian torque x categorical gear command over a shared
// trunk), the Q critic, and the densities and divergences they need.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ecodrive/nn/mlp.hpp"
#include "ecodrive/powertrain_env.hpp"

namespace ecodrive::nn {

inline constexpr int kStateFeatures = 4;
inline constexpr int kGearChoices = 3;
inline constexpr int kCriticInputs = kStateFeatures + 1 + kGearChoices;

/// Network input scaling to roughly unit range.
inline Eigen::Vector4d state_features(const EnvState& s) {
  return {s.velocity / 30.0, s.acceleration / 4.0, s.desired_accel / 4.0, (s.gear - 5.5) / 4.5};
}

inline double gaussian_log_prob(double x, double mean, double stddev) {
  if (!(stddev > 0.0)) throw std::invalid_argument("gaussian_log_prob: stddev must be positive");
  double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double categorical_log_prob(int k, const std::array<double, 3>& p) {
  if (k < 0 || k >= kGearChoices) throw std::out_of_range("categorical_log_prob: category out of range");
  return std::log(p[static_cast<std::size_t>(k)]);
}

struct GaussianKl {
  double mean = 0.0;    // KL(N(m1, s1) || N(m2, s1))
  double stddev = 0.0;  // KL(N(m1, s1) || N(m1, s2))
};

inline GaussianKl kl_gaussian_decoupled(double mean1, double stddev1, double mean2, double stddev2) {
  if (!(stddev1 > 0.0) || !(stddev2 > 0.0)) throw std::invalid_argument("kl_gaussian_decoupled: stddev must be positive");
  GaussianKl kl;
  double dm = mean2 - mean1;
  kl.mean = dm * dm / (2.0 * stddev1 * stddev1);
  kl.stddev = std::log(stddev2 / stddev1) + stddev1 * stddev1 / (2.0 * stddev2 * stddev2) - 0.5;
  return kl;
}

/// KL(p || q) over three categories; terms with p_k == 0 contribute 0.
inline double kl_categorical(const std::array<double, 3>& p, const std::array<double, 3>& q) {
  double kl = 0.0;
  for (std::size_t k = 0; k < 3; ++k)
    if (p[k] > 0.0) kl += p[k] * std::log(p[k] / q[k]);
  return kl;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct PolicyHeadOutput {
  double mean = 0.0;
  double stddev = 1.0;
  std::array<double, 3> probs{1.0 / 3, 1.0 / 3, 1.0 / 3};  // gear command -1, 0, +1
};

struct StddevRange {
  double min = 0.01;
  double max = 1.0;
};

/// Batched head outputs, one column per state.
struct PolicyBatch {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd stddev;
  Eigen::MatrixXd probs;  // (3 x batch)
  Eigen::RowVectorXd stddev_gate;  // sigmoid output before scaling, kept for backprop

  Eigen::Index size() const { return mean.size(); }

  PolicyHeadOutput at(Eigen::Index i) const {
    return {mean(i), stddev(i), {probs(0, i), probs(1, i), probs(2, i)}};
  }
};

/// Gradient of a scalar with respect to the head outputs of a batch.
struct PolicyHeadGrad {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd stddev;
  Eigen::MatrixXd logits;  // (3 x batch)
};

/// Shared trunk, five linear outputs: mean pre-activation, stddev gate,
/// three gear logits.
class PolicyNet {
 public:
  static constexpr int kOutputs = 5;

  PolicyNet() = default;
  PolicyNet(Mlp trunk, StddevRange range) : net_(std::move(trunk)), range_(range) {
    if (net_.input_size() != kStateFeatures || net_.output_size() != kOutputs)
      throw std::invalid_argument("PolicyNet: network must map 4 features to 5 outputs");
    if (!(range_.min > 0.0 && range_.max > range_.min)) throw std::invalid_argument("PolicyNet: bad stddev range");
  }

  template <typename Rng>
  static PolicyNet xavier(const std::vector<int>& hidden, StddevRange range, Rng& rng) {
    std::vector<int> sizes{kStateFeatures};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(kOutputs);
    return PolicyNet(Mlp::xavier(sizes, Activation::tanh, Activation::identity, rng), range);
  }

  /// Scales the output layer weights and sets the mean and stddev biases so
  /// the untrained policy starts near (`mean`, `stddev`).
  void shape_initial_output(double weight_scale, double stddev, double mean = 0.0) {
    auto& p = net_.params();
    p.weights.back() *= weight_scale;
    p.biases.back()(0) = std::atanh(std::clamp(mean, -0.999, 0.999));
    double frac = std::clamp((stddev - range_.min) / (range_.max - range_.min), 1e-6, 1.0 - 1e-6);
    p.biases.back()(1) = std::log(frac / (1.0 - frac));
  }

  PolicyBatch heads(const Eigen::MatrixXd& raw) const {
    PolicyBatch b;
    Eigen::Index n = raw.cols();
    b.mean = raw.row(0).array().tanh().matrix();
    b.stddev_gate = raw.row(1).unaryExpr([](double x) { return sigmoid(x); });
    b.stddev = (range_.min + (range_.max - range_.min) * b.stddev_gate.array()).matrix();
    b.probs.resize(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Vector3d logits = raw.block<3, 1>(2, i);
      Eigen::Vector3d e = (logits.array() - logits.maxCoeff()).exp();
      b.probs.col(i) = e / e.sum();
    }
    if (!b.mean.allFinite() || !b.stddev.allFinite() || !b.probs.allFinite())
      throw std::runtime_error("PolicyNet: non-finite head output");
    return b;
  }

  PolicyBatch forward(const Eigen::MatrixXd& features) const { return heads(net_.forward(features)); }
  PolicyBatch forward(const Eigen::MatrixXd& features, Mlp::Tape& tape) const { return heads(net_.forward(features, tape)); }

  PolicyHeadOutput forward(const EnvState& s) const {
    Eigen::MatrixXd x = state_features(s);
    return forward(x).at(0);
  }

  /// Chains head-output gradients through the squashing into the trunk.
  MlpParams backward(const Mlp::Tape& tape, const PolicyBatch& out, const PolicyHeadGrad& g) const {
    Eigen::Index n = out.size();
    Eigen::MatrixXd d_raw(kOutputs, n);
    d_raw.row(0) = (g.mean.array() * (1.0 - out.mean.array().square())).matrix();
    d_raw.row(1) = (g.stddev.array() * (range_.max - range_.min) * out.stddev_gate.array() * (1.0 - out.stddev_gate.array())).matrix();
    d_raw.bottomRows(3) = g.logits;
    return net_.backward(tape, d_raw);
  }

  Mlp& network() { return net_; }
  const Mlp& network() const { return net_; }
  const StddevRange& stddev_range() const { return range_; }

 private:
  Mlp net_;
  StddevRange range_;
};

inline Eigen::Matrix<double, kCriticInputs, 1> critic_input(const EnvState& s, double torque, int gear_command) {
  Eigen::Matrix<double, kCriticInputs, 1> x = Eigen::Matrix<double, kCriticInputs, 1>::Zero();
  x.head<4>() = state_features(s);
  x(4) = std::clamp(torque, -1.0, 1.0);
  x(5 + gear_command + 1) = 1.0;
  return x;
}

/// Q(s, a) over the concatenated (state features, torque, one-hot gear command).
class QNet {
 public:
  QNet() = default;
  explicit QNet(Mlp net) : net_(std::move(net)) {
    if (net_.input_size() != kCriticInputs || net_.output_size() != 1)
      throw std::invalid_argument("QNet: network must map 8 inputs to 1 output");
  }

  template <typename Rng>
  static QNet xavier(const std::vector<int>& hidden, Rng& rng) {
    std::vector<int> sizes{kCriticInputs};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    return QNet(Mlp::xavier(sizes, Activation::tanh, Activation::identity, rng));
  }

  Eigen::RowVectorXd forward(const Eigen::MatrixXd& inputs) const {
    Eigen::RowVectorXd q = net_.forward(inputs);
    if (!q.allFinite()) throw std::runtime_error("QNet: non-finite output");
    return q;
  }
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& inputs, Mlp::Tape& tape) const {
    Eigen::RowVectorXd q = net_.forward(inputs, tape);
    if (!q.allFinite()) throw std::runtime_error("QNet: non-finite output");
    return q;
  }
  double operator()(const EnvState& s, double torque, int gear_command) const {
    Eigen::MatrixXd x = critic_input(s, torque, gear_command);
    return forward(x)(0);
  }

  MlpParams backward(const Mlp::Tape& tape, const Eigen::RowVectorXd& d_q) const { return net_.backward(tape, d_q); }

  Mlp& network() { return net_; }
  const Mlp& network() const { return net_; }

 private:
  Mlp net_;
};

/// E_pi Q(s, .): the gear command is enumerated exactly, the torque is
/// averaged over `samples` Gaussian draws (clipped to the actuator range
/// before reaching the critic).
template <typename Rng>
double expected_q(const QNet& critic, const EnvState& state, const PolicyHeadOutput& policy, int samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("expected_q: need at least one sample");
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(kCriticInputs, samples * kGearChoices);
  for (int m = 0; m < samples; ++m) {
    double c = policy.mean + policy.stddev * z(rng);
    for (int d = 0; d < kGearChoices; ++d) x.col(m * kGearChoices + d) = critic_input(state, c, d - 1);
  }
  Eigen::RowVectorXd q = critic.forward(x);
  double total = 0.0;
  for (int d = 0; d < kGearChoices; ++d) {
    double mean_q = 0.0;
    for (int m = 0; m < samples; ++m) mean_q += q(m * kGearChoices + d);
    total += policy.probs[static_cast<std::size_t>(d)] * mean_q / samples;
  }
  return total;
}

}  // namespace ecodrive::nn

#pragma once

// Fully connected networks with hand-written reverse mode. Samples are
// stored column-wise: an input batch is (features x batch).

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecodrive::nn {

enum class Activation : std::uint32_t { identity = 0, tanh = 1 };

/// Weights and biases of every layer. Also used for gradients and for
/// optimizer moments, which share the same shapes.
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // (out x in)
  std::vector<Eigen::VectorXd> biases;   // (out)

  MlpParams zeros_like() const {
    MlpParams z;
    for (const auto& w : weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : biases) z.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    return z;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
    return n;
  }

  /// Calls f(Eigen::Map<Eigen::ArrayXd>) on every tensor, weights first.
  template <typename F>
  void for_each(F&& f) {
    for (auto& w : weights) f(Eigen::Map<Eigen::ArrayXd>(w.data(), w.size()));
    for (auto& b : biases) f(Eigen::Map<Eigen::ArrayXd>(b.data(), b.size()));
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& w : weights) f(Eigen::Map<const Eigen::ArrayXd>(w.data(), w.size()));
    for (const auto& b : biases) f(Eigen::Map<const Eigen::ArrayXd>(b.data(), b.size()));
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&ok](const auto& t) { ok = ok && t.isFinite().all(); });
    return ok;
  }

  bool same_shape(const MlpParams& o) const {
    if (weights.size() != o.weights.size() || biases.size() != o.biases.size()) return false;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (weights[i].rows() != o.weights[i].rows() || weights[i].cols() != o.weights[i].cols()) return false;
    for (std::size_t i = 0; i < biases.size(); ++i)
      if (biases[i].size() != o.biases[i].size()) return false;
    return true;
  }

  bool operator==(const MlpParams& o) const {
    if (!same_shape(o)) return false;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (weights[i] != o.weights[i]) return false;
    for (std::size_t i = 0; i < biases.size(); ++i)
      if (biases[i] != o.biases[i]) return false;
    return true;
  }
};

/// Uniform Glorot/Xavier draw, shape (fan_out x fan_in).
template <typename Rng>
Eigen::MatrixXd xavier_init(int fan_in, int fan_out, Rng& rng) {
  if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("xavier_init: fans must be >= 1");
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Eigen::MatrixXd w(fan_out, fan_in);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
  return w;
}

class Mlp {
 public:
  /// Activations after the input and after every layer; values[0] is the input.
  struct Tape {
    std::vector<Eigen::MatrixXd> values;
  };

  Mlp() = default;

  /// Zero-initialized network with layer widths `sizes` = {in, hidden..., out}.
  Mlp(std::vector<int> sizes, Activation hidden, Activation output = Activation::identity)
      : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (int s : sizes_)
      if (s < 1) throw std::invalid_argument("Mlp: layer sizes must be >= 1");
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
      params_.weights.push_back(Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]));
      params_.biases.push_back(Eigen::VectorXd::Zero(sizes_[i + 1]));
    }
  }

  template <typename Rng>
  static Mlp xavier(std::vector<int> sizes, Activation hidden, Activation output, Rng& rng) {
    Mlp net(std::move(sizes), hidden, output);
    for (std::size_t i = 0; i < net.params_.weights.size(); ++i)
      net.params_.weights[i] = xavier_init(net.sizes_[i], net.sizes_[i + 1], rng);
    return net;
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    check_input(x);
    Eigen::MatrixXd h = x;
    for (std::size_t i = 0; i < layers(); ++i) {
      Eigen::MatrixXd z = params_.weights[i] * h;
      z.colwise() += params_.biases[i];
      activate(z, activation(i));
      h = std::move(z);
    }
    return h;
  }

  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x, Tape& tape) const {
    check_input(x);
    tape.values.resize(layers() + 1);
    tape.values[0] = x;
    for (std::size_t i = 0; i < layers(); ++i) {
      Eigen::MatrixXd& z = tape.values[i + 1];
      z.noalias() = params_.weights[i] * tape.values[i];
      z.colwise() += params_.biases[i];
      activate(z, activation(i));
    }
    return tape.values.back();
  }

  /// Gradient of a scalar loss given dL/d(output); optionally dL/d(input).
  MlpParams backward(const Tape& tape, const Eigen::MatrixXd& d_out, Eigen::MatrixXd* d_input = nullptr) const {
    if (tape.values.size() != layers() + 1) throw std::logic_error("Mlp::backward: tape does not match network");
    MlpParams g;
    g.weights.resize(layers());
    g.biases.resize(layers());
    Eigen::MatrixXd delta = d_out;
    for (std::size_t k = layers(); k-- > 0;) {
      if (activation(k) == Activation::tanh) delta.array() *= 1.0 - tape.values[k + 1].array().square();
      g.weights[k].noalias() = delta * tape.values[k].transpose();
      g.biases[k] = delta.rowwise().sum();
      if (k > 0 || d_input) {
        Eigen::MatrixXd prev = params_.weights[k].transpose() * delta;
        delta = std::move(prev);
      }
    }
    if (d_input) *d_input = std::move(delta);
    return g;
  }

  std::size_t layers() const { return params_.weights.size(); }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  MlpParams& params() { return params_; }
  const MlpParams& params() const { return params_; }

  bool operator==(const Mlp& o) const {
    return sizes_ == o.sizes_ && hidden_ == o.hidden_ && output_ == o.output_ && params_ == o.params_;
  }

 private:
  Activation activation(std::size_t layer) const { return layer + 1 == layers() ? output_ : hidden_; }

  static void activate(Eigen::MatrixXd& z, Activation a) {
    if (a == Activation::tanh) z = z.array().tanh().matrix();
  }

  void check_input(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_size())
      throw std::invalid_argument("Mlp: expected " + std::to_string(input_size()) + " input rows, got " + std::to_string(x.rows()));
    if (!x.allFinite()) throw std::runtime_error("Mlp: non-finite input");
  }

  std::vector<int> sizes_;
  Activation hidden_ = Activation::tanh;
  Activation output_ = Activation::identity;
  MlpParams params_;
};

}  // namespace ecodrive::nn

#pragma once

// Named-tensor container used for network and learner checkpoints. Byte
// layout is documented in docs/checkpoint_format.md; all integers and
// floats are little-endian.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecodrive/nn/adam.hpp"
#include "ecodrive/nn/mlp.hpp"

namespace ecodrive::nn {

inline constexpr char kCheckpointMagic[8] = {'E', 'C', 'O', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    value = std::bit_cast<T>(bytes);
  }
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    value = std::bit_cast<T>(bytes);
  }
  return value;
}

}  // namespace detail

class Checkpoint {
 public:
  void add(std::string name, std::vector<std::uint64_t> shape, std::vector<double> data) {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    if (n != data.size()) throw std::invalid_argument("checkpoint: tensor '" + name + "' shape does not match data");
    if (find(name)) throw std::invalid_argument("checkpoint: duplicate tensor '" + name + "'");
    tensors_.push_back({std::move(name), std::move(shape), std::move(data)});
  }

  void add_scalar(std::string name, double v) { add(std::move(name), {1}, {v}); }

  const Tensor* find(const std::string& name) const {
    for (const auto& t : tensors_)
      if (t.name == name) return &t;
    return nullptr;
  }

  const Tensor& at(const std::string& name) const {
    if (const Tensor* t = find(name)) return *t;
    throw CheckpointError("checkpoint: missing tensor '" + name + "'");
  }

  double scalar(const std::string& name) const {
    const Tensor& t = at(name);
    if (t.data.size() != 1) throw CheckpointError("checkpoint: '" + name + "' is not a scalar");
    return t.data[0];
  }

  const std::vector<Tensor>& tensors() const { return tensors_; }

  void write(std::ostream& out) const {
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put<std::uint32_t>(out, kCheckpointVersion);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& t : tensors_) {
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
      out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) detail::put<std::uint64_t>(out, d);
      for (double v : t.data) detail::put<double>(out, v);
    }
    if (!out) throw CheckpointError("checkpoint: write failed");
  }

  static Checkpoint read(std::istream& in) {
    char magic[sizeof kCheckpointMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw CheckpointError("checkpoint: bad magic");
    auto version = detail::get<std::uint32_t>(in);
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
    auto count = detail::get<std::uint32_t>(in);
    Checkpoint ck;
    for (std::uint32_t i = 0; i < count; ++i) {
      auto name_len = detail::get<std::uint32_t>(in);
      std::string name(name_len, '\0');
      in.read(name.data(), name_len);
      if (!in) throw CheckpointError("checkpoint: truncated name");
      auto rank = detail::get<std::uint32_t>(in);
      std::vector<std::uint64_t> shape(rank);
      std::uint64_t n = 1;
      for (auto& d : shape) {
        d = detail::get<std::uint64_t>(in);
        n *= d;
      }
      if (n > (std::uint64_t{1} << 32)) throw CheckpointError("checkpoint: tensor '" + name + "' too large");
      std::vector<double> data(n);
      for (auto& v : data) v = detail::get<double>(in);
      ck.add(std::move(name), std::move(shape), std::move(data));
    }
    return ck;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("checkpoint: cannot write " + path);
    write(out);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("checkpoint: cannot open " + path);
    return read(in);
  }

 private:
  std::vector<Tensor> tensors_;
};

/// Weights stored row-major as `<prefix>/W<i>` (out, in) and `<prefix>/b<i>`.
inline void store_params(Checkpoint& ck, const std::string& prefix, const MlpParams& p) {
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const auto& w = p.weights[i];
    std::vector<double> data(static_cast<std::size_t>(w.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(data.data(), w.rows(), w.cols()) = w;
    ck.add(prefix + "/W" + std::to_string(i), {static_cast<std::uint64_t>(w.rows()), static_cast<std::uint64_t>(w.cols())}, std::move(data));
    const auto& b = p.biases[i];
    ck.add(prefix + "/b" + std::to_string(i), {static_cast<std::uint64_t>(b.size())}, std::vector<double>(b.data(), b.data() + b.size()));
  }
}

/// Reads tensors into `p`, which must already have the expected shapes.
inline void restore_params(const Checkpoint& ck, const std::string& prefix, MlpParams& p) {
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    auto& w = p.weights[i];
    const Tensor& tw = ck.at(prefix + "/W" + std::to_string(i));
    if (tw.shape != std::vector<std::uint64_t>{static_cast<std::uint64_t>(w.rows()), static_cast<std::uint64_t>(w.cols())})
      throw CheckpointError("checkpoint: shape mismatch for " + tw.name);
    w = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(tw.data.data(), w.rows(), w.cols());
    auto& b = p.biases[i];
    const Tensor& tb = ck.at(prefix + "/b" + std::to_string(i));
    if (tb.shape != std::vector<std::uint64_t>{static_cast<std::uint64_t>(b.size())})
      throw CheckpointError("checkpoint: shape mismatch for " + tb.name);
    b = Eigen::Map<const Eigen::VectorXd>(tb.data.data(), b.size());
  }
}

/// Layout tensor `<prefix>/layout` = [sizes..., hidden activation, output activation].
inline void store_mlp(Checkpoint& ck, const std::string& prefix, const Mlp& net) {
  std::vector<double> layout(net.sizes().begin(), net.sizes().end());
  layout.push_back(static_cast<double>(net.hidden_activation()));
  layout.push_back(static_cast<double>(net.output_activation()));
  ck.add(prefix + "/layout", {layout.size()}, layout);
  store_params(ck, prefix, net.params());
}

inline Mlp restore_mlp(const Checkpoint& ck, const std::string& prefix) {
  const Tensor& layout = ck.at(prefix + "/layout");
  if (layout.data.size() < 4) throw CheckpointError("checkpoint: bad layout for " + prefix);
  std::vector<int> sizes;
  for (std::size_t i = 0; i + 2 < layout.data.size(); ++i) sizes.push_back(static_cast<int>(layout.data[i]));
  auto act = [&](double v) {
    if (v != 0.0 && v != 1.0) throw CheckpointError("checkpoint: unknown activation in " + prefix);
    return static_cast<Activation>(static_cast<std::uint32_t>(v));
  };
  Mlp net(sizes, act(layout.data[layout.data.size() - 2]), act(layout.data.back()));
  restore_params(ck, prefix, net.params());
  return net;
}

inline void store_adam(Checkpoint& ck, const std::string& prefix, const Adam& adam, const MlpParams& shape) {
  ck.add_scalar(prefix + "/steps", static_cast<double>(adam.steps()));
  ck.add_scalar(prefix + "/lr", adam.config().learning_rate);
  store_params(ck, prefix + "/m", adam.steps() ? adam.first_moment() : shape.zeros_like());
  store_params(ck, prefix + "/v", adam.steps() ? adam.second_moment() : shape.zeros_like());
}

inline void restore_adam(const Checkpoint& ck, const std::string& prefix, Adam& adam, const MlpParams& shape) {
  MlpParams m = shape.zeros_like(), v = shape.zeros_like();
  restore_params(ck, prefix + "/m", m);
  restore_params(ck, prefix + "/v", v);
  adam.restore(static_cast<std::uint64_t>(ck.scalar(prefix + "/steps")), std::move(m), std::move(v));
}

}  // namespace ecodrive::nn

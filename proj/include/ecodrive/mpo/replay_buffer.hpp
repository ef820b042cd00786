#pragma once

// Episode-structured replay. Windows for multi-step returns are cut from
// a single episode and never cross into the next one.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ecodrive/powertrain_env.hpp"

namespace ecodrive {

/// One stored step; the unit of replay.
struct Transition {
  EnvState state;
  HybridAction action;            // as applied (torque clipped to [-1, 1])
  double continuous_sample = 0.0; // unclipped draw the log-density refers to
  double reward = 0.0;
  EnvState next_state;
  double behavior_logprob = 0.0;  // continuous part of the behavior policy
  double behavior_prob = 1.0;     // discrete part, in (0, 1]
  bool done = false;
};

using Episode = std::vector<Transition>;

/// A contiguous slice of one episode.
using Window = std::vector<Transition>;

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }

  /// Appends a whole episode, evicting the oldest episodes beyond capacity.
  void push(Episode episode) {
    if (episode.empty()) return;
    for (const auto& t : episode)
      if (!(t.behavior_prob > 0.0 && t.behavior_prob <= 1.0) || !std::isfinite(t.behavior_logprob))
        throw std::invalid_argument("ReplayBuffer: invalid behavior probabilities");
    std::lock_guard lock(mutex_);
    size_ += episode.size();
    episodes_.push_back(std::move(episode));
    while (size_ > capacity_ && episodes_.size() > 1) {
      size_ -= episodes_.front().size();
      episodes_.pop_front();
    }
  }

  /// `count` windows of at most `length` steps. Every stored transition is
  /// an equally likely start; windows are truncated at episode ends.
  template <typename Rng>
  std::vector<Window> sample_windows(Rng& rng, std::size_t count, std::size_t length) const {
    if (length == 0) throw std::invalid_argument("sample_windows: length must be positive");
    std::lock_guard lock(mutex_);
    if (size_ == 0) throw std::runtime_error("sample_windows: replay buffer is empty");
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
      auto [e, start] = locate(pick(rng));
      const Episode& ep = episodes_[e];
      std::size_t end = std::min(ep.size(), start + length);
      out.emplace_back(ep.begin() + static_cast<std::ptrdiff_t>(start), ep.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return size_;
  }
  std::size_t episodes() const {
    std::lock_guard lock(mutex_);
    return episodes_.size();
  }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size() == 0; }
  /// Number of distinct window start points.
  std::size_t valid_starts() const { return size(); }

 private:
  /// Episode index and offset of the i-th stored transition (oldest first).
  std::pair<std::size_t, std::size_t> locate(std::size_t index) const {
    for (std::size_t e = 0; e < episodes_.size(); ++e) {
      if (index < episodes_[e].size()) return {e, index};
      index -= episodes_[e].size();
    }
    throw std::out_of_range("ReplayBuffer: index out of range");
  }

  std::size_t capacity_;
  std::size_t size_ = 0;
  std::deque<Episode> episodes_;
  mutable std::mutex mutex_;
};

}  // namespace ecodrive

#pragma once

// Retrace multi-step Q targets over a window of one episode:
//
//   Q_ret(s_t, a_t) = Q(s_t, a_t) + sum_{j >= t} gamma^(j - t) (prod_{i = t+1..j} c_i) delta_j
//   delta_j         = r_j + gamma * (1 - done_j) * E_pi Q(s_{j+1}, .) - Q(s_j, a_j)
//   c_i             = lambda * min(1, pi(a_i | s_i) / mu(a_i | s_i))
//
// The sum runs to the end of the window.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace ecodrive {

struct RetraceStep {
  double q = 0.0;            // Q(s_t, a_t) under the evaluation critic
  double expected_next = 0;  // E_pi Q(s_{t+1}, .)
  double reward = 0.0;
  double ratio = 1.0;        // pi(a_t | s_t) / mu(a_t | s_t)
  bool done = false;
};

inline double truncated_trace(double ratio, double lambda) {
  if (!std::isfinite(ratio) || ratio < 0.0) throw std::invalid_argument("retrace: invalid importance ratio");
  return lambda * std::min(1.0, ratio);
}

/// Importance ratio of a hybrid action: continuous density ratio times
/// discrete probability ratio.
inline double hybrid_ratio(double target_logprob_c, double behavior_logprob_c, double target_prob_d, double behavior_prob_d) {
  if (!(behavior_prob_d > 0.0)) throw std::invalid_argument("retrace: zero behavior probability");
  return std::exp(target_logprob_c - behavior_logprob_c) * target_prob_d / behavior_prob_d;
}

/// Targets for every step of the window, by backward recursion.
inline std::vector<double> retrace_targets(std::span<const RetraceStep> window, double gamma, double lambda) {
  std::vector<double> out(window.size());
  double tail = 0.0;  // sum_{j > t} gamma^(j - t - 1) (prod_{i = t+2..j} c_i) delta_j, seen from t + 1
  for (std::size_t n = window.size(); n-- > 0;) {
    const RetraceStep& s = window[n];
    double delta = s.reward + (s.done ? 0.0 : gamma * s.expected_next) - s.q;
    double carried = 0.0;
    if (n + 1 < window.size()) carried = gamma * truncated_trace(window[n + 1].ratio, lambda) * tail;
    tail = delta + carried;
    out[n] = s.q + tail;
  }
  return out;
}

}  // namespace ecodrive

#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. None of them reuse the library code they check.

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <tuple>
#include <vector>

#include "ecodrive/baseline.hpp"
#include "ecodrive/mpo/mstep.hpp"
#include "ecodrive/mpo/retrace.hpp"
#include "ecodrive/nn/policy.hpp"
#include "ecodrive/powertrain_env.hpp"

namespace ecodrive::oracle {

/// Random tabular MDP with a sampled trajectory, as Retrace inputs.
struct TabularCase {
  std::vector<RetraceStep> steps;
  std::vector<int> states, actions;  // states has one extra bootstrap entry
  std::vector<double> rewards;
  Eigen::MatrixXd q, pi, mu;         // (states x actions)
  bool terminal = false;
};

inline TabularCase random_tabular_case(std::mt19937_64& rng, int n_states, int n_actions, int length, bool same_policy,
                                        bool state_only_q = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0), r(-1.0, 1.0);
  auto random_policy = [&] {
    Eigen::MatrixXd p(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a) p(s, a) = 0.05 + u(rng);
      p.row(s) /= p.row(s).sum();
    }
    return p;
  };
  TabularCase c;
  c.q = Eigen::MatrixXd(n_states, n_actions);
  for (Eigen::Index i = 0; i < c.q.size(); ++i) c.q(i) = 5.0 * r(rng);
  if (state_only_q)
    for (int a = 1; a < n_actions; ++a) c.q.col(a) = c.q.col(0);
  c.mu = random_policy();
  c.pi = same_policy ? c.mu : random_policy();
  c.terminal = u(rng) < 0.3;
  std::uniform_int_distribution<int> pick_state(0, n_states - 1);
  int s = pick_state(rng);
  for (int t = 0; t < length; ++t) {
    std::discrete_distribution<int> act(c.mu.row(s).data(), c.mu.row(s).data() + n_actions);
    int a = act(rng);
    c.states.push_back(s);
    c.actions.push_back(a);
    c.rewards.push_back(r(rng));
    s = pick_state(rng);
  }
  c.states.push_back(s);
  for (int t = 0; t < length; ++t) {
    RetraceStep st;
    st.q = c.q(c.states[t], c.actions[t]);
    int next = c.states[t + 1];
    st.expected_next = c.pi.row(next).dot(c.q.row(next));
    st.reward = c.rewards[t];
    st.ratio = c.pi(c.states[t], c.actions[t]) / c.mu(c.states[t], c.actions[t]);
    st.done = c.terminal && t + 1 == length;
    c.steps.push_back(st);
  }
  return c;
}

/// Direct expansion: Q(x_t, a_t) + sum_j gamma^(j-t) (prod_{i=t+1..j} c_i) delta_j.
inline std::vector<double> retrace_brute_force(const TabularCase& c, double gamma, double lambda) {
  auto n = c.steps.size();
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    double total = c.q(c.states[t], c.actions[t]);
    for (std::size_t j = t; j < n; ++j) {
      double trace = 1.0;
      for (std::size_t i = t + 1; i <= j; ++i) {
        double ratio = c.pi(c.states[i], c.actions[i]) / c.mu(c.states[i], c.actions[i]);
        trace *= lambda * std::min(1.0, ratio);
      }
      int next = c.states[j + 1];
      double boot = (c.terminal && j + 1 == n) ? 0.0 : gamma * c.pi.row(next).dot(c.q.row(next));
      double delta = c.rewards[j] + boot - c.q(c.states[j], c.actions[j]);
      total += std::pow(gamma, static_cast<double>(j - t)) * trace * delta;
    }
    out[t] = total;
  }
  return out;
}

/// On-policy k-step return to the end of the window. Retrace with lambda = 1
/// reduces to it exactly only when Q does not depend on the action.
inline std::vector<double> k_step_return(const TabularCase& c, double gamma) {
  auto n = c.steps.size();
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    double g = 0.0;
    for (std::size_t j = t; j < n; ++j) g += std::pow(gamma, static_cast<double>(j - t)) * c.rewards[j];
    if (!c.terminal) {
      int last = c.states[n];
      g += std::pow(gamma, static_cast<double>(n - t)) * c.pi.row(last).dot(c.q.row(last));
    }
    out[t] = g;
  }
  return out;
}

/// Dual of the E-step written without max-shifting.
inline double dual_plain(double eta, const Eigen::MatrixXd& q, double eps) {
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    long double s = 0.0L;
    for (Eigen::Index j = 0; j < q.cols(); ++j) s += std::exp(static_cast<long double>(q(i, j)) / eta);
    acc += eta * std::log(s / static_cast<long double>(q.cols()));
  }
  return static_cast<double>(eta * eps + acc / static_cast<long double>(q.rows()));
}

/// Minimizer of the dual over `points` log-spaced temperatures in
/// [lo, hi], refined by a second grid of the same size over the cell
/// around the coarse winner.
inline double eta_grid_search(const Eigen::MatrixXd& q, double eps, double lo, double hi, int points) {
  auto scan = [&](double a, double b) {
    double best = a, best_g = INFINITY;
    for (int k = 0; k < points; ++k) {
      double eta = std::exp(std::log(a) + (std::log(b) - std::log(a)) * k / (points - 1));
      double g = dual_plain(eta, q, eps);
      if (g < best_g) {
        best_g = g;
        best = eta;
      }
    }
    return best;
  };
  double coarse = scan(lo, hi);
  double cell = std::exp((std::log(hi) - std::log(lo)) / (points - 1));
  return scan(std::max(lo, coarse / cell), std::min(hi, coarse * cell));
}

/// Frozen E-step batch over random states for a given actor: torque draws
/// from the actor and weights that favour high torque and upshifts.
inline MStepBatch synthetic_mstep_batch(const nn::PolicyNet& actor, int states, int samples, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MStepBatch b;
  b.features.resize(nn::kStateFeatures, states);
  for (int i = 0; i < states; ++i)
    for (int f = 0; f < nn::kStateFeatures; ++f) b.features(f, i) = u(rng);
  b.old_policy = actor.forward(b.features);
  b.torque.resize(states, samples);
  b.gear.resize(states, samples);
  Eigen::MatrixXd q(states, samples);
  for (int i = 0; i < states; ++i) {
    const auto& p = b.old_policy;
    std::discrete_distribution<int> gear({p.probs(0, i), p.probs(1, i), p.probs(2, i)});
    for (int j = 0; j < samples; ++j) {
      b.torque(i, j) = p.mean(i) + p.stddev(i) * z(rng);
      b.gear(i, j) = gear(rng);
      q(i, j) = 3.0 * b.torque(i, j) + 0.5 * b.gear(i, j) + 0.1 * z(rng);
    }
  }
  // Fixed temperature, so the batch does not depend on the dual solver.
  double eta = 0.2;
  b.weights.resize(states, samples);
  for (int i = 0; i < states; ++i) {
    double top = q.row(i).maxCoeff();
    for (int j = 0; j < samples; ++j) b.weights(i, j) = std::exp((q(i, j) - top) / eta);
    b.weights.row(i) /= b.weights.row(i).sum();
  }
  return b;
}

/// Exhaustive search over every gear reachable by one command. Ranks by
/// (fails to deliver, cost or missing torque, preference rank).
inline int baseline_gear_brute_force(const EnvState& s, double torque, const VehicleConfig& c, const BaselineConfig& bc) {
  std::tuple<int, double, int> best{2, 0.0, 9};
  int best_u = 0;
  const int rank[3] = {2, 0, 1};  // index u+1: downshift last, hold first
  double demand = torque * c.max_wheel_torque();
  for (int u = -1; u <= 1; ++u) {
    int g = s.gear + u;
    if (g < 1 || g > c.gear_count()) continue;
    if (u != 0) {
      double w = s.velocity / c.wheel_radius * c.total_ratio(g);
      if (w > c.max_speed || (u > 0 && w < c.idle_speed)) continue;
    }
    TorqueSplit split = apply_torque(torque, s.velocity, g, c);
    bool delivers = demand <= 0.0 || split.wheel >= demand * (1.0 - 1e-9);
    double fuel = fuel_rate(engine_speed(s.velocity, g, c), split.engine, c);
    double score = delivers ? fuel + bc.shift_penalty * std::abs(u) : -split.wheel;
    std::tuple<int, double, int> key{delivers ? 0 : 1, score, rank[u + 1]};
    if (key < best) {
      best = key;
      best_u = u;
    }
  }
  return best_u;
}

}  // namespace ecodrive::oracle

#pragma once

// MPO learner for the hybrid torque/gear policy: Retrace critic
// regression against target networks, E-step reweighting of sampled
// actions, and the decoupled M-step.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecodrive/controller.hpp"
#include "ecodrive/mpo/config.hpp"
#include "ecodrive/mpo/estep.hpp"
#include "ecodrive/mpo/mstep.hpp"
#include "ecodrive/mpo/replay_buffer.hpp"
#include "ecodrive/mpo/retrace.hpp"
#include "ecodrive/nn/adam.hpp"
#include "ecodrive/nn/checkpoint.hpp"
#include "ecodrive/nn/policy.hpp"

namespace ecodrive {

inline int gear_index(int gear_command) { return gear_command + 1; }
inline int gear_command_of(int index) { return index - 1; }

/// Draws an action from the policy head, or takes its mode.
template <typename Rng>
ControlDecision sample_action(const nn::PolicyHeadOutput& p, bool deterministic, Rng& rng) {
  ControlDecision d;
  int k = 0;
  double c = p.mean;
  if (deterministic) {
    k = static_cast<int>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
  } else {
    c = p.mean + p.stddev * std::normal_distribution<double>(0.0, 1.0)(rng);
    k = std::discrete_distribution<int>(p.probs.begin(), p.probs.end())(rng);
  }
  d.continuous_sample = c;
  d.action.torque = std::clamp(c, -1.0, 1.0);
  d.action.gear_command = gear_command_of(k);
  d.behavior_logprob = nn::gaussian_log_prob(c, p.mean, p.stddev);
  d.behavior_prob = p.probs[static_cast<std::size_t>(k)];
  return d;
}

/// Controller backed by a copy of an actor network.
class PolicyController final : public Controller {
 public:
  PolicyController(nn::PolicyNet actor, bool deterministic, std::uint64_t seed)
      : actor_(std::move(actor)), deterministic_(deterministic), rng_(seed) {}

  ControlDecision decide(const EnvState& state, double) override {
    return sample_action(actor_.forward(state), deterministic_, rng_);
  }

 private:
  nn::PolicyNet actor_;
  bool deterministic_;
  std::mt19937_64 rng_;
};

/// Q of M torque draws per state, evaluated for every gear command.
struct SampledQ {
  nn::PolicyBatch policy;
  Eigen::MatrixXd torque;                 // (states x M) raw draws
  std::array<Eigen::MatrixXd, 3> q;       // per gear index, (states x M)

  /// E_pi Q(s, .) with the gear dimension enumerated exactly.
  double expected(Eigen::Index i) const {
    double v = 0.0;
    for (int k = 0; k < 3; ++k) v += policy.probs(k, i) * q[static_cast<std::size_t>(k)].row(i).mean();
    return v;
  }
};

template <typename Rng>
SampledQ sample_q(const nn::PolicyNet& actor, const nn::QNet& critic, const std::vector<EnvState>& states, int samples, Rng& rng) {
  auto n = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXd features(nn::kStateFeatures, n);
  for (Eigen::Index i = 0; i < n; ++i) features.col(i) = nn::state_features(states[static_cast<std::size_t>(i)]);
  SampledQ out;
  out.policy = actor.forward(features);
  out.torque.resize(n, samples);
  std::normal_distribution<double> z(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < samples; ++j) out.torque(i, j) = out.policy.mean(i) + out.policy.stddev(i) * z(rng);

  Eigen::MatrixXd x(nn::kCriticInputs, n * samples * 3);
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < samples; ++j)
      for (int k = 0; k < 3; ++k) x.col(col++) = nn::critic_input(states[static_cast<std::size_t>(i)], out.torque(i, j), gear_command_of(k));
  Eigen::RowVectorXd qs = critic.forward(x);
  for (auto& m : out.q) m.resize(n, samples);
  col = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < samples; ++j)
      for (int k = 0; k < 3; ++k) out.q[static_cast<std::size_t>(k)](i, j) = qs(col++);
  return out;
}

/// One Adam step on the mean squared error between Q(inputs) and targets.
inline double critic_update(nn::QNet& critic, nn::Adam& opt, const Eigen::MatrixXd& inputs, const Eigen::RowVectorXd& targets) {
  if (inputs.cols() == 0 || inputs.cols() != targets.size()) throw std::invalid_argument("critic_update: bad batch");
  nn::Mlp::Tape tape;
  Eigen::RowVectorXd q = critic.forward(inputs, tape);
  Eigen::RowVectorXd err = q - targets;
  double loss = err.squaredNorm() / static_cast<double>(err.size());
  if (!std::isfinite(loss)) throw std::runtime_error("critic_update: non-finite loss");
  Eigen::RowVectorXd d_q = 2.0 * err / static_cast<double>(err.size());
  opt.step(critic.network().params(), critic.backward(tape, d_q));
  return loss;
}

struct LearnerStats {
  double critic_loss = 0.0;
  double temperature = 0.0;
  double mean_q = 0.0;
  MStepDiagnostics mstep;
  Multipliers alpha;
};

class MpoLearner {
 public:
  MpoLearner(MpoConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
    cfg_.validate();
    actor_ = nn::PolicyNet::xavier(cfg_.actor_hidden, cfg_.stddev, rng_);
    if (cfg_.output_init_scale != 1.0 || cfg_.initial_stddev > 0.0 || cfg_.initial_mean != 0.0) {
      double sd = cfg_.initial_stddev > 0.0 ? cfg_.initial_stddev : actor_.forward(EnvState{}).stddev;
      actor_.shape_initial_output(cfg_.output_init_scale, sd, cfg_.initial_mean);
    }
    critic_ = nn::QNet::xavier(cfg_.critic_hidden, rng_);
    target_actor_ = actor_;
    target_critic_ = critic_;
    actor_opt_ = nn::Adam(nn::AdamConfig{cfg_.actor_lr});
    critic_opt_ = nn::Adam(nn::AdamConfig{cfg_.critic_lr});
    alpha_ = {cfg_.alpha_continuous, cfg_.alpha_continuous, cfg_.alpha_discrete};
  }

  /// Retrace targets of one window. `target_policy` holds the target
  /// actor at each step's state, `q_taken` the target critic at the taken
  /// action and `next_q` E_pi Q(s_{t+1}, .).
  std::vector<double> retrace_window(const Window& w, const nn::PolicyBatch& target_policy, std::span<const double> q_taken,
                                     std::span<const double> next_q) const {
    if (q_taken.size() != w.size() || next_q.size() != w.size() || target_policy.size() != static_cast<Eigen::Index>(w.size()))
      throw std::invalid_argument("retrace_window: inputs do not match the window");
    std::vector<RetraceStep> steps(w.size());
    for (std::size_t t = 0; t < w.size(); ++t) {
      const Transition& tr = w[t];
      auto i = static_cast<Eigen::Index>(t);
      RetraceStep& s = steps[t];
      s.q = q_taken[t];
      s.expected_next = next_q[t];
      s.reward = tr.reward;
      s.done = tr.done;
      double logp = nn::gaussian_log_prob(tr.continuous_sample, target_policy.mean(i), target_policy.stddev(i));
      s.ratio = hybrid_ratio(logp, tr.behavior_logprob, target_policy.probs(gear_index(tr.action.gear_command), i), tr.behavior_prob);
    }
    return retrace_targets(steps, cfg_.gamma, cfg_.lambda);
  }

  /// One learner step on a fresh batch of windows from `buffer`.
  LearnerStats update(const ReplayBuffer& buffer) {
    std::vector<Window> windows =
        buffer.sample_windows(rng_, static_cast<std::size_t>(cfg_.windows_per_batch()), static_cast<std::size_t>(cfg_.retrace_window));

    // Window states first, then one bootstrap state per window.
    std::vector<EnvState> states;
    std::vector<std::size_t> offset(windows.size());
    for (std::size_t w = 0; w < windows.size(); ++w) {
      offset[w] = states.size();
      for (const auto& tr : windows[w]) states.push_back(tr.state);
    }
    const std::size_t n = states.size();
    for (const auto& w : windows) states.push_back(w.back().next_state);

    SampledQ sq = sample_q(target_actor_, target_critic_, states, cfg_.action_samples, rng_);

    // Critic regression toward Retrace targets.
    Eigen::MatrixXd inputs(nn::kCriticInputs, static_cast<Eigen::Index>(n));
    for (std::size_t w = 0; w < windows.size(); ++w)
      for (std::size_t t = 0; t < windows[w].size(); ++t) {
        const Transition& tr = windows[w][t];
        inputs.col(static_cast<Eigen::Index>(offset[w] + t)) = nn::critic_input(tr.state, tr.action.torque, tr.action.gear_command);
      }
    Eigen::RowVectorXd q_taken = target_critic_.forward(inputs);
    Eigen::RowVectorXd targets(static_cast<Eigen::Index>(n));
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const Window& win = windows[w];
      std::size_t len = win.size(), base = offset[w];
      std::vector<double> next_q(len);
      for (std::size_t t = 0; t < len; ++t) {
        std::size_t next = t + 1 < len ? base + t + 1 : n + w;
        next_q[t] = sq.expected(static_cast<Eigen::Index>(next));
      }
      nn::PolicyBatch pol = slice(sq.policy, static_cast<Eigen::Index>(base), static_cast<Eigen::Index>(len));
      std::vector<double> ret = retrace_window(win, pol, std::span<const double>(q_taken.data() + base, len), next_q);
      for (std::size_t t = 0; t < len; ++t) targets(static_cast<Eigen::Index>(base + t)) = ret[t];
    }
    LearnerStats stats;
    stats.critic_loss = critic_update(critic_, critic_opt_, inputs, targets);

    // E-step over joint draws: the torque draw paired with a sampled gear.
    auto ni = static_cast<Eigen::Index>(n);
    const int m = cfg_.action_samples;
    MStepBatch mb;
    mb.features.resize(nn::kStateFeatures, ni);
    for (Eigen::Index i = 0; i < ni; ++i) mb.features.col(i) = nn::state_features(states[static_cast<std::size_t>(i)]);
    mb.old_policy = slice(sq.policy, 0, ni);
    mb.torque = sq.torque.topRows(ni);
    mb.gear.resize(ni, m);
    Eigen::MatrixXd q(ni, m);
    for (Eigen::Index i = 0; i < ni; ++i) {
      std::discrete_distribution<int> gear({sq.policy.probs(0, i), sq.policy.probs(1, i), sq.policy.probs(2, i)});
      for (int j = 0; j < m; ++j) {
        int k = gear(rng_);
        mb.gear(i, j) = k;
        q(i, j) = sq.q[static_cast<std::size_t>(k)](i, j);
      }
    }
    EStepResult e = estep(q, cfg_.dual_epsilon);
    mb.weights = std::move(e.weights);
    stats.temperature = e.temperature;
    stats.mean_q = q.mean();

    stats.mstep = mstep_update(actor_, actor_opt_, mb, alpha_, cfg_.constraints);
    stats.alpha = alpha_;

    ++steps_;
    if (steps_ % static_cast<std::uint64_t>(cfg_.target_sync_period) == 0) sync_targets();
    return stats;
  }

  void sync_targets() {
    target_actor_ = actor_;
    target_critic_ = critic_;
    ++syncs_;
  }

  ControlDecision act(const EnvState& s, bool deterministic) { return sample_action(actor_.forward(s), deterministic, rng_); }

  nn::Checkpoint checkpoint() const {
    nn::Checkpoint ck;
    nn::store_mlp(ck, "actor", actor_.network());
    nn::store_mlp(ck, "critic", critic_.network());
    nn::store_mlp(ck, "target_actor", target_actor_.network());
    nn::store_mlp(ck, "target_critic", target_critic_.network());
    nn::store_adam(ck, "actor_adam", actor_opt_, actor_.network().params());
    nn::store_adam(ck, "critic_adam", critic_opt_, critic_.network().params());
    ck.add_scalar("stddev/min", cfg_.stddev.min);
    ck.add_scalar("stddev/max", cfg_.stddev.max);
    ck.add_scalar("alpha/mean", alpha_.mean);
    ck.add_scalar("alpha/stddev", alpha_.stddev);
    ck.add_scalar("alpha/discrete", alpha_.discrete);
    ck.add_scalar("learner/steps", static_cast<double>(steps_));
    ck.add_scalar("learner/syncs", static_cast<double>(syncs_));
    return ck;
  }

  /// Restores networks, optimizer state, multipliers and counters. Layer
  /// shapes must match this learner's configuration.
  void restore(const nn::Checkpoint& ck) {
    auto load_into = [&](nn::Mlp& net, const std::string& prefix) {
      nn::Mlp loaded = nn::restore_mlp(ck, prefix);
      if (loaded.sizes() != net.sizes()) throw nn::CheckpointError("checkpoint: layer sizes of '" + prefix + "' do not match the config");
      net = std::move(loaded);
    };
    load_into(actor_.network(), "actor");
    load_into(critic_.network(), "critic");
    load_into(target_actor_.network(), "target_actor");
    load_into(target_critic_.network(), "target_critic");
    nn::restore_adam(ck, "actor_adam", actor_opt_, actor_.network().params());
    nn::restore_adam(ck, "critic_adam", critic_opt_, critic_.network().params());
    alpha_ = {ck.scalar("alpha/mean"), ck.scalar("alpha/stddev"), ck.scalar("alpha/discrete")};
    steps_ = static_cast<std::uint64_t>(ck.scalar("learner/steps"));
    syncs_ = static_cast<std::uint64_t>(ck.scalar("learner/syncs"));
  }

  const MpoConfig& config() const { return cfg_; }
  const nn::PolicyNet& actor() const { return actor_; }
  const nn::QNet& critic() const { return critic_; }
  const nn::PolicyNet& target_actor() const { return target_actor_; }
  const nn::QNet& target_critic() const { return target_critic_; }
  nn::PolicyNet& actor() { return actor_; }
  nn::QNet& critic() { return critic_; }
  const Multipliers& multipliers() const { return alpha_; }
  std::uint64_t steps() const { return steps_; }
  std::uint64_t syncs() const { return syncs_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  static nn::PolicyBatch slice(const nn::PolicyBatch& b, Eigen::Index start, Eigen::Index len) {
    nn::PolicyBatch s;
    s.mean = b.mean.segment(start, len);
    s.stddev = b.stddev.segment(start, len);
    s.stddev_gate = b.stddev_gate.segment(start, len);
    s.probs = b.probs.middleCols(start, len);
    return s;
  }

  MpoConfig cfg_;
  std::mt19937_64 rng_;
  nn::PolicyNet actor_, target_actor_;
  nn::QNet critic_, target_critic_;
  nn::Adam actor_opt_, critic_opt_;
  Multipliers alpha_;
  std::uint64_t steps_ = 0;
  std::uint64_t syncs_ = 0;
};

/// Actor stored in a learner checkpoint, with its stddev range.
inline nn::PolicyNet load_actor(const nn::Checkpoint& ck, const std::string& prefix = "actor") {
  nn::StddevRange range{ck.scalar("stddev/min"), ck.scalar("stddev/max")};
  return nn::PolicyNet(nn::restore_mlp(ck, prefix), range);
}

}  // namespace ecodrive

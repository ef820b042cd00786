#pragma once

// Parametric fit of the hybrid policy to the E-step weights under three
// decoupled trust regions (Gaussian mean, Gaussian stddev, gear
// categorical). Each term is a Lagrangian with its own multiplier:
//
//   L(theta) = mean_i sum_j q_ij [ log N(c_ij | mu, sigma_old)
//                                + log N(c_ij | mu_old, sigma)
//                                + log p(d_ij) ]
//            - a_mu (KL_mu - eps_mu) - a_sigma (KL_sigma - eps_sigma) - a_d (KL_d - eps_d)
//
// theta ascends L with Adam; each multiplier descends its dual
// a <- clamp(a - lr (eps - KL), a_min, a_max).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ecodrive/nn/adam.hpp"
#include "ecodrive/nn/policy.hpp"

namespace ecodrive {

/// E-step output for N states and M samples per state.
struct MStepBatch {
  Eigen::MatrixXd features;     // (4 x N)
  nn::PolicyBatch old_policy;   // policy the samples were drawn from
  Eigen::MatrixXd torque;       // (N x M) raw Gaussian draws
  Eigen::MatrixXi gear;         // (N x M) category index 0..2
  Eigen::MatrixXd weights;      // (N x M), rows sum to 1

  void validate() const {
    Eigen::Index n = features.cols();
    if (n == 0 || features.rows() != nn::kStateFeatures) throw std::invalid_argument("MStepBatch: bad feature block");
    if (old_policy.size() != n || torque.rows() != n || gear.rows() != n || weights.rows() != n)
      throw std::invalid_argument("MStepBatch: row counts differ");
    if (torque.cols() != gear.cols() || torque.cols() != weights.cols() || torque.cols() == 0)
      throw std::invalid_argument("MStepBatch: sample counts differ");
    if (!weights.allFinite() || !torque.allFinite()) throw std::invalid_argument("MStepBatch: non-finite entries");
    if ((gear.array() < 0).any() || (gear.array() >= nn::kGearChoices).any())
      throw std::invalid_argument("MStepBatch: gear index out of range");
  }
};

struct MStepConstraints {
  double eps_mean = 0.1;
  double eps_stddev = 0.001;
  double eps_discrete = 0.1;
  double alpha_lr = 1e-2;
  double alpha_min = 1e-6;
  double alpha_max = 1e6;
};

struct Multipliers {
  double mean = 10.0;
  double stddev = 10.0;
  double discrete = 10.0;
};

struct MStepDiagnostics {
  double objective = 0.0;   // weighted log-likelihood part of L
  double lagrangian = 0.0;  // full L
  double kl_mean = 0.0;
  double kl_stddev = 0.0;
  double kl_discrete = 0.0;
};

struct MStepGradient {
  nn::MlpParams grads;  // of -L, ready for a descent step
  MStepDiagnostics diag;
};

/// Gradient of -L at the current actor parameters.
inline MStepGradient mstep_gradient(const nn::PolicyNet& actor, const MStepBatch& b, const Multipliers& alpha) {
  b.validate();
  nn::Mlp::Tape tape;
  nn::PolicyBatch cur = actor.forward(b.features, tape);
  const nn::PolicyBatch& old = b.old_policy;
  Eigen::Index n = b.features.cols(), m = b.torque.cols();
  double inv_n = 1.0 / static_cast<double>(n);

  nn::PolicyHeadGrad g{Eigen::RowVectorXd::Zero(n), Eigen::RowVectorXd::Zero(n), Eigen::MatrixXd::Zero(3, n)};
  MStepDiagnostics d;
  for (Eigen::Index i = 0; i < n; ++i) {
    double mu = cur.mean(i), sigma = cur.stddev(i);
    double mu0 = old.mean(i), sigma0 = old.stddev(i);
    double dmu = 0.0, dsigma = 0.0, wsum = 0.0;
    Eigen::Vector3d count = Eigen::Vector3d::Zero();
    for (Eigen::Index j = 0; j < m; ++j) {
      double w = b.weights(i, j);
      double c = b.torque(i, j);
      int k = b.gear(i, j);
      wsum += w;
      count(k) += w;
      dmu += w * (c - mu) / (sigma0 * sigma0);
      double r = c - mu0;
      dsigma += w * (r * r / (sigma * sigma * sigma) - 1.0 / sigma);
      d.objective += inv_n * w *
                     (nn::gaussian_log_prob(c, mu, sigma0) + nn::gaussian_log_prob(c, mu0, sigma) + std::log(cur.probs(k, i)));
    }
    nn::GaussianKl kl = nn::kl_gaussian_decoupled(mu0, sigma0, mu, sigma);
    std::array<double, 3> p_old{old.probs(0, i), old.probs(1, i), old.probs(2, i)};
    std::array<double, 3> p_cur{cur.probs(0, i), cur.probs(1, i), cur.probs(2, i)};
    d.kl_mean += inv_n * kl.mean;
    d.kl_stddev += inv_n * kl.stddev;
    d.kl_discrete += inv_n * nn::kl_categorical(p_old, p_cur);

    dmu -= alpha.mean * (mu - mu0) / (sigma0 * sigma0);
    dsigma -= alpha.stddev * (1.0 / sigma - sigma0 * sigma0 / (sigma * sigma * sigma));
    g.mean(i) = -inv_n * dmu;
    g.stddev(i) = -inv_n * dsigma;
    for (int k = 0; k < 3; ++k) {
      double dlogit = count(k) - wsum * cur.probs(k, i) - alpha.discrete * (cur.probs(k, i) - old.probs(k, i));
      g.logits(k, i) = -inv_n * dlogit;
    }
  }
  d.lagrangian = d.objective - alpha.mean * d.kl_mean - alpha.stddev * d.kl_stddev - alpha.discrete * d.kl_discrete;
  if (!std::isfinite(d.lagrangian)) throw std::runtime_error("mstep: non-finite Lagrangian");
  return {actor.backward(tape, cur, g), d};
}

inline void update_multipliers(Multipliers& alpha, const MStepDiagnostics& d, const MStepConstraints& c) {
  auto step = [&](double& a, double eps, double kl) { a = std::clamp(a - c.alpha_lr * (eps - kl), c.alpha_min, c.alpha_max); };
  step(alpha.mean, c.eps_mean, d.kl_mean);
  step(alpha.stddev, c.eps_stddev, d.kl_stddev);
  step(alpha.discrete, c.eps_discrete, d.kl_discrete);
}

/// One actor Adam step followed by one multiplier step. The returned
/// diagnostics describe the actor before the step.
inline MStepDiagnostics mstep_update(nn::PolicyNet& actor, nn::Adam& opt, const MStepBatch& b, Multipliers& alpha,
                                     const MStepConstraints& c) {
  MStepGradient g = mstep_gradient(actor, b, alpha);
  opt.step(actor.network().params(), g.grads);
  update_multipliers(alpha, g.diag, c);
  return g.diag;
}

}  // namespace ecodrive

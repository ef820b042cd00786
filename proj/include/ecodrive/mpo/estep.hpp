#pragma once

// Non-parametric policy improvement over sampled actions: a temperature
// eta from the convex dual of the KL-constrained problem, then per-state
// softmax weights q_ij = softmax_j(Q_ij / eta).

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace ecodrive {

/// g(eta) = eta * eps + eta * mean_i log mean_j exp(Q_ij / eta), for Q
/// given as (states x samples).
inline double dual_objective(double eta, const Eigen::MatrixXd& q, double epsilon) {
  if (!(eta > 0.0)) throw std::invalid_argument("dual_objective: eta must be positive");
  if (q.rows() == 0 || q.cols() == 0) throw std::invalid_argument("dual_objective: empty Q batch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double top = q.row(i).maxCoeff();
    double mean_exp = ((q.row(i).array() - top) / eta).exp().mean();
    acc += top + eta * std::log(mean_exp);
  }
  return eta * epsilon + acc / static_cast<double>(q.rows());
}

struct TemperatureSearch {
  double lower = 1e-6;
  double upper = 1e6;
  double tolerance = 1e-6;  // on log(eta)
};

/// Golden-section minimization of the dual over log(eta); the dual is
/// convex in eta and therefore unimodal in log(eta).
inline double solve_temperature(const Eigen::MatrixXd& q, double epsilon, const TemperatureSearch& search = {}) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(search.lower), b = std::log(search.upper);
  auto g = [&](double log_eta) { return dual_objective(std::exp(log_eta), q, epsilon); };
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double gc = g(c), gd = g(d);
  while (b - a > search.tolerance) {
    if (gc <= gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - inv_phi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + inv_phi * (b - a);
      gd = g(d);
    }
  }
  double best = 0.5 * (a + b);
  // The minimum may sit on a bound; keep whichever end point is lowest.
  double candidates[] = {best, std::log(search.lower), std::log(search.upper)};
  double best_g = g(best);
  for (double cand : candidates) {
    double gv = g(cand);
    if (gv < best_g) {
      best_g = gv;
      best = cand;
    }
  }
  return std::exp(best);
}

/// Row-wise softmax of Q / eta.
inline Eigen::MatrixXd estep_weights(const Eigen::MatrixXd& q, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("estep_weights: eta must be positive");
  Eigen::MatrixXd w(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    Eigen::ArrayXd e = ((q.row(i).array() - q.row(i).maxCoeff()) / eta).exp().transpose();
    w.row(i) = (e / e.sum()).transpose().matrix();
  }
  return w;
}

struct EStepResult {
  Eigen::MatrixXd weights;  // (states x samples), rows sum to 1
  double temperature = 0.0;
};

inline EStepResult estep(const Eigen::MatrixXd& q, double epsilon, const TemperatureSearch& search = {}) {
  EStepResult r;
  r.temperature = solve_temperature(q, epsilon, search);
  r.weights = estep_weights(q, r.temperature);
  return r;
}

/// Mean over states of KL(q_i || uniform over the samples).
inline double mean_kl_from_uniform(const Eigen::MatrixXd& weights) {
  double total = 0.0;
  double m = static_cast<double>(weights.cols());
  for (Eigen::Index i = 0; i < weights.rows(); ++i)
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      double w = weights(i, j);
      if (w > 0.0) total += w * std::log(w * m);
    }
  return total / static_cast<double>(weights.rows());
}

}  // namespace ecodrive

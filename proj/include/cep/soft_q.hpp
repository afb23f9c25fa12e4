/**
 * @file soft_q.hpp
 * @brief Finite-horizon soft value iteration on tabular MDPs, and the gap
 *        between the optimal soft-Q of an averaged reward and the average of
 *        the per-reward optimal soft-Qs.
 *
 * Time runs t = 0..T with Q^T = r. Backward recursion:
 *   Q^t(s,a) = r(s,a) + Σ_s' p(s'|s,a) V^{t+1}(s'),   V^t(s) = log Σ_a exp Q^t(s,a).
 */

#ifndef CEP_SOFT_Q_HPP_
#define CEP_SOFT_Q_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace cep {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct TabularMDP {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  /// transitions[a](s, s') = p(s' | s, a)
  std::vector<Mat> transitions;
  /// n_states x n_actions
  Mat reward1;
  Mat reward2;
  std::size_t horizon = 0;

  /// Human-readable problems; empty when the MDP is valid.
  std::vector<std::string> problems() const;
  /// Throws std::invalid_argument listing the first problem.
  void validate() const;
};

/// Random MDP with Dirichlet(1) transition rows and rewards uniform in
/// [-reward_scale, reward_scale].
TabularMDP random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t horizon,
                      std::uint64_t seed, double reward_scale = 1.0);

/// Random MDP with 1..max_states states, 1..max_actions actions and horizon
/// 0..max_horizon, all drawn from `seed`.
TabularMDP random_mdp_up_to(std::size_t max_states, std::size_t max_actions,
                            std::size_t max_horizon, std::uint64_t seed,
                            double reward_scale = 1.0);

struct SoftQTable {
  /// q[t] for t = 0..T, each n_states x n_actions
  std::vector<Mat> q;
  /// v[t](s) = logsumexp_a q[t](s, a)
  std::vector<Vec> v;
};

/// Max-stabilized log Σ exp over the entries of `x`.
double log_sum_exp(const Eigen::Ref<const Vec> &x);

SoftQTable soft_value_iteration(const TabularMDP &mdp, const Mat &reward);

struct DeltaQ {
  /// ΔQ^t = Q*^t - Q_Σ^t for t = 0..T
  std::vector<Mat> direct;
  /// Same quantity from the log-ratio recurrence; recurrence[T] = 0.
  std::vector<Mat> recurrence;
  SoftQTable composed;  ///< Q* for w r1 + (1 - w) r2
  SoftQTable first;     ///< Q1*
  SoftQTable second;    ///< Q2*
};

/// Divergence between the optimal soft-Q of the mixed reward w r1 + (1-w) r2
/// and the mixture w Q1* + (1-w) Q2* of the per-reward optima.
DeltaQ delta_q(const TabularMDP &mdp, double weight = 0.5);

/// max |direct - recurrence| over all t, s, a.
double recurrence_check(const TabularMDP &mdp, double weight = 0.5);

/// Softmax of Q^t(s, ·) under a uniform action prior.
Vec one_step_posterior(const SoftQTable &table, std::size_t t, std::size_t state);

struct HorizonSummary {
  std::size_t t = 0;
  std::size_t remaining = 0; ///< T - t
  double min_delta = 0.0;
  double max_delta = 0.0;
};

std::vector<HorizonSummary> summarize(const DeltaQ &dq);

} // namespace cep

#endif // CEP_SOFT_Q_HPP_

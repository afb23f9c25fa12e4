/**
 * @file cem.hpp
 * @brief Cross-entropy maximum-likelihood action selection over a composed
 *        energy policy.
 *
 * Each iteration draws N samples from a diagonal Gaussian, clips them to the
 * action bounds, scores the whole batch, refits mean and variance to the
 * highest-scoring finite samples, and keeps the best finite sample seen so
 * far. Samples scored -inf never enter the elite set. When no sample is
 * finite in any iteration the result is the braking fallback -k_d q̇.
 */

#ifndef CEP_CEM_HPP_
#define CEP_CEM_HPP_

#include "cep/energy_tree.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace cep {

struct CEMConfig {
  std::size_t n_samples = 10000;
  std::size_t n_iters = 2;
  /// Initial sampling mean; empty means zero (or the caller's warm start).
  Vec init_mean;
  /// Diagonal of the initial covariance; empty means (a_max / 2)².
  Vec init_cov;
  double elite_fraction = 0.1;
  double cov_floor = 1e-6;
  /// Per-dimension |a| bound; empty means unbounded.
  Vec action_bound;
  /// Gain of the braking fallback q̈ = -k_d q̇.
  double fallback_damping = 10.0;

  std::size_t elite_count() const;
  /// Throws std::invalid_argument when the config cannot run for `dim` actions.
  void validate(std::size_t dim) const;
};

struct CEMState {
  Vec mean;
  Vec cov;
  Vec best_action;
  double best_energy = kNegInf;
  std::size_t n_feasible = 0;
};

struct CEMResult {
  Vec action;
  double energy = kNegInf;
  /// False when every sample of every iteration was -inf and `action` is the fallback.
  bool feasible = false;
  std::vector<CEMState> trace;
};

/// Scores each column of `actions` into `out`.
using BatchObjective = std::function<void(const Mat &actions, Eigen::Ref<Vec> out)>;

CEMResult optimize(const BatchObjective &objective, std::size_t dim, const Vec &fallback,
                   const CEMConfig &config, std::uint64_t seed);

/// Argmax over q̈ of the policy's composed density at `state`.
CEMResult optimize(const CEPPolicy &policy, const JointState &state, const CEMConfig &config,
                   std::uint64_t seed);

/// As above for a generic latent state; the fallback uses state.velocity when
/// its dimension matches the action, else zero.
CEMResult optimize(const CEPPolicy &policy, const LatentState &state, std::size_t action_dim,
                   const CEMConfig &config, std::uint64_t seed);

} // namespace cep

#endif // CEP_CEM_HPP_

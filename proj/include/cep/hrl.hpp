/**
 * @file hrl.hpp
 * @brief Hierarchical composition: a prior policy multiplied by a Gaussian
 *        whose mean and diagonal covariance come from a high-level source,
 *        plus a planar puck-pushing toy environment.
 */

#ifndef CEP_HRL_HPP_
#define CEP_HRL_HPP_

#include "cep/cem.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cep {

struct HighLevelAction {
  Vec mean;
  /// Diagonal of Σ_H; every entry must be positive.
  Vec cov_diag;

  void validate() const;
};

/// Log-density log π_q(a | s) over a batch of actions; may be -inf, never
/// +inf or NaN.
class PriorPolicy {
public:
  using BatchFn = std::function<void(const Vec &state, const Mat &actions, Eigen::Ref<Vec> out)>;

  PriorPolicy() = default;
  static PriorPolicy uniform() { return {}; }
  /// State-independent N(mean, covariance).
  static PriorPolicy gaussian(Vec mean, const Mat &covariance);
  /// 0 where normal·a >= offset, -inf elsewhere.
  static PriorPolicy half_space(Vec normal, double offset);
  static PriorPolicy from_batch(BatchFn fn);
  /// Sum of log-densities.
  static PriorPolicy product(std::vector<PriorPolicy> factors);

  bool is_uniform() const { return !fn_; }
  void evaluate(const Vec &state, const Mat &actions, Eigen::Ref<Vec> out) const;
  double log_density(const Vec &state, const Vec &action) const;

private:
  explicit PriorPolicy(BatchFn fn) : fn_(std::move(fn)) {}
  BatchFn fn_;
};

/// -(1/2)(a - μ_H)ᵀ Σ_H⁻¹ (a - μ_H) for every column.
void high_level_energy(const HighLevelAction &hla, const Mat &actions, Eigen::Ref<Vec> out);

struct LowLevelResult {
  Vec action;
  double energy = kNegInf;
  /// False when no sampled action had finite composed density; the action is
  /// then μ_H (clipped to the bounds) and may violate the prior.
  bool feasible = false;
};

/// argmax_a log π_q(a|s) + log N(a | μ_H, Σ_H) by cross-entropy search.
/// An empty cem.init_mean starts the search at μ_H; an empty cem.init_cov
/// uses (a_max/2)² when bounded, else min(Σ_H, 1) per dimension.
LowLevelResult low_level_act(const PriorPolicy &prior, const HighLevelAction &hla,
                             const Vec &state, const CEMConfig &cem, std::uint64_t seed);

struct SigmaLimitRow {
  double scale;
  Vec action;
  /// |action - μ_H|∞
  double distance_to_mean;
};

/// low_level_act for Σ_H = scale · I over the schedule, same seed per row.
std::vector<SigmaLimitRow> sigma_limits_check(const PriorPolicy &prior, const Vec &state,
                                              const Vec &mu_h,
                                              const std::vector<double> &schedule,
                                              const CEMConfig &cem, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Puck toy environment

/// A point end effector above a table moves with commanded velocities. The
/// puck slides along the table surface and is pushed on contact. The strip
/// below the table surface is forbidden for the end effector.
struct PuckEnv {
  Vec2 ee_start{0.0, 0.3};
  double puck_start_x = 0.3;
  /// Uniform jitter applied to the puck start by the episode seed.
  double puck_start_jitter = 0.05;
  double target_x = 0.9;
  double table_y = 0.0;
  double puck_radius = 0.05;
  double ee_radius = 0.02;
  double dt = 0.05;
  std::size_t horizon = 100;
  /// |v_i| bound on commanded end-effector velocity.
  double max_speed = 1.0;
  /// Puck velocity is multiplied by this every step.
  double puck_damping = 0.9;
  double distance_weight = 1.0;
  double collision_penalty = -1000.0;

  std::vector<std::string> problems() const;
  void validate() const;

  /// Height of the puck centre, resting on the table.
  double puck_y() const { return table_y + puck_radius; }
};

/// (ee_x, ee_y, puck_x, puck_vx)
struct PuckState {
  Vec2 ee;
  double puck_x;
  double puck_vx;

  Vec vector() const;
};

PuckState puck_reset(const PuckEnv &env, std::uint64_t seed);

struct PuckStep {
  PuckState next;
  double reward;
  bool collided;
};

PuckStep puck_step(const PuckEnv &env, const PuckState &state, const Vec2 &velocity);

/// Hard constraint: the commanded velocity must not move the end effector
/// below the table surface within one step.
PriorPolicy table_constraint_prior(const PuckEnv &env);

/// Scripted pushing velocity: go behind the puck, then push it to the target.
Vec2 pushing_velocity(const PuckEnv &env, const PuckState &state);

/// Table constraint times N(pushing_velocity(s), variance · I).
PriorPolicy pushing_prior(const PuckEnv &env, double variance);

/// Returns nullopt to act with the prior alone.
using HighLevelSource = std::function<std::optional<HighLevelAction>(const PuckState &)>;

struct ToyEpisodeResult {
  double total_return = 0.0;
  std::size_t collisions = 0;
  /// Executed actions whose prior log-density was -inf.
  std::size_t prior_violations = 0;
  std::size_t infeasible_steps = 0;
  double final_puck_x = 0.0;
  std::vector<PuckState> states;
  std::vector<Vec> actions;
};

ToyEpisodeResult toy_episode(const PuckEnv &env, const HighLevelSource &high_level,
                             const PriorPolicy &prior, const CEMConfig &cem, std::uint64_t seed);

enum class CovarianceMode { Fixed, Constant, StateLinear };

/// Linear high-level policy μ_H = W φ(s) with
/// φ(s) = (puck_x - ee_x, puck_y - ee_y, target_x - puck_x, 1) and
/// log Σ_H = log_cov + V φ(s), where V is used only in StateLinear mode.
struct LinearHighLevel {
  Mat weights = Mat::Zero(2, 4);
  Vec log_cov = Vec::Constant(2, std::log(0.1));
  Mat log_cov_weights = Mat::Zero(2, 4);
  CovarianceMode mode = CovarianceMode::Constant;

  static Vec features(const PuckEnv &env, const PuckState &s);
  HighLevelAction operator()(const PuckEnv &env, const PuckState &s) const;
  /// W row-major, then log_cov unless Fixed, then V row-major if StateLinear.
  Vec parameters() const;
  /// Inverse of parameters(); fields not covered by `mode` keep the values of `base`.
  static LinearHighLevel from_parameters(const Vec &theta, const LinearHighLevel &base);
};

/// Sum of the prior log-density and the high-level Gaussian energy.
void composed_energy(const PriorPolicy &prior, const HighLevelAction &hla, const Vec &state,
                     const Mat &actions, Eigen::Ref<Vec> out);

struct PolicySearchConfig {
  std::size_t generations = 8;
  std::size_t population = 16;
  std::size_t elites = 4;
  std::size_t episodes_per_candidate = 2;
  double init_std = 0.5;
  CovarianceMode covariance = CovarianceMode::Constant;
  CEMConfig low_level;
};

struct PolicySearchResult {
  LinearHighLevel best;
  double initial_return = 0.0;
  /// Mean return of the elite set, per generation.
  std::vector<double> elite_returns;
  double best_return = 0.0;
};

/// Cross-entropy search over the linear high-level policy through the
/// composition with `prior`.
PolicySearchResult search_high_level(const PuckEnv &env, const PriorPolicy &prior,
                                     const PolicySearchConfig &config, std::uint64_t seed);

} // namespace cep

#endif // CEP_HRL_HPP_

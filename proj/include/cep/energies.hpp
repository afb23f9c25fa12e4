/**
 * @file energies.hpp
 * @brief Reactive-motion energies: Go-To, obstacle avoidance, joint limits and
 *        a plain Gaussian. Defaults are the reference hyperparameters used for
 *        reactive motion generation.
 */

#ifndef CEP_ENERGIES_HPP_
#define CEP_ENERGIES_HPP_

#include "cep/energy_tree.hpp"

#include <vector>

namespace cep {

struct GoToParams {
  Vec target;
  double kp = 20.0;
  double kv = 30.0;
  double alpha = 10.0;
  /// Lower bound on the isotropic variance so the density stays proper at the target.
  double variance_floor = 1e-3;

  void validate() const;
};

struct ObstacleParams {
  Vec center;
  /// Obstacle radius; distances are measured to the surface. 0 is a point obstacle.
  double radius = 0.0;
  double gamma = 0.2;
  double alpha = 4.0;
  double beta = 0.1;
  /// Projected speeds at or below approach_tolerance * ρ / γ, with ρ the
  /// surface distance, count as not approaching. 0 reproduces the plain sign
  /// test.
  double approach_tolerance = 0.0;

  void validate() const;
};

struct JointLimitParams {
  std::vector<JointLimit> limits;
  double gamma = 0.3;
  double alpha = 4.0;
  double beta = 0.1;
  /// Joint speeds towards the limit at or below approach_tolerance * ρ / γ,
  /// with ρ the distance to the limit, count as not approaching.
  double approach_tolerance = 0.0;

  void validate() const;
};

/// μ(x, ẋ) = -K_p (x - x*) - K_v ẋ.
Vec goto_mean(const GoToParams &p, const Vec &x, const Vec &xd);
/// max(α ‖x - x*‖², variance_floor).
double goto_variance(const GoToParams &p, const Vec &x);
/// -‖ẍ - μ‖² / (2 σ²), constants dropped.
double goto_energy(const GoToParams &p, const Vec &x, const Vec &xd, const Vec &xdd);

/// Which branch of the piecewise obstacle / joint-limit energy applies.
enum class BarrierCase {
  Inactive,  ///< farther than γ from the obstacle or limit
  Receding,  ///< velocity points away
  Violating, ///< approaching and the acceleration breaks the bound: -inf
  Admissible ///< approaching and the acceleration respects the bound: 0
};

/// Projections are signed scalars along the unit vector from the robot point
/// to the obstacle centre; positive velocity means approaching. Zero velocity
/// counts as receding. A point on or inside the surface is in collision and
/// classified as Violating for every acceleration.
BarrierCase obstacle_case(const ObstacleParams &p, const Vec &x_r, const Vec &xd,
                          const Vec &xdd);
double obstacle_energy(const ObstacleParams &p, const Vec &x_r, const Vec &xd,
                       const Vec &xdd);

/// Per-joint branch against the nearer limit (ties go to the lower limit).
/// The direction towards the limit is sign(q_l - q); at q = q_l it points out
/// of the admissible range (-1 at the lower limit, +1 at the upper).
BarrierCase joint_limit_case(const JointLimitParams &p, std::size_t joint, double q,
                             double qd, double qdd);
/// Sum of the per-joint values: 0 or -inf.
double joint_limit_energy(const JointLimitParams &p, const Vec &q, const Vec &qd,
                          const Vec &qdd);

/// -(1/2)(a - μ)ᵀ Σ⁻¹ (a - μ). Throws std::invalid_argument for a
/// non-positive-definite covariance.
double gaussian_energy(const Vec &mean, const Mat &covariance, const Vec &action);

// Batched Energy implementations. The latent state passed in is the output of
// the component's map.

class GoToEnergy final : public Energy {
public:
  explicit GoToEnergy(GoToParams params);
  void evaluate(const LatentState &state, const Mat &actions, Eigen::Ref<Vec> out) const override;
  const GoToParams &params() const { return params_; }

private:
  GoToParams params_;
};

class ObstacleEnergy final : public Energy {
public:
  explicit ObstacleEnergy(ObstacleParams params);
  void evaluate(const LatentState &state, const Mat &actions, Eigen::Ref<Vec> out) const override;
  bool is_trivial(const LatentState &state) const override;
  const ObstacleParams &params() const { return params_; }

private:
  ObstacleParams params_;
};

/// Expects the configuration space itself as latent space (identity map).
class JointLimitEnergy final : public Energy {
public:
  explicit JointLimitEnergy(JointLimitParams params);
  void evaluate(const LatentState &state, const Mat &actions, Eigen::Ref<Vec> out) const override;
  bool is_trivial(const LatentState &state) const override;
  const JointLimitParams &params() const { return params_; }

private:
  JointLimitParams params_;
};

/// State-independent Gaussian over latent actions.
class GaussianEnergy final : public Energy {
public:
  GaussianEnergy(Vec mean, const Mat &covariance);
  void evaluate(const LatentState &state, const Mat &actions, Eigen::Ref<Vec> out) const override;
  double value(const Vec &action) const;

  const Vec &mean() const { return mean_; }
  const Mat &covariance() const { return covariance_; }

private:
  Vec mean_;
  Mat covariance_;
  Eigen::LLT<Mat> llt_;
};

/// Gaussian around -gain * velocity with isotropic variance: a weak damping
/// expert over latent accelerations.
class DampingEnergy final : public Energy {
public:
  DampingEnergy(double gain, double variance);
  void evaluate(const LatentState &state, const Mat &actions, Eigen::Ref<Vec> out) const override;

private:
  double gain_;
  double variance_;
};

} // namespace cep

#endif // CEP_ENERGIES_HPP_

/**
 * @file baselines.hpp
 * @brief Artificial-potential-field baseline and its Gaussian product-of-experts
 *        counterpart.
 *
 * An APF controller sums task-space dynamics projected through the Jacobian
 * pseudoinverse:  q̈ = Σ_k J_k⁺ Λ_k g_k(z_k, ż_k).
 * With configuration-space weights of the form Λ_k = (Σ_j P_j)⁻¹ P_k the same
 * action is the mean of the product of Gaussians N(g_k, P_k⁻¹), which is what
 * apf_cep_equivalence checks numerically.
 */

#ifndef CEP_BASELINES_HPP_
#define CEP_BASELINES_HPP_

#include "cep/energy_tree.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace cep {

/// Deterministic second-order dynamics in a task space: z̈ = g(z, ż).
using TaskDynamics = std::function<Vec(const LatentState &)>;

struct APFComponent {
  std::shared_ptr<const TaskMap> map;
  TaskDynamics dynamics;
  /// Symmetric PSD weight in the task space; a 1x1 matrix acts as a scalar.
  Mat weight;
};

/// Jᵀ(JJᵀ + λI)⁻¹ computed through the SVD. Damping is switched on only when
/// the smallest singular value drops below sqrt(damping), with
/// λ = damping (1 - (σ_min / sqrt(damping))²), so regular Jacobians get the
/// exact Moore-Penrose inverse.
Mat damped_pseudoinverse(const Mat &J, double damping = 1e-6);

Vec apf_action(const std::vector<APFComponent> &components, const JointState &state);

struct GaussianProduct {
  Vec mean;
  Mat covariance;
};

/// Precision-weighted product of Gaussians. Throws std::invalid_argument on
/// empty input, dimension mismatch, or a non-PD covariance.
GaussianProduct gaussian_product(const std::vector<Vec> &means, const std::vector<Mat> &covariances);

/// Λ_k = (Σ_j Σ_j⁻¹)⁻¹ Σ_k⁻¹.
std::vector<Mat> weights_from_covariances(const std::vector<Mat> &covariances);

/// Recovers covariances Σ_k with Λ_k = (Σ_j Σ_j⁻¹)⁻¹ Σ_k⁻¹, up to the
/// common scale that leaves the product mean unchanged. Throws
/// std::invalid_argument with the reason when no such covariances exist.
std::vector<Mat> covariances_from_weights(const std::vector<Mat> &weights);

struct APFEquivalence {
  Vec apf;
  Vec cep;
  /// max |apf - cep|
  double discrepancy = 0.0;
  /// Configuration-space covariances of the Gaussian experts.
  std::vector<Mat> covariances;
};

/// Builds the Gaussian policy whose experts have configuration-space means
/// J_k⁺ g_k and weights J_k⁺ Λ_k J_k, and compares its closed-form argmax
/// with apf_action. Throws std::invalid_argument when the weights have no
/// Gaussian counterpart.
APFEquivalence apf_cep_equivalence(const std::vector<APFComponent> &components,
                                   const JointState &state);

struct EquivalenceProblem {
  std::vector<APFComponent> components;
  JointState state;
};

/// Identity-map components with PD dynamics -K_p (q - t_k) - K_v q̇ of random
/// SPD gains and targets, weighted by Λ_k from random SPD covariances, at a
/// random state.
EquivalenceProblem random_equivalence_problem(std::size_t dim, std::size_t n_components,
                                              std::uint64_t seed);

// Classical potential-field dynamics used by the benchmark baseline.

/// -K_p (z - target) - K_v ż
TaskDynamics pd_attractor(Vec target, double kp, double kv);

/// gain * n / ρ² inside `gamma` of the surface, zero outside, where n is the
/// unit vector from the obstacle centre to z and ρ the surface distance.
TaskDynamics obstacle_repulsion(Vec center, double radius, double gamma, double gain);

/// Per-joint push away from the nearer limit, gain / ρ² within `gamma`.
TaskDynamics joint_limit_repulsion(std::vector<JointLimit> limits, double gamma, double gain);

/// -gain * ż
TaskDynamics velocity_damping(double gain);

} // namespace cep

#endif // CEP_BASELINES_HPP_

/**
 * @file energy_tree.hpp
 * @brief Product-of-experts composition of energy components defined in
 *        different task spaces.
 *
 * A component maps a configuration-space state and a batch of candidate
 * actions into its own latent space and scores them with an energy (an
 * unnormalized log-density). The composed policy is
 *
 *   log π(a | s) = Σ_k β_k E_k(f_k(s, a)) + const
 *
 * Normalizers are never computed and every energy is defined only up to an
 * additive per-state constant, so densities are comparable across actions at
 * one state but not across states. An energy may return -inf to encode a hard
 * constraint; -inf absorbs any finite sum.
 *
 * Nested latent spaces are expressed by composing maps (ComposedMap): the
 * component's energy then lives in the innermost space.
 */

#ifndef CEP_ENERGY_TREE_HPP_
#define CEP_ENERGY_TREE_HPP_

#include "cep/kinematics.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace cep {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Position/velocity pair of any state space (configuration or task space).
struct LatentState {
  Vec position;
  Vec velocity;
};

inline LatentState to_latent(const JointState &s) { return {s.q, s.qd}; }

/// Actions are stored column-wise: one candidate per column.
struct LatentBatch {
  LatentState state;
  Mat actions;
};

/// Deterministic map from a source state-action space to a latent one.
class TaskMap {
public:
  virtual ~TaskMap() = default;

  virtual LatentState map_state(const LatentState &state) const = 0;
  virtual Mat map_actions(const LatentState &state, const Mat &actions) const = 0;

  LatentBatch apply(const LatentState &state, const Mat &actions) const {
    return {map_state(state), map_actions(state, actions)};
  }

  /// ∂a_z/∂a_x at (state, action). All maps shipped here are linear in the
  /// action so the result does not depend on `action`.
  virtual Mat action_jacobian(const LatentState &state, const Vec &action) const = 0;
};

class IdentityMap final : public TaskMap {
public:
  LatentState map_state(const LatentState &state) const override;
  Mat map_actions(const LatentState &state, const Mat &actions) const override;
  Mat action_jacobian(const LatentState &state, const Vec &action) const override;
};

/// z = A x, ż = A ẋ, a_z = A a_x.
class LinearMap final : public TaskMap {
public:
  explicit LinearMap(Mat matrix) : matrix_(std::move(matrix)) {}
  LatentState map_state(const LatentState &state) const override;
  Mat map_actions(const LatentState &state, const Mat &actions) const override;
  Mat action_jacobian(const LatentState &state, const Vec &action) const override;

private:
  Mat matrix_;
};

/// Configuration space of a planar chain to the position of a point on one
/// of its links.
class KinematicMap final : public TaskMap {
public:
  KinematicMap(ChainSpec chain, std::size_t link_index, double fraction = 1.0);
  LatentState map_state(const LatentState &state) const override;
  Mat map_actions(const LatentState &state, const Mat &actions) const override;
  Mat action_jacobian(const LatentState &state, const Vec &action) const override;

  std::size_t link_index() const { return link_index_; }
  double fraction() const { return fraction_; }

private:
  ChainSpec chain_;
  std::size_t link_index_;
  double fraction_;
};

/// outer ∘ inner.
class ComposedMap final : public TaskMap {
public:
  ComposedMap(std::shared_ptr<const TaskMap> inner, std::shared_ptr<const TaskMap> outer);
  LatentState map_state(const LatentState &state) const override;
  Mat map_actions(const LatentState &state, const Mat &actions) const override;
  Mat action_jacobian(const LatentState &state, const Vec &action) const override;

private:
  std::shared_ptr<const TaskMap> inner_;
  std::shared_ptr<const TaskMap> outer_;
};

/// Unnormalized log-density of latent actions given a latent state.
/// Implementations must be pure and may return -inf but never +inf or NaN.
class Energy {
public:
  virtual ~Energy() = default;

  /// out(i) = E(state, actions.col(i)).
  virtual void evaluate(const LatentState &state, const Mat &actions,
                        Eigen::Ref<Vec> out) const = 0;

  /// True when the energy is identically zero for every action at `state`;
  /// lets the policy skip mapping the batch.
  virtual bool is_trivial(const LatentState &) const { return false; }

  double operator()(const LatentState &state, const Vec &action) const;
};

/// Adapts a per-action callable into an Energy.
class FunctionEnergy final : public Energy {
public:
  using Fn = std::function<double(const LatentState &, const Vec &)>;
  explicit FunctionEnergy(Fn fn) : fn_(std::move(fn)) {}
  void evaluate(const LatentState &state, const Mat &actions, Eigen::Ref<Vec> out) const override;

private:
  Fn fn_;
};

struct EnergyComponent {
  EnergyComponent(std::string name, std::shared_ptr<const TaskMap> map,
                  std::shared_ptr<const Energy> energy, double beta = 1.0);

  std::string name;
  std::shared_ptr<const TaskMap> map;
  std::shared_ptr<const Energy> energy;
  double beta;
};

class CEPPolicy {
public:
  explicit CEPPolicy(std::vector<EnergyComponent> components);

  const std::vector<EnergyComponent> &components() const { return components_; }
  std::size_t size() const { return components_.size(); }

  /// Weighted per-component energies for one component, written into `out`.
  void evaluate_component(std::size_t k, const LatentState &state, const Mat &actions,
                          Eigen::Ref<Vec> out) const;

private:
  std::vector<EnergyComponent> components_;
};

/// Σ_k β_k E_k(f_k(state, a)) for every column a of `actions`.
/// An empty batch yields an empty result. Throws std::domain_error if a
/// component produces +inf or NaN.
Vec log_unnormalized_density(const CEPPolicy &policy, const LatentState &state,
                             const Mat &actions);
Vec log_unnormalized_density(const CEPPolicy &policy, const JointState &state,
                             const Mat &actions);

struct ChangeOfVariable {
  /// (1/2) log det(JᵀJ); zero when the map is degenerate.
  double log_correction = 0.0;
  double gram_determinant = 0.0;
  /// JᵀJ is singular: the map is not injective in the action, so the
  /// density correction is undefined.
  bool degenerate = false;
};

/// Density correction between a latent policy and the induced common-space
/// policy. For the linear maps used here J depends on the state only, so the
/// correction is a per-state constant and never moves the argmax over actions.
ChangeOfVariable change_of_variable_check(const TaskMap &map, const LatentState &state,
                                          const Vec &action);

/// Log-density of an action prior q(a). The default is the uniform
/// (improper, constant zero) prior.
class ActionPrior {
public:
  using Fn = std::function<double(const Vec &)>;

  ActionPrior() = default;
  static ActionPrior uniform() { return {}; }
  static ActionPrior gaussian(Vec mean, const Mat &covariance);
  static ActionPrior from_function(Fn fn);

  bool is_uniform() const { return !fn_; }
  double log_density(const Vec &action) const { return fn_ ? fn_(action) : 0.0; }

private:
  explicit ActionPrior(Fn fn) : fn_(std::move(fn)) {}
  Fn fn_;
};

/// MAP objective log[exp(Σ_k β_k E_k) q(a)]: the composed density plus the
/// prior's log-density. Equals log_unnormalized_density for a uniform prior.
Vec map_posterior_semantics(const CEPPolicy &policy, const LatentState &state,
                            const Mat &actions, const ActionPrior &prior = {});

} // namespace cep

#endif // CEP_ENERGY_TREE_HPP_

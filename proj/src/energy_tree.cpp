#include "cep/energy_tree.hpp"

#include "cep/energies.hpp"

#include <cmath>
#include <stdexcept>

namespace cep {

LatentState IdentityMap::map_state(const LatentState &state) const { return state; }

Mat IdentityMap::map_actions(const LatentState &, const Mat &actions) const { return actions; }

Mat IdentityMap::action_jacobian(const LatentState &, const Vec &action) const {
  return Mat::Identity(action.size(), action.size());
}

LatentState LinearMap::map_state(const LatentState &state) const {
  return {matrix_ * state.position, matrix_ * state.velocity};
}

Mat LinearMap::map_actions(const LatentState &, const Mat &actions) const {
  return matrix_ * actions;
}

Mat LinearMap::action_jacobian(const LatentState &, const Vec &) const { return matrix_; }

KinematicMap::KinematicMap(ChainSpec chain, std::size_t link_index, double fraction)
    : chain_(std::move(chain)), link_index_(link_index), fraction_(fraction) {
  if (link_index_ >= chain_.num_joints()) {
    throw std::out_of_range("kinematic map link index out of range");
  }
  if (!(fraction_ > 0.0 && fraction_ <= 1.0)) {
    throw std::invalid_argument("kinematic map fraction must lie in (0, 1]");
  }
}

LatentState KinematicMap::map_state(const LatentState &state) const {
  const Mat J = jacobian(chain_, state.position, link_index_, fraction_);
  return {forward_kinematics(chain_, state.position, link_index_, fraction_), J * state.velocity};
}

Mat KinematicMap::map_actions(const LatentState &state, const Mat &actions) const {
  const Mat J = jacobian(chain_, state.position, link_index_, fraction_);
  Mat out(2, actions.cols());
  out.noalias() = J * actions;
  return out;
}

Mat KinematicMap::action_jacobian(const LatentState &state, const Vec &) const {
  return jacobian(chain_, state.position, link_index_, fraction_);
}

ComposedMap::ComposedMap(std::shared_ptr<const TaskMap> inner,
                         std::shared_ptr<const TaskMap> outer)
    : inner_(std::move(inner)), outer_(std::move(outer)) {
  if (!inner_ || !outer_) throw std::invalid_argument("composed map needs two maps");
}

LatentState ComposedMap::map_state(const LatentState &state) const {
  return outer_->map_state(inner_->map_state(state));
}

Mat ComposedMap::map_actions(const LatentState &state, const Mat &actions) const {
  return outer_->map_actions(inner_->map_state(state), inner_->map_actions(state, actions));
}

Mat ComposedMap::action_jacobian(const LatentState &state, const Vec &action) const {
  const Mat inner_jac = inner_->action_jacobian(state, action);
  Mat single(action.size(), 1);
  single.col(0) = action;
  const LatentState mid_state = inner_->map_state(state);
  const Mat mid_action = inner_->map_actions(state, single);
  return outer_->action_jacobian(mid_state, mid_action.col(0)) * inner_jac;
}

double Energy::operator()(const LatentState &state, const Vec &action) const {
  Mat single(action.size(), 1);
  single.col(0) = action;
  Vec out(1);
  evaluate(state, single, out);
  return out(0);
}

void FunctionEnergy::evaluate(const LatentState &state, const Mat &actions,
                              Eigen::Ref<Vec> out) const {
  for (Eigen::Index i = 0; i < actions.cols(); ++i) {
    out(i) = fn_(state, actions.col(i));
  }
}

EnergyComponent::EnergyComponent(std::string name_, std::shared_ptr<const TaskMap> map_,
                                 std::shared_ptr<const Energy> energy_, double beta_)
    : name(std::move(name_)), map(std::move(map_)), energy(std::move(energy_)), beta(beta_) {
  if (!map || !energy) {
    throw std::invalid_argument("energy component '" + name + "' needs a map and an energy");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("energy component '" + name +
                                "' needs a positive inverse temperature");
  }
}

CEPPolicy::CEPPolicy(std::vector<EnergyComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("policy needs at least one component");
}

void CEPPolicy::evaluate_component(std::size_t k, const LatentState &state, const Mat &actions,
                                   Eigen::Ref<Vec> out) const {
  const auto &c = components_.at(k);
  const LatentState latent = c.map->map_state(state);
  if (c.energy->is_trivial(latent)) {
    out.setZero();
    return;
  }
  c.energy->evaluate(latent, c.map->map_actions(state, actions), out);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double e = out(i);
    if (std::isnan(e) || e == std::numeric_limits<double>::infinity()) {
      throw std::domain_error("energy component '" + c.name + "' returned +inf or NaN");
    }
    out(i) = c.beta * e;
  }
}

Vec log_unnormalized_density(const CEPPolicy &policy, const LatentState &state,
                             const Mat &actions) {
  const Eigen::Index n = actions.cols();
  Vec total = Vec::Zero(n);
  if (n == 0) return total;
  Vec part(n);
  for (std::size_t k = 0; k < policy.size(); ++k) {
    policy.evaluate_component(k, state, actions, part);
    // IEEE addition already gives -inf + finite = -inf.
    total += part;
  }
  return total;
}

Vec log_unnormalized_density(const CEPPolicy &policy, const JointState &state,
                             const Mat &actions) {
  return log_unnormalized_density(policy, to_latent(state), actions);
}

ChangeOfVariable change_of_variable_check(const TaskMap &map, const LatentState &state,
                                          const Vec &action) {
  const Mat J = map.action_jacobian(state, action);
  const Mat gram = J.transpose() * J;
  ChangeOfVariable out;
  out.gram_determinant = gram.determinant();
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * std::pow(scale, static_cast<double>(gram.rows()));
  if (!(out.gram_determinant > tol)) {
    out.degenerate = true;
    return out;
  }
  out.log_correction = 0.5 * std::log(out.gram_determinant);
  return out;
}

ActionPrior ActionPrior::gaussian(Vec mean, const Mat &covariance) {
  auto energy = std::make_shared<GaussianEnergy>(std::move(mean), covariance);
  return ActionPrior([energy](const Vec &a) { return energy->value(a); });
}

ActionPrior ActionPrior::from_function(Fn fn) {
  if (!fn) throw std::invalid_argument("prior function is empty");
  return ActionPrior(std::move(fn));
}

Vec map_posterior_semantics(const CEPPolicy &policy, const LatentState &state,
                            const Mat &actions, const ActionPrior &prior) {
  Vec out = log_unnormalized_density(policy, state, actions);
  if (prior.is_uniform()) return out;
  for (Eigen::Index i = 0; i < actions.cols(); ++i) {
    out(i) += prior.log_density(actions.col(i));
  }
  return out;
}

} // namespace cep

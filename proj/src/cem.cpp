#include "cep/cem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cep {

std::size_t CEMConfig::elite_count() const {
  const double raw = std::ceil(elite_fraction * static_cast<double>(n_samples) - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

void CEMConfig::validate(std::size_t dim) const {
  const auto d = static_cast<Eigen::Index>(dim);
  if (n_samples < 1) throw std::invalid_argument("CEM needs at least one sample");
  if (n_iters < 1) throw std::invalid_argument("CEM needs at least one iteration");
  if (!(elite_fraction > 0.0 && elite_fraction <= 1.0)) {
    throw std::invalid_argument("CEM elite fraction must lie in (0, 1]");
  }
  if (elite_fraction * static_cast<double>(n_samples) < 1.0 - 1e-9) {
    throw std::invalid_argument("CEM elite fraction selects no sample");
  }
  if (!(cov_floor > 0.0)) throw std::invalid_argument("CEM covariance floor must be positive");
  if (init_mean.size() != 0 && init_mean.size() != d) {
    throw std::invalid_argument("CEM initial mean has the wrong dimension");
  }
  if (init_cov.size() != 0 && (init_cov.size() != d || !(init_cov.array() > 0.0).all())) {
    throw std::invalid_argument("CEM initial covariance must be positive with matching dimension");
  }
  if (action_bound.size() != 0 &&
      (action_bound.size() != d || !(action_bound.array() > 0.0).all())) {
    throw std::invalid_argument("CEM action bound must be positive with matching dimension");
  }
  if (!(fallback_damping >= 0.0)) throw std::invalid_argument("CEM fallback damping must be >= 0");
}

CEMResult optimize(const BatchObjective &objective, std::size_t dim, const Vec &fallback,
                   const CEMConfig &config, std::uint64_t seed) {
  config.validate(dim);
  const auto d = static_cast<Eigen::Index>(dim);
  if (fallback.size() != d) throw std::invalid_argument("CEM fallback has the wrong dimension");
  const auto n = static_cast<Eigen::Index>(config.n_samples);
  const bool bounded = config.action_bound.size() == d;

  Vec mean = config.init_mean.size() == d ? config.init_mean : Vec::Zero(d);
  Vec cov;
  if (config.init_cov.size() == d) {
    cov = config.init_cov;
  } else if (bounded) {
    cov = (config.action_bound / 2.0).array().square();
  } else {
    cov = Vec::Ones(d);
  }
  if (bounded) mean = mean.cwiseMax(-config.action_bound).cwiseMin(config.action_bound);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  CEMResult result;
  result.trace.reserve(config.n_iters);
  Mat samples(d, n);
  Vec energies(n);
  std::vector<Eigen::Index> order;
  order.reserve(static_cast<std::size_t>(n));
  const std::size_t n_elite = config.elite_count();

  for (std::size_t it = 0; it < config.n_iters; ++it) {
    const Vec stddev = cov.cwiseSqrt();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        samples(j, i) = mean(j) + stddev(j) * normal(rng);
      }
    }
    if (bounded) {
      samples = samples.cwiseMax(-config.action_bound.replicate(1, n))
                    .cwiseMin(config.action_bound.replicate(1, n));
    }
    objective(samples, energies);

    order.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = energies(i);
      if (std::isnan(e) || e == std::numeric_limits<double>::infinity()) {
        throw std::domain_error("CEM objective returned +inf or NaN");
      }
      if (e > kNegInf) order.push_back(i);
    }

    CEMState state;
    state.n_feasible = order.size();
    if (!order.empty()) {
      // Highest energy first; ties resolved by sample index so the result is
      // independent of the sort implementation.
      auto better = [&](Eigen::Index a, Eigen::Index b) {
        return energies(a) > energies(b) || (energies(a) == energies(b) && a < b);
      };
      const std::size_t k = std::min(n_elite, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                        order.end(), better);

      const Eigen::Index best = order.front();
      if (energies(best) > result.energy) {
        result.energy = energies(best);
        result.action = samples.col(best);
        result.feasible = true;
      }

      Vec elite_mean = Vec::Zero(d);
      for (std::size_t e = 0; e < k; ++e) elite_mean += samples.col(order[e]);
      elite_mean /= static_cast<double>(k);
      Vec elite_var = Vec::Zero(d);
      for (std::size_t e = 0; e < k; ++e) {
        elite_var += (samples.col(order[e]) - elite_mean).array().square().matrix();
      }
      elite_var /= static_cast<double>(k);
      mean = elite_mean;
      cov = elite_var.array() + config.cov_floor;
    }

    state.mean = mean;
    state.cov = cov;
    state.best_action = result.feasible ? result.action : Vec();
    state.best_energy = result.energy;
    result.trace.push_back(std::move(state));
  }

  if (!result.feasible) {
    result.action = fallback;
    if (bounded) {
      result.action = result.action.cwiseMax(-config.action_bound).cwiseMin(config.action_bound);
    }
  }
  return result;
}

CEMResult optimize(const CEPPolicy &policy, const LatentState &state, std::size_t action_dim,
                   const CEMConfig &config, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(action_dim);
  Vec fallback = Vec::Zero(d);
  if (state.velocity.size() == d) fallback = -config.fallback_damping * state.velocity;
  auto objective = [&](const Mat &actions, Eigen::Ref<Vec> out) {
    out = log_unnormalized_density(policy, state, actions);
  };
  return optimize(objective, action_dim, fallback, config, seed);
}

CEMResult optimize(const CEPPolicy &policy, const JointState &state, const CEMConfig &config,
                   std::uint64_t seed) {
  if (state.q.size() != state.qd.size()) {
    throw std::invalid_argument("joint state position and velocity dimensions differ");
  }
  return optimize(policy, to_latent(state), static_cast<std::size_t>(state.q.size()), config,
                  seed);
}

} // namespace cep

#include "cep/hrl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cep {

void HighLevelAction::validate() const {
  if (mean.size() == 0) throw std::invalid_argument("high-level mean is empty");
  if (cov_diag.size() != mean.size()) {
    throw std::invalid_argument("high-level covariance size does not match its mean");
  }
  if (!mean.allFinite()) throw std::invalid_argument("high-level mean is not finite");
  for (Eigen::Index i = 0; i < cov_diag.size(); ++i) {
    if (!(cov_diag(i) > 0.0) || !std::isfinite(cov_diag(i))) {
      throw std::invalid_argument("high-level covariance entry " + std::to_string(i) +
                                  " must be positive and finite");
    }
  }
}

PriorPolicy PriorPolicy::gaussian(Vec mean, const Mat &covariance) {
  Eigen::LLT<Mat> llt(covariance);
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size() ||
      llt.info() != Eigen::Success) {
    throw std::invalid_argument("prior covariance must be positive definite and match the mean");
  }
  Mat L = llt.matrixL();
  return PriorPolicy([mean = std::move(mean), L](const Vec &, const Mat &actions,
                                                  Eigen::Ref<Vec> out) {
    const Mat diff = actions.colwise() - mean;
    const Mat z = L.triangularView<Eigen::Lower>().solve(diff);
    out = -0.5 * z.colwise().squaredNorm().transpose();
  });
}

PriorPolicy PriorPolicy::half_space(Vec normal, double offset) {
  return PriorPolicy([normal = std::move(normal), offset](const Vec &, const Mat &actions,
                                                          Eigen::Ref<Vec> out) {
    const Vec proj = actions.transpose() * normal;
    for (Eigen::Index i = 0; i < proj.size(); ++i) out(i) = proj(i) >= offset ? 0.0 : kNegInf;
  });
}

PriorPolicy PriorPolicy::from_batch(BatchFn fn) {
  if (!fn) throw std::invalid_argument("prior batch function is empty");
  return PriorPolicy(std::move(fn));
}

PriorPolicy PriorPolicy::product(std::vector<PriorPolicy> factors) {
  std::vector<PriorPolicy> active;
  for (auto &f : factors) {
    if (!f.is_uniform()) active.push_back(std::move(f));
  }
  if (active.empty()) return uniform();
  return PriorPolicy([active = std::move(active)](const Vec &state, const Mat &actions,
                                                  Eigen::Ref<Vec> out) {
    out.setZero();
    Vec tmp(actions.cols());
    for (const auto &f : active) {
      f.evaluate(state, actions, tmp);
      out += tmp;
    }
  });
}

void PriorPolicy::evaluate(const Vec &state, const Mat &actions, Eigen::Ref<Vec> out) const {
  if (out.size() != actions.cols()) throw std::invalid_argument("prior output size mismatch");
  if (!fn_) {
    out.setZero();
    return;
  }
  fn_(state, actions, out);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (std::isnan(out(i)) || out(i) == std::numeric_limits<double>::infinity()) {
      throw std::domain_error("prior returned +inf or NaN");
    }
  }
}

double PriorPolicy::log_density(const Vec &state, const Vec &action) const {
  Vec out(1);
  evaluate(state, action, out);
  return out(0);
}

void composed_energy(const PriorPolicy &prior, const HighLevelAction &hla, const Vec &state,
                     const Mat &actions, Eigen::Ref<Vec> out) {
  high_level_energy(hla, actions, out);
  Vec p(actions.cols());
  prior.evaluate(state, actions, p);
  out += p;
}

void high_level_energy(const HighLevelAction &hla, const Mat &actions, Eigen::Ref<Vec> out) {
  const Vec inv = hla.cov_diag.cwiseInverse();
  const Mat diff = actions.colwise() - hla.mean;
  out = -0.5 * (diff.array().square().colwise() * inv.array()).colwise().sum().transpose();
}

LowLevelResult low_level_act(const PriorPolicy &prior, const HighLevelAction &hla,
                             const Vec &state, const CEMConfig &cem, std::uint64_t seed) {
  hla.validate();
  const auto dim = static_cast<std::size_t>(hla.mean.size());
  CEMConfig config = cem;
  if (config.init_mean.size() == 0) config.init_mean = hla.mean;
  if (config.init_cov.size() == 0 && config.action_bound.size() == 0) {
    config.init_cov = hla.cov_diag.cwiseMin(1.0);
  }
  config.validate(dim);

  Vec fallback = hla.mean;
  if (config.action_bound.size() != 0) {
    fallback = fallback.cwiseMax(-config.action_bound).cwiseMin(config.action_bound);
  }

  BatchObjective objective = [&](const Mat &actions, Eigen::Ref<Vec> out) {
    composed_energy(prior, hla, state, actions, out);
  };
  const CEMResult r = optimize(objective, dim, fallback, config, seed);
  LowLevelResult out;
  out.feasible = r.feasible;
  out.energy = r.energy;
  out.action = r.feasible ? r.action : fallback;
  return out;
}

std::vector<SigmaLimitRow> sigma_limits_check(const PriorPolicy &prior, const Vec &state,
                                              const Vec &mu_h,
                                              const std::vector<double> &schedule,
                                              const CEMConfig &cem, std::uint64_t seed) {
  std::vector<SigmaLimitRow> rows;
  for (double scale : schedule) {
    HighLevelAction hla{mu_h, Vec::Constant(mu_h.size(), scale)};
    const LowLevelResult r = low_level_act(prior, hla, state, cem, seed);
    rows.push_back({scale, r.action, (r.action - mu_h).cwiseAbs().maxCoeff()});
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<std::string> PuckEnv::problems() const {
  std::vector<std::string> out;
  auto positive = [&](double v, const char *name) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back(std::string(name) + " must be positive");
  };
  positive(puck_radius, "puck_radius");
  positive(ee_radius, "ee_radius");
  positive(dt, "dt");
  positive(max_speed, "max_speed");
  if (horizon == 0) out.push_back("horizon must be positive");
  if (puck_start_jitter < 0.0) out.push_back("puck_start_jitter must be non-negative");
  if (puck_damping < 0.0 || puck_damping > 1.0) out.push_back("puck_damping must be in [0, 1]");
  if (ee_start.y() < table_y) out.push_back("ee_start is inside the forbidden strip");
  if (collision_penalty > 0.0) out.push_back("collision_penalty must not be positive");
  return out;
}

void PuckEnv::validate() const {
  const auto p = problems();
  if (!p.empty()) throw std::invalid_argument("invalid puck environment: " + p.front());
}

Vec PuckState::vector() const {
  Vec v(4);
  v << ee.x(), ee.y(), puck_x, puck_vx;
  return v;
}

PuckState puck_reset(const PuckEnv &env, std::uint64_t seed) {
  env.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PuckState s;
  s.ee = env.ee_start;
  s.puck_x = env.puck_start_x + env.puck_start_jitter * u(rng);
  s.puck_vx = 0.0;
  return s;
}

PuckStep puck_step(const PuckEnv &env, const PuckState &state, const Vec2 &velocity) {
  const Vec2 v = velocity.cwiseMax(-env.max_speed).cwiseMin(env.max_speed);
  PuckStep out;
  out.next = state;
  out.next.ee = state.ee + env.dt * v;
  out.next.puck_x = state.puck_x + env.dt * state.puck_vx;
  out.next.puck_vx = state.puck_vx * env.puck_damping;

  const Vec2 puck(out.next.puck_x, env.puck_y());
  const Vec2 diff = puck - out.next.ee;
  const double contact = env.puck_radius + env.ee_radius;
  const double dist = diff.norm();
  if (dist < contact && dist > 0.0) {
    const Vec2 n = diff / dist;
    const double approach = v.dot(n);
    if (approach > 0.0) {
      const double pushed = approach * n.x();
      out.next.puck_vx = pushed >= 0.0 ? std::max(out.next.puck_vx, pushed)
                                       : std::min(out.next.puck_vx, pushed);
    }
    // Resolve the overlap along the table.
    const double dy = env.puck_y() - out.next.ee.y();
    if (std::abs(dy) < contact) {
      const double dx = std::sqrt(contact * contact - dy * dy);
      if (n.x() >= 0.0) {
        out.next.puck_x = std::max(out.next.puck_x, out.next.ee.x() + dx);
      } else {
        out.next.puck_x = std::min(out.next.puck_x, out.next.ee.x() - dx);
      }
    }
  }

  out.collided = out.next.ee.y() < env.table_y;
  const double e = out.next.puck_x - env.target_x;
  out.reward = -env.distance_weight * e * e + (out.collided ? env.collision_penalty : 0.0);
  return out;
}

PriorPolicy table_constraint_prior(const PuckEnv &env) {
  const double dt = env.dt;
  const double table = env.table_y;
  return PriorPolicy::from_batch([dt, table](const Vec &state, const Mat &actions,
                                             Eigen::Ref<Vec> out) {
    const double y = state(1);
    for (Eigen::Index i = 0; i < actions.cols(); ++i) {
      out(i) = y + dt * actions(1, i) >= table ? 0.0 : kNegInf;
    }
  });
}

Vec2 pushing_velocity(const PuckEnv &env, const PuckState &state) {
  const double contact = env.puck_radius + env.ee_radius;
  const double gain = 4.0;
  const double behind_x = state.puck_x - contact - 0.02;
  const double push_y = env.puck_y();
  Vec2 goal;
  if (state.ee.x() > behind_x + 0.01) {
    // Pass over the puck before descending behind it.
    goal = Vec2(behind_x, push_y + contact + 0.1);
  } else if (std::abs(state.ee.y() - push_y) > 0.02) {
    goal = Vec2(behind_x, push_y);
  } else {
    const double d = env.puck_damping;
    const double coast = d < 1.0 ? state.puck_vx * env.dt * d / (1.0 - d) : 0.0;
    const double speed = std::clamp(gain * (env.target_x - state.puck_x - coast), -env.max_speed,
                                    env.max_speed);
    return Vec2(speed, gain * (push_y - state.ee.y()));
  }
  return (gain * (goal - state.ee)).cwiseMax(-env.max_speed).cwiseMin(env.max_speed);
}

PriorPolicy pushing_prior(const PuckEnv &env, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("pushing prior variance must be positive");
  PriorPolicy go_to = PriorPolicy::from_batch(
      [env, variance](const Vec &state, const Mat &actions, Eigen::Ref<Vec> out) {
        const PuckState s{Vec2(state(0), state(1)), state(2), state(3)};
        const Vec2 mean = pushing_velocity(env, s);
        out = -0.5 / variance * (actions.colwise() - Vec(mean)).colwise().squaredNorm().transpose();
      });
  return PriorPolicy::product({table_constraint_prior(env), go_to});
}

ToyEpisodeResult toy_episode(const PuckEnv &env, const HighLevelSource &high_level,
                             const PriorPolicy &prior, const CEMConfig &cem, std::uint64_t seed) {
  env.validate();
  CEMConfig config = cem;
  if (config.action_bound.size() == 0) config.action_bound = Vec::Constant(2, env.max_speed);

  ToyEpisodeResult out;
  PuckState s = puck_reset(env, seed);
  out.states.push_back(s);
  std::mt19937_64 seeds(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t t = 0; t < env.horizon; ++t) {
    const Vec state = s.vector();
    std::optional<HighLevelAction> hla = high_level ? high_level(s) : std::nullopt;
    if (!hla) {
      // Prior alone: an infinitely wide high-level Gaussian centred on zero.
      hla = HighLevelAction{Vec::Zero(2), Vec::Constant(2, 1e12)};
      if (cem.init_mean.size() == 0) config.init_mean = Vec::Zero(2);
    }
    const LowLevelResult r = low_level_act(prior, *hla, state, config, seeds());
    if (!r.feasible) ++out.infeasible_steps;
    if (!std::isfinite(prior.log_density(state, r.action))) ++out.prior_violations;
    const PuckStep next = puck_step(env, s, Vec2(r.action(0), r.action(1)));
    out.total_return += next.reward;
    if (next.collided) ++out.collisions;
    out.actions.push_back(r.action);
    s = next.next;
    out.states.push_back(s);
  }
  out.final_puck_x = s.puck_x;
  return out;
}

Vec LinearHighLevel::features(const PuckEnv &env, const PuckState &s) {
  Vec f(4);
  f << s.puck_x - s.ee.x(), env.puck_y() - s.ee.y(), env.target_x - s.puck_x, 1.0;
  return f;
}

HighLevelAction LinearHighLevel::operator()(const PuckEnv &env, const PuckState &s) const {
  const Vec f = features(env, s);
  Vec log_var = log_cov;
  if (mode == CovarianceMode::StateLinear) log_var += log_cov_weights * f;
  log_var = log_var.cwiseMax(-20.0).cwiseMin(20.0);
  return {weights * f, log_var.array().exp().matrix()};
}

namespace {

std::size_t parameter_count(CovarianceMode mode) {
  switch (mode) {
  case CovarianceMode::Fixed: return 8;
  case CovarianceMode::Constant: return 10;
  case CovarianceMode::StateLinear: return 18;
  }
  return 0;
}

} // namespace

Vec LinearHighLevel::parameters() const {
  Vec theta(static_cast<Eigen::Index>(parameter_count(mode)));
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) theta(r * 4 + c) = weights(r, c);
  }
  if (mode != CovarianceMode::Fixed) theta.segment(8, 2) = log_cov;
  if (mode == CovarianceMode::StateLinear) {
    for (Eigen::Index r = 0; r < 2; ++r) {
      for (Eigen::Index c = 0; c < 4; ++c) theta(10 + r * 4 + c) = log_cov_weights(r, c);
    }
  }
  return theta;
}

LinearHighLevel LinearHighLevel::from_parameters(const Vec &theta, const LinearHighLevel &base) {
  if (theta.size() != static_cast<Eigen::Index>(parameter_count(base.mode))) {
    throw std::invalid_argument("linear high-level parameter vector has the wrong size");
  }
  LinearHighLevel p = base;
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) p.weights(r, c) = theta(r * 4 + c);
  }
  if (p.mode != CovarianceMode::Fixed) p.log_cov = theta.segment(8, 2);
  if (p.mode == CovarianceMode::StateLinear) {
    for (Eigen::Index r = 0; r < 2; ++r) {
      for (Eigen::Index c = 0; c < 4; ++c) p.log_cov_weights(r, c) = theta(10 + r * 4 + c);
    }
  }
  return p;
}

PolicySearchResult search_high_level(const PuckEnv &env, const PriorPolicy &prior,
                                     const PolicySearchConfig &config, std::uint64_t seed) {
  if (config.population == 0 || config.elites == 0 || config.elites > config.population) {
    throw std::invalid_argument("policy search needs 0 < elites <= population");
  }
  if (config.episodes_per_candidate == 0) {
    throw std::invalid_argument("policy search needs at least one episode per candidate");
  }
  LinearHighLevel initial;
  initial.mode = config.covariance;
  auto evaluate = [&](const LinearHighLevel &p, std::uint64_t stream) {
    double total = 0.0;
    for (std::size_t e = 0; e < config.episodes_per_candidate; ++e) {
      HighLevelSource source = [&](const PuckState &s) -> std::optional<HighLevelAction> {
        return p(env, s);
      };
      total += toy_episode(env, source, prior, config.low_level, stream * 1000 + e).total_return;
    }
    return total / static_cast<double>(config.episodes_per_candidate);
  };

  PolicySearchResult out;
  out.initial_return = evaluate(initial, seed);
  out.best = initial;
  out.best_return = out.initial_return;

  Vec mean = initial.parameters();
  Vec stddev = Vec::Constant(mean.size(), config.init_std);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t g = 0; g < config.generations; ++g) {
    std::vector<Vec> thetas;
    std::vector<double> returns;
    for (std::size_t i = 0; i < config.population; ++i) {
      Vec theta = mean;
      for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) += stddev(k) * normal(rng);
      const LinearHighLevel p = LinearHighLevel::from_parameters(theta, initial);
      const double ret = evaluate(p, seed + 1 + g * config.population + i);
      if (ret > out.best_return) {
        out.best_return = ret;
        out.best = p;
      }
      thetas.push_back(std::move(theta));
      returns.push_back(ret);
    }
    std::vector<std::size_t> order(thetas.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return returns[a] > returns[b]; });
    Vec new_mean = Vec::Zero(mean.size());
    double elite_return = 0.0;
    for (std::size_t i = 0; i < config.elites; ++i) {
      new_mean += thetas[order[i]];
      elite_return += returns[order[i]];
    }
    new_mean /= static_cast<double>(config.elites);
    Vec var = Vec::Zero(mean.size());
    for (std::size_t i = 0; i < config.elites; ++i) {
      var += (thetas[order[i]] - new_mean).array().square().matrix();
    }
    var /= static_cast<double>(config.elites);
    mean = new_mean;
    stddev = (var.array().sqrt() + 1e-3).matrix();
    out.elite_returns.push_back(elite_return / static_cast<double>(config.elites));
  }
  return out;
}

} // namespace cep

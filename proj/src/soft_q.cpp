#include "cep/soft_q.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cep {

std::vector<std::string> TabularMDP::problems() const {
  std::vector<std::string> out;
  const auto S = static_cast<Eigen::Index>(n_states);
  const auto A = static_cast<Eigen::Index>(n_actions);
  if (n_states == 0) out.emplace_back("n_states must be at least 1");
  if (n_actions == 0) out.emplace_back("n_actions must be at least 1");
  if (transitions.size() != n_actions) {
    out.emplace_back("expected one transition table per action");
    return out;
  }
  for (std::size_t a = 0; a < n_actions; ++a) {
    const Mat &P = transitions[a];
    if (P.rows() != S || P.cols() != S) {
      out.push_back("transition table for action " + std::to_string(a) + " is not " +
                    std::to_string(S) + "x" + std::to_string(S));
      continue;
    }
    for (Eigen::Index s = 0; s < S; ++s) {
      const double sum = P.row(s).sum();
      if (!(P.row(s).array() >= 0.0).all() || !P.row(s).allFinite()) {
        out.push_back("transition row (action " + std::to_string(a) + ", state " +
                      std::to_string(s) + ") has negative or non-finite entries");
      } else if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "transition row (action " << a << ", state " << s << ") sums to " << sum
            << " instead of 1";
        out.push_back(msg.str());
      }
    }
  }
  for (const Mat *r : {&reward1, &reward2}) {
    const char *name = (r == &reward1) ? "reward1" : "reward2";
    if (r->rows() != S || r->cols() != A) {
      out.push_back(std::string(name) + " must be n_states x n_actions");
    } else if (!r->allFinite()) {
      out.push_back(std::string(name) + " has non-finite entries");
    }
  }
  return out;
}

void TabularMDP::validate() const {
  const auto p = problems();
  if (!p.empty()) throw std::invalid_argument("invalid MDP: " + p.front());
}

TabularMDP random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t horizon,
                      std::uint64_t seed, double reward_scale) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> uni(-reward_scale, reward_scale);
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.horizon = horizon;
  const auto S = static_cast<Eigen::Index>(n_states);
  const auto A = static_cast<Eigen::Index>(n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) {
    Mat P(S, S);
    for (Eigen::Index s = 0; s < S; ++s) {
      for (Eigen::Index t = 0; t < S; ++t) P(s, t) = expo(rng);
      P.row(s) /= P.row(s).sum();
    }
    mdp.transitions.push_back(P);
  }
  mdp.reward1.resize(S, A);
  mdp.reward2.resize(S, A);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index a = 0; a < A; ++a) mdp.reward1(s, a) = uni(rng);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index a = 0; a < A; ++a) mdp.reward2(s, a) = uni(rng);
  return mdp;
}

TabularMDP random_mdp_up_to(std::size_t max_states, std::size_t max_actions,
                            std::size_t max_horizon, std::uint64_t seed, double reward_scale) {
  if (max_states == 0 || max_actions == 0) {
    throw std::invalid_argument("random MDP needs at least one state and one action");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> states(1, max_states);
  std::uniform_int_distribution<std::size_t> actions(1, max_actions);
  std::uniform_int_distribution<std::size_t> horizon(0, max_horizon);
  const std::size_t S = states(rng);
  const std::size_t A = actions(rng);
  const std::size_t T = horizon(rng);
  return random_mdp(S, A, T, rng(), reward_scale);
}

double log_sum_exp(const Eigen::Ref<const Vec> &x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

namespace {

Vec row_log_sum_exp(const Mat &q) {
  Vec v(q.rows());
  for (Eigen::Index s = 0; s < q.rows(); ++s) v(s) = log_sum_exp(q.row(s).transpose());
  return v;
}

// E_{s'|s,a}[f(s')] as an n_states x n_actions table.
Mat expectation(const TabularMDP &mdp, const Vec &f) {
  Mat out(static_cast<Eigen::Index>(mdp.n_states), static_cast<Eigen::Index>(mdp.n_actions));
  for (std::size_t a = 0; a < mdp.n_actions; ++a) {
    out.col(static_cast<Eigen::Index>(a)) = mdp.transitions[a] * f;
  }
  return out;
}

} // namespace

SoftQTable soft_value_iteration(const TabularMDP &mdp, const Mat &reward) {
  mdp.validate();
  if (reward.rows() != static_cast<Eigen::Index>(mdp.n_states) ||
      reward.cols() != static_cast<Eigen::Index>(mdp.n_actions)) {
    throw std::invalid_argument("reward table must be n_states x n_actions");
  }
  const std::size_t T = mdp.horizon;
  SoftQTable table;
  table.q.resize(T + 1);
  table.v.resize(T + 1);
  table.q[T] = reward;
  table.v[T] = row_log_sum_exp(reward);
  for (std::size_t t = T; t-- > 0;) {
    table.q[t] = reward + expectation(mdp, table.v[t + 1]);
    table.v[t] = row_log_sum_exp(table.q[t]);
  }
  return table;
}

DeltaQ delta_q(const TabularMDP &mdp, double weight) {
  if (!(weight > 0.0 && weight < 1.0)) throw std::invalid_argument("weight must lie in (0, 1)");
  const double w1 = weight;
  const double w2 = 1.0 - weight;
  DeltaQ out;
  out.first = soft_value_iteration(mdp, mdp.reward1);
  out.second = soft_value_iteration(mdp, mdp.reward2);
  out.composed = soft_value_iteration(mdp, w1 * mdp.reward1 + w2 * mdp.reward2);

  const std::size_t T = mdp.horizon;
  out.direct.resize(T + 1);
  for (std::size_t t = 0; t <= T; ++t) {
    out.direct[t] = out.composed.q[t] - (w1 * out.first.q[t] + w2 * out.second.q[t]);
  }

  // ΔQ^{t-1} = E_{s'}[ log Σ_a exp(w1 Q1^t + w2 Q2^t + ΔQ^t)
  //                    - w1 log Σ_a exp Q1^t - w2 log Σ_a exp Q2^t ]
  out.recurrence.resize(T + 1);
  out.recurrence[T] = Mat::Zero(static_cast<Eigen::Index>(mdp.n_states),
                                static_cast<Eigen::Index>(mdp.n_actions));
  for (std::size_t t = T; t > 0; --t) {
    const Mat &q1 = out.first.q[t];
    const Mat &q2 = out.second.q[t];
    const Mat mixed = w1 * q1 + w2 * q2 + out.recurrence[t];
    Vec log_ratio(q1.rows());
    for (Eigen::Index s = 0; s < q1.rows(); ++s) {
      log_ratio(s) = log_sum_exp(mixed.row(s).transpose()) -
                     w1 * log_sum_exp(q1.row(s).transpose()) -
                     w2 * log_sum_exp(q2.row(s).transpose());
    }
    out.recurrence[t - 1] = expectation(mdp, log_ratio);
  }
  return out;
}

double recurrence_check(const TabularMDP &mdp, double weight) {
  const DeltaQ dq = delta_q(mdp, weight);
  double worst = 0.0;
  for (std::size_t t = 0; t < dq.direct.size(); ++t) {
    worst = std::max(worst, (dq.direct[t] - dq.recurrence[t]).cwiseAbs().maxCoeff());
  }
  return worst;
}

Vec one_step_posterior(const SoftQTable &table, std::size_t t, std::size_t state) {
  const Mat &q = table.q.at(t);
  const Vec row = q.row(static_cast<Eigen::Index>(state)).transpose();
  return (row.array() - log_sum_exp(row)).exp();
}

std::vector<HorizonSummary> summarize(const DeltaQ &dq) {
  std::vector<HorizonSummary> out;
  const std::size_t T = dq.direct.size() - 1;
  for (std::size_t t = 0; t <= T; ++t) {
    out.push_back({t, T - t, dq.direct[t].minCoeff(), dq.direct[t].maxCoeff()});
  }
  return out;
}

} // namespace cep

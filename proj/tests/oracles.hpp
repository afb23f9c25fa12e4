// Independent reference computations shared by the unit and acceptance tests.

#ifndef CEP_TESTS_ORACLES_HPP_
#define CEP_TESTS_ORACLES_HPP_

#include "cep/energies.hpp"
#include "cep/soft_q.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using cep::Mat;
using cep::Vec;

/// Regular grid over [lo, hi]^dim with n points per axis, one point per column.
inline Mat grid(std::size_t dim, double lo, double hi, Eigen::Index n) {
  const Vec axis = Vec::LinSpaced(n, lo, hi);
  Eigen::Index total = 1;
  for (std::size_t i = 0; i < dim; ++i) total *= n;
  Mat points(static_cast<Eigen::Index>(dim), total);
  for (Eigen::Index c = 0; c < total; ++c) {
    Eigen::Index rest = c;
    for (std::size_t i = 0; i < dim; ++i) {
      points(static_cast<Eigen::Index>(i), c) = axis(rest % n);
      rest /= n;
    }
  }
  return points;
}

inline double grid_step(double lo, double hi, Eigen::Index n) {
  return (hi - lo) / static_cast<double>(n - 1);
}

/// Column of `points` with the highest score under `score` (first on ties).
inline Vec argmax(const Mat &points, const std::function<double(const Vec &)> &score) {
  Eigen::Index best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const double v = score(points.col(i));
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return points.col(best);
}

/// Product of Gaussians by explicit inversion of the summed precisions.
inline Vec product_mean(const std::vector<Vec> &means, const std::vector<Mat> &covs) {
  const auto d = means.front().size();
  Mat precision = Mat::Zero(d, d);
  Vec eta = Vec::Zero(d);
  for (std::size_t k = 0; k < means.size(); ++k) {
    const Mat p = covs[k].inverse();
    precision += p;
    eta += p * means[k];
  }
  return precision.inverse() * eta;
}

/// Random SPD matrix a aᵀ / d + floor I.
inline Mat random_spd(std::mt19937_64 &rng, Eigen::Index d, double floor = 0.1) {
  std::normal_distribution<double> normal;
  const Mat a = Mat::NullaryExpr(d, d, [&] { return normal(rng); });
  return a * a.transpose() / static_cast<double>(d) + floor * Mat::Identity(d, d);
}

/// Soft-Q by unmemoized recursion over the remaining horizon.
inline double soft_q(const cep::TabularMDP &mdp, const Mat &reward, std::size_t t,
                     std::size_t s, std::size_t a) {
  double q = reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
  if (t == mdp.horizon) return q;
  for (std::size_t next = 0; next < mdp.n_states; ++next) {
    const double p = mdp.transitions[a](static_cast<Eigen::Index>(s),
                                        static_cast<Eigen::Index>(next));
    if (p == 0.0) continue;
    double z = 0.0;
    for (std::size_t b = 0; b < mdp.n_actions; ++b) z += std::exp(soft_q(mdp, reward, t + 1, next, b));
    q += p * std::log(z);
  }
  return q;
}

/// For deterministic transitions: log Σ over every action sequence from `s`
/// at time t of exp(total reward), starting with action `a`.
inline double sequence_log_sum(const cep::TabularMDP &mdp, const Mat &reward, std::size_t t,
                               std::size_t s, std::size_t a) {
  const double r = reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
  if (t == mdp.horizon) return r;
  Eigen::Index next = 0;
  mdp.transitions[a].row(static_cast<Eigen::Index>(s)).maxCoeff(&next);
  double z = 0.0;
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t tt, std::size_t ss,
                                                                   double acc) {
    for (std::size_t b = 0; b < mdp.n_actions; ++b) {
      const double total = acc + reward(static_cast<Eigen::Index>(ss), static_cast<Eigen::Index>(b));
      if (tt == mdp.horizon) {
        z += std::exp(total);
        continue;
      }
      Eigen::Index n = 0;
      mdp.transitions[b].row(static_cast<Eigen::Index>(ss)).maxCoeff(&n);
      walk(tt + 1, static_cast<std::size_t>(n), total);
    }
  };
  walk(t + 1, static_cast<std::size_t>(next), 0.0);
  return r + std::log(z);
}

/// Random MDP whose transitions are deterministic.
inline cep::TabularMDP deterministic_mdp(std::size_t n_states, std::size_t n_actions,
                                         std::size_t horizon, std::mt19937_64 &rng) {
  cep::TabularMDP m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.horizon = horizon;
  std::uniform_int_distribution<std::size_t> pick(0, n_states - 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto S = static_cast<Eigen::Index>(n_states);
  const auto A = static_cast<Eigen::Index>(n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) {
    Mat p = Mat::Zero(S, S);
    for (Eigen::Index s = 0; s < S; ++s) p(s, static_cast<Eigen::Index>(pick(rng))) = 1.0;
    m.transitions.push_back(p);
  }
  m.reward1 = Mat::NullaryExpr(S, A, [&] { return u(rng); });
  m.reward2 = Mat::NullaryExpr(S, A, [&] { return u(rng); });
  return m;
}

} // namespace oracle

#endif // CEP_TESTS_ORACLES_HPP_

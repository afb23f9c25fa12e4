#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cep/soft_q.hpp"
#include "oracles.hpp"

#include <random>

using namespace cep;

namespace {

double max_abs(const Mat &m) { return m.cwiseAbs().maxCoeff(); }

TabularMDP single_state(std::size_t n_actions, std::size_t horizon, double reward) {
  TabularMDP m;
  m.n_states = 1;
  m.n_actions = n_actions;
  m.horizon = horizon;
  for (std::size_t a = 0; a < n_actions; ++a) m.transitions.push_back(Mat::Ones(1, 1));
  m.reward1 = Mat::Constant(1, static_cast<Eigen::Index>(n_actions), reward);
  m.reward2 = m.reward1;
  return m;
}

} // namespace

TEST_CASE("log-sum-exp is stable and exact") {
  CHECK(log_sum_exp(Vec::Zero(3)) == doctest::Approx(std::log(3.0)));
  Vec big(2);
  big << 1000.0, 1000.0;
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  Vec mixed(2);
  mixed << -1000.0, 0.0;
  CHECK(log_sum_exp(mixed) == doctest::Approx(0.0));
}

TEST_CASE("one state with a constant reward and one action accumulates the reward") {
  const double c = 0.7;
  for (std::size_t T = 0; T <= 5; ++T) {
    const SoftQTable table = soft_value_iteration(single_state(1, T, c), Mat::Constant(1, 1, c));
    CHECK(table.q[0](0, 0) == doctest::Approx((static_cast<double>(T) + 1.0) * c));
    CHECK(table.q[T](0, 0) == doctest::Approx(c));
  }
}

TEST_CASE("one state with k equal actions adds log k per remaining step") {
  const TabularMDP m = single_state(3, 2, 0.0);
  const SoftQTable table = soft_value_iteration(m, m.reward1);
  CHECK(table.q[0](0, 0) == doctest::Approx(2.0 * std::log(3.0)));
  CHECK(table.v[0](0) == doctest::Approx(3.0 * std::log(3.0)));
}

TEST_CASE("value iteration matches unmemoized recursion on stochastic MDPs") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TabularMDP m = random_mdp_up_to(4, 3, 4, seed);
    const SoftQTable table = soft_value_iteration(m, m.reward1);
    REQUIRE(table.q.size() == m.horizon + 1);
    double worst = 0.0;
    for (std::size_t t = 0; t <= m.horizon; ++t) {
      for (std::size_t s = 0; s < m.n_states; ++s) {
        for (std::size_t a = 0; a < m.n_actions; ++a) {
          worst = std::max(worst, std::abs(table.q[t](static_cast<Eigen::Index>(s),
                                                      static_cast<Eigen::Index>(a)) -
                                           oracle::soft_q(m, m.reward1, t, s, a)));
        }
      }
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("value iteration matches action-sequence enumeration on deterministic MDPs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t S = 1 + static_cast<std::size_t>(trial % 4);
    const std::size_t A = 1 + static_cast<std::size_t>(trial % 3);
    const std::size_t T = static_cast<std::size_t>(trial % 5);
    const TabularMDP m = oracle::deterministic_mdp(S, A, T, rng);
    REQUIRE(m.problems().empty());
    const SoftQTable table = soft_value_iteration(m, m.reward2);
    for (std::size_t t = 0; t <= T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
          CHECK(std::abs(table.q[t](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) -
                         oracle::sequence_log_sum(m, m.reward2, t, s, a)) < 1e-8);
        }
      }
    }
  }
}

TEST_CASE("state values are the log-sum-exp of the Q rows") {
  const TabularMDP m = random_mdp(4, 3, 3, 5);
  const SoftQTable table = soft_value_iteration(m, m.reward1);
  for (std::size_t t = 0; t <= m.horizon; ++t) {
    for (Eigen::Index s = 0; s < 4; ++s) {
      CHECK(table.v[t](s) == doctest::Approx(log_sum_exp(table.q[t].row(s).transpose())));
    }
  }
}

TEST_CASE("the gap vanishes at the final step and for identical rewards") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    TabularMDP m = random_mdp_up_to(5, 3, 5, seed);
    const DeltaQ dq = delta_q(m);
    CHECK(max_abs(dq.direct[m.horizon]) == 0.0);
    m.reward2 = m.reward1;
    CHECK(max_abs(delta_q(m).direct[0]) < 1e-12);
  }
}

TEST_CASE("the optimal Q of the mixed reward never exceeds the mixed optimal Qs") {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TabularMDP m = random_mdp_up_to(5, 3, 5, seed);
    for (double w : {0.5, 0.1, 0.9}) {
      for (const Mat &d : delta_q(m, w).direct) worst = std::max(worst, d.maxCoeff());
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("with one remaining step the gap is the Jensen gap of the next values") {
  const TabularMDP m = random_mdp(3, 2, 1, 9);
  const DeltaQ dq = delta_q(m);
  for (Eigen::Index s = 0; s < 3; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      double expected = 0.0;
      for (Eigen::Index n = 0; n < 3; ++n) {
        const Vec mixed = 0.5 * (m.reward1.row(n) + m.reward2.row(n)).transpose();
        const double gap = log_sum_exp(mixed) - 0.5 * log_sum_exp(m.reward1.row(n).transpose()) -
                           0.5 * log_sum_exp(m.reward2.row(n).transpose());
        expected += m.transitions[a](s, n) * gap;
      }
      CHECK(dq.direct[0](s, static_cast<Eigen::Index>(a)) == doctest::Approx(expected));
    }
  }
}

TEST_CASE("the log-ratio recurrence reproduces the direct gap") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TabularMDP m = random_mdp_up_to(5, 3, 5, seed);
    worst = std::max(worst, recurrence_check(m));
    const DeltaQ dq = delta_q(m);
    CHECK(max_abs(dq.recurrence[m.horizon]) == 0.0);
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("one-step posteriors are normalized softmaxes") {
  const TabularMDP m = random_mdp(4, 3, 2, 21);
  const SoftQTable table = soft_value_iteration(m, m.reward1);
  for (std::size_t s = 0; s < 4; ++s) {
    const Vec p = one_step_posterior(table, 0, s);
    CHECK(p.sum() == doctest::Approx(1.0));
    CHECK(p.minCoeff() > 0.0);
    const Vec row = table.q[0].row(static_cast<Eigen::Index>(s)).transpose();
    CHECK(std::log(p(0) / p(1)) == doctest::Approx(row(0) - row(1)));
  }
}

TEST_CASE("horizon summaries cover every step") {
  const TabularMDP m = random_mdp(3, 2, 4, 2);
  const auto rows = summarize(delta_q(m));
  REQUIRE(rows.size() == 5);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    CHECK(rows[t].t == t);
    CHECK(rows[t].remaining == 4 - t);
    CHECK(rows[t].min_delta <= rows[t].max_delta);
  }
  CHECK(rows[4].min_delta == 0.0);
}

TEST_CASE("random MDP generation") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TabularMDP m = random_mdp_up_to(5, 3, 5, seed);
    CHECK(m.problems().empty());
    CHECK(m.n_states >= 1);
    CHECK(m.n_states <= 5);
    CHECK(m.n_actions <= 3);
    CHECK(m.horizon <= 5);
    const TabularMDP again = random_mdp_up_to(5, 3, 5, seed);
    CHECK(max_abs(m.reward1 - again.reward1) == 0.0);
  }
}

TEST_CASE("invalid MDPs are reported") {
  TabularMDP m = random_mdp(3, 2, 2, 1);
  m.transitions[1](2, 0) += 0.1;
  const auto problems = m.problems();
  REQUIRE_FALSE(problems.empty());
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  TabularMDP short_reward = random_mdp(3, 2, 2, 1);
  short_reward.reward2 = Mat::Zero(2, 2);
  CHECK_FALSE(short_reward.problems().empty());
  TabularMDP negative = random_mdp(2, 1, 1, 1);
  negative.transitions[0] << 1.5, -0.5, 0.5, 0.5;
  CHECK_FALSE(negative.problems().empty());
}

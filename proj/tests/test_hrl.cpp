#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cep/hrl.hpp"
#include "oracles.hpp"

using namespace cep;

namespace {

CEMConfig bounded(std::size_t n, double bound = 3.0) {
  CEMConfig c;
  c.n_samples = n;
  c.action_bound = Vec::Constant(2, bound);
  return c;
}

HighLevelAction hla(Vec2 mean, double var) { return {mean, Vec::Constant(2, var)}; }

double dist_inf(const Vec &a, const Vec &b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("high-level energy is a diagonal Gaussian quadratic") {
  Mat actions(2, 2);
  actions << 1.0, 0.0, 2.0, 0.0;
  Vec out(2);
  high_level_energy({Vec2(0.0, 0.0), Vec2(1.0, 4.0)}, actions, out);
  CHECK(out(0) == doctest::Approx(-0.5 * (1.0 + 1.0)));
  CHECK(out(1) == 0.0);
}

TEST_CASE("invalid high-level actions are rejected") {
  CHECK_THROWS_AS(hla(Vec2(0, 0), 0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS((HighLevelAction{Vec2(0, 0), Vec::Ones(3)}.validate()), std::invalid_argument);
  CHECK_THROWS_AS(hla(Vec2(NAN, 0), 1.0).validate(), std::invalid_argument);
}

TEST_CASE("a uniform prior returns the high-level mean") {
  const LowLevelResult r =
      low_level_act(PriorPolicy::uniform(), hla(Vec2(0.4, -1.2), 0.5), Vec::Zero(4), bounded(10000), 1);
  CHECK(r.feasible);
  CHECK(dist_inf(r.action, Vec2(0.4, -1.2)) < 2e-2);
}

TEST_CASE("a Gaussian prior with equal covariance lands halfway") {
  const Vec2 p(1.0, 0.5), mu(-0.6, 1.1);
  const PriorPolicy prior = PriorPolicy::gaussian(p, Mat::Identity(2, 2));
  const LowLevelResult r = low_level_act(prior, hla(mu, 1.0), Vec::Zero(4), bounded(10000), 2);
  const Vec expected = oracle::product_mean({p, mu}, {Mat::Identity(2, 2), Mat::Identity(2, 2)});
  CHECK(dist_inf(expected, (p + mu) / 2.0) < 1e-12);
  CHECK(dist_inf(r.action, expected) < 2e-2);
}

TEST_CASE("a half-space prior projects an infeasible mean onto its boundary") {
  const PriorPolicy prior = PriorPolicy::half_space(Vec2(1.0, 0.0), 0.0);
  const LowLevelResult r = low_level_act(prior, hla(Vec2(-1.0, 0.0), 1.0), Vec::Zero(4), bounded(10000), 3);
  CHECK(r.feasible);
  CHECK(r.action(0) >= 0.0);
  CHECK(r.action(0) < 2e-2);
  CHECK(std::abs(r.action(1)) < 0.1);
}

TEST_CASE("prior evaluations") {
  const PriorPolicy half = PriorPolicy::half_space(Vec2(0.0, 1.0), 0.5);
  CHECK(half.log_density(Vec::Zero(4), Vec2(0.0, 0.5)) == 0.0);
  CHECK(half.log_density(Vec::Zero(4), Vec2(0.0, 0.4)) == kNegInf);
  const PriorPolicy g = PriorPolicy::gaussian(Vec2(1.0, 0.0), 2.0 * Mat::Identity(2, 2));
  CHECK(g.log_density(Vec::Zero(4), Vec2(1.0, 2.0)) -
            g.log_density(Vec::Zero(4), Vec2(1.0, 0.0)) ==
        doctest::Approx(-1.0));
  CHECK(PriorPolicy::uniform().is_uniform());
  CHECK(PriorPolicy::uniform().log_density(Vec::Zero(4), Vec2(5.0, 5.0)) == 0.0);
  CHECK_THROWS_AS(PriorPolicy::gaussian(Vec2(0, 0), -Mat::Identity(2, 2)), std::invalid_argument);
}

TEST_CASE("composition is exchangeable and additive in log space") {
  const PuckEnv env;
  const PriorPolicy a = table_constraint_prior(env);
  const PriorPolicy b = PriorPolicy::gaussian(Vec2(0.2, 0.1), Mat::Identity(2, 2));
  const PriorPolicy ab = PriorPolicy::product({a, b});
  const PriorPolicy ba = PriorPolicy::product({b, a});
  const Vec state = puck_reset(env, 0).vector();
  const Mat actions = oracle::grid(2, -1.0, 1.0, 21);
  Vec x(actions.cols()), y(actions.cols()), pa(actions.cols()), pb(actions.cols()),
      h(actions.cols()), composed(actions.cols());
  ab.evaluate(state, actions, x);
  ba.evaluate(state, actions, y);
  a.evaluate(state, actions, pa);
  b.evaluate(state, actions, pb);
  const HighLevelAction high = hla(Vec2(0.5, -0.5), 0.3);
  high_level_energy(high, actions, h);
  composed_energy(ab, high, state, actions, composed);
  for (Eigen::Index i = 0; i < actions.cols(); ++i) {
    CHECK(x(i) == y(i));
    CHECK(x(i) == pa(i) + pb(i));
    CHECK(composed(i) == x(i) + h(i));
  }
}

TEST_CASE("sigma limits recover the high-level mean and the prior argmax") {
  const Vec2 p(0.8, -0.3), mu(-0.5, 0.6);
  const PriorPolicy prior = PriorPolicy::gaussian(p, 0.1 * Mat::Identity(2, 2));
  const auto rows =
      sigma_limits_check(prior, Vec::Zero(4), mu, {1e-6, 1.0, 1e6}, bounded(10000), 4);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].distance_to_mean < 1e-2);
  CHECK(dist_inf(rows[2].action, p) < 1e-2);
  const Vec middle = oracle::product_mean({p, mu}, {0.1 * Mat::Identity(2, 2), Mat::Identity(2, 2)});
  CHECK(dist_inf(rows[1].action, middle) < 2e-2);
}

TEST_CASE("puck dynamics") {
  PuckEnv env;
  env.puck_start_jitter = 0.0;
  PuckState s = puck_reset(env, 7);
  CHECK(s.puck_x == env.puck_start_x);
  CHECK(s.ee == env.ee_start);

  const PuckStep free = puck_step(env, s, Vec2(5.0, 0.0));
  CHECK(free.next.ee.x() == doctest::Approx(env.dt * env.max_speed));
  CHECK_FALSE(free.collided);
  CHECK(free.reward == doctest::Approx(-std::pow(env.puck_start_x - env.target_x, 2)));

  const PuckStep down = puck_step(env, s, Vec2(0.0, -1.0));
  CHECK(down.next.ee.y() == doctest::Approx(0.25));
  PuckState low = s;
  low.ee = Vec2(0.0, 0.01);
  const PuckStep hit = puck_step(env, low, Vec2(0.0, -1.0));
  CHECK(hit.collided);
  CHECK(hit.reward <= env.collision_penalty);

  PuckState touching = s;
  touching.ee = Vec2(s.puck_x - 0.07, env.puck_y());
  const PuckStep push = puck_step(env, touching, Vec2(1.0, 0.0));
  CHECK(push.next.puck_vx > 0.0);
  CHECK(push.next.puck_x - push.next.ee.x() >= env.puck_radius + env.ee_radius - 1e-12);
}

TEST_CASE("the table prior forbids exactly the velocities that would collide") {
  const PuckEnv env;
  const PriorPolicy prior = table_constraint_prior(env);
  PuckState s = puck_reset(env, 0);
  s.ee = Vec2(0.0, 0.02);
  CHECK(prior.log_density(s.vector(), Vec2(0.0, -0.39)) == 0.0);
  CHECK(prior.log_density(s.vector(), Vec2(0.0, -0.41)) == kNegInf);
  for (double vy : {-1.0, -0.5, -0.41, -0.39, -0.2, 0.0}) {
    const bool allowed = std::isfinite(prior.log_density(s.vector(), Vec2(0.0, vy)));
    CHECK(allowed == !puck_step(env, s, Vec2(0.0, vy)).collided);
  }
}

TEST_CASE("adversarial high-level actions never break the prior") {
  const PuckEnv env;
  const PriorPolicy prior = table_constraint_prior(env);
  const HighLevelSource adversary = [](const PuckState &) {
    return std::optional<HighLevelAction>(HighLevelAction{Vec2(0.3, -5.0), Vec::Constant(2, 1e-3)});
  };
  std::size_t violations = 0, collisions = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ToyEpisodeResult r = toy_episode(env, adversary, prior, bounded(500, 1.0), seed);
    violations += r.prior_violations;
    collisions += r.collisions;
    for (const auto &st : r.states) CHECK(st.ee.y() >= env.table_y);
  }
  CHECK(violations == 0);
  CHECK(collisions == 0);
}

TEST_CASE("without a high-level action the prior acts alone") {
  const PuckEnv env;
  const PriorPolicy prior = pushing_prior(env, 0.01);
  const PuckState s = puck_reset(env, 1);
  const LowLevelResult r = low_level_act(prior, hla(Vec2(0.0, 0.0), 1e12), s.vector(), bounded(10000, 1.0), 5);
  CHECK(dist_inf(r.action, pushing_velocity(env, s)) < 2e-2);
}

TEST_CASE("the scripted pushing prior pushes the puck towards the target") {
  const PuckEnv env;
  const ToyEpisodeResult r = toy_episode(env, nullptr, pushing_prior(env, 0.01), bounded(500, 1.0), 0);
  CHECK(r.collisions == 0);
  CHECK(r.prior_violations == 0);
  CHECK(std::abs(r.final_puck_x - env.target_x) < 0.1);
  CHECK(r.states.size() == env.horizon + 1);
  CHECK(r.actions.size() == env.horizon);
}

TEST_CASE("a zero-weight reward gives zero return") {
  PuckEnv env;
  env.distance_weight = 0.0;
  const ToyEpisodeResult r = toy_episode(env, nullptr, pushing_prior(env, 0.01), bounded(200, 1.0), 0);
  CHECK(r.collisions == 0);
  CHECK(r.total_return == 0.0);
}

TEST_CASE("toy episodes are deterministic") {
  const PuckEnv env;
  LinearHighLevel policy;
  policy.weights(0, 0) = 1.0;
  const HighLevelSource source = [&](const PuckState &s) {
    return std::optional<HighLevelAction>(policy(env, s));
  };
  const auto a = toy_episode(env, source, table_constraint_prior(env), bounded(200, 1.0), 3);
  const auto b = toy_episode(env, source, table_constraint_prior(env), bounded(200, 1.0), 3);
  CHECK(a.total_return == b.total_return);
  CHECK(a.final_puck_x == b.final_puck_x);
}

TEST_CASE("linear high-level parameters round-trip in every covariance mode") {
  for (CovarianceMode mode : {CovarianceMode::Fixed, CovarianceMode::Constant, CovarianceMode::StateLinear}) {
    LinearHighLevel p;
    p.mode = mode;
    p.weights = Mat::Random(2, 4);
    p.log_cov = Vec::Random(2);
    p.log_cov_weights = Mat::Random(2, 4);
    const Vec theta = p.parameters();
    const std::size_t expected = 8 + (mode == CovarianceMode::Fixed ? 0 : 2) +
                                 (mode == CovarianceMode::StateLinear ? 8 : 0);
    CHECK(static_cast<std::size_t>(theta.size()) == expected);
    const LinearHighLevel back = LinearHighLevel::from_parameters(theta, p);
    CHECK(back.parameters() == theta);
    CHECK((back.weights - p.weights).norm() == 0.0);
  }
  const PuckEnv env;
  LinearHighLevel fixed;
  fixed.mode = CovarianceMode::Fixed;
  const HighLevelAction a = fixed(env, puck_reset(env, 0));
  CHECK(a.cov_diag(0) == doctest::Approx(0.1));
}

TEST_CASE("high-level search improves on its initial policy") {
  const PuckEnv env;
  PolicySearchConfig config;
  config.generations = 4;
  config.population = 8;
  config.elites = 2;
  config.episodes_per_candidate = 1;
  config.low_level = bounded(100, 1.0);
  const PolicySearchResult r = search_high_level(env, pushing_prior(env, 0.05), config, 0);
  CHECK(r.elite_returns.size() == 4);
  CHECK(r.best_return >= r.initial_return);
}

TEST_CASE("puck environment validation") {
  PuckEnv env;
  CHECK(env.problems().empty());
  env.dt = 0.0;
  CHECK_FALSE(env.problems().empty());
  CHECK_THROWS_AS(env.validate(), std::invalid_argument);
  PuckEnv penalty;
  penalty.collision_penalty = 1.0;
  CHECK_FALSE(penalty.problems().empty());
}

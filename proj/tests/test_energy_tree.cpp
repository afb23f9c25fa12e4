#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cep/energies.hpp"
#include "cep/energy_tree.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace cep;
using Vec3 = Eigen::Vector3d;

namespace {

std::shared_ptr<const TaskMap> identity() { return std::make_shared<IdentityMap>(); }

EnergyComponent gaussian_component(const std::string &name, Vec mean, double variance,
                                   double beta = 1.0) {
  const auto d = mean.size();
  return {name, identity(),
          std::make_shared<GaussianEnergy>(std::move(mean), variance * Mat::Identity(d, d)), beta};
}

LatentState zero_state(Eigen::Index d) { return {Vec::Zero(d), Vec::Zero(d)}; }

Eigen::Index grid_argmax(const Vec &values) {
  Eigen::Index best = 0;
  values.maxCoeff(&best);
  return best;
}

} // namespace

TEST_CASE("single Gaussian component at its mean is exactly 0") {
  const Vec mu = Vec2(0.3, -1.2);
  CEPPolicy policy({gaussian_component("g", mu, 1.0)});
  const Vec out = log_unnormalized_density(policy, zero_state(2), mu);
  CHECK(out(0) == 0.0);
}

TEST_CASE("a -inf component absorbs every finite total") {
  auto wall = std::make_shared<FunctionEnergy>([](const LatentState &, const Vec &) {
    return kNegInf;
  });
  CEPPolicy policy({gaussian_component("g", Vec::Zero(1), 1.0), {"wall", identity(), wall}});
  Mat actions(1, 3);
  actions << -1.0, 0.0, 5.0;
  const Vec out = log_unnormalized_density(policy, zero_state(1), actions);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(out(i) == kNegInf);
}

TEST_CASE("two unit Gaussians at 0 and 2 evaluated at 1 sum to -1") {
  CEPPolicy policy({gaussian_component("a", Vec::Zero(1), 1.0),
                    gaussian_component("b", Vec::Constant(1, 2.0), 1.0)});
  const Vec out = log_unnormalized_density(policy, zero_state(1), Vec::Ones(1));
  CHECK(out(0) == doctest::Approx(-1.0));
}

TEST_CASE("empty batch gives an empty result") {
  CEPPolicy policy({gaussian_component("g", Vec::Zero(2), 1.0)});
  CHECK(log_unnormalized_density(policy, zero_state(2), Mat(2, 0)).size() == 0);
}

TEST_CASE("components reject non-positive beta and policies reject emptiness") {
  CHECK_THROWS_AS(gaussian_component("g", Vec::Zero(1), 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(CEPPolicy({}), std::invalid_argument);
}

TEST_CASE("+inf or NaN energies are reported as domain errors") {
  auto bad = std::make_shared<FunctionEnergy>([](const LatentState &, const Vec &a) {
    return a(0) > 0 ? std::numeric_limits<double>::infinity() : std::nan("");
  });
  CEPPolicy policy({{"bad", identity(), bad}});
  CHECK_THROWS_AS(log_unnormalized_density(policy, zero_state(1), Vec::Ones(1)),
                  std::domain_error);
  CHECK_THROWS_AS(log_unnormalized_density(policy, zero_state(1), -Vec::Ones(1)),
                  std::domain_error);
}

TEST_CASE("change of variable: identity map has zero correction") {
  const auto c = change_of_variable_check(IdentityMap(), zero_state(3), Vec::Zero(3));
  CHECK_FALSE(c.degenerate);
  CHECK(c.log_correction == doctest::Approx(0.0));
}

TEST_CASE("change of variable: scaling by 2 in 1D gives log 2") {
  const auto c = change_of_variable_check(LinearMap(Mat::Constant(1, 1, 2.0)), zero_state(1),
                                          Vec::Zero(1));
  CHECK(c.log_correction == doctest::Approx(std::log(2.0)));
}

TEST_CASE("change of variable: planar two-link Jacobian") {
  const ChainSpec chain({1.0, 1.0}, {{-3, 3}, {-3, 3}});
  const KinematicMap map(chain, 1);
  // q = (0, 0): J = [[0,0],[2,1]] has singular JᵀJ.
  const auto singular = change_of_variable_check(map, zero_state(2), Vec::Zero(2));
  CHECK(singular.degenerate);
  // q = (0, π/2): J = [[-1,-1],[1,0]], JᵀJ = [[2,1],[1,1]], det 1.
  const LatentState bent{Vec2(0.0, M_PI / 2), Vec::Zero(2)};
  const auto c = change_of_variable_check(map, bent, Vec::Zero(2));
  CHECK_FALSE(c.degenerate);
  CHECK(c.gram_determinant == doctest::Approx(1.0));
  CHECK(c.log_correction == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("change of variable correction does not depend on the action") {
  const ChainSpec chain({0.7, 0.5, 0.3}, {{-3, 3}, {-3, 3}, {-3, 3}});
  const LinearMap map(Mat::Random(3, 3) + 2.0 * Mat::Identity(3, 3));
  const LatentState s{Vec3(0.1, 0.4, -0.2), Vec::Zero(3)};
  const double a = change_of_variable_check(map, s, Vec::Zero(3)).log_correction;
  const double b = change_of_variable_check(map, s, Vec3(5, -2, 1)).log_correction;
  CHECK(a == b);
}

TEST_CASE("MAP semantics: uniform prior is the composed density") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  CEPPolicy policy({gaussian_component("a", Vec2(1, 0), 0.5),
                    gaussian_component("b", Vec2(-1, 2), 2.0)});
  for (int i = 0; i < 100; ++i) {
    const LatentState s{Vec2(normal(rng), normal(rng)), Vec2(normal(rng), normal(rng))};
    const Mat a = Mat::NullaryExpr(2, 1, [&] { return normal(rng); });
    CHECK(map_posterior_semantics(policy, s, a)(0) == log_unnormalized_density(policy, s, a)(0));
  }
}

TEST_CASE("MAP semantics: Gaussian prior adds its quadratic") {
  CEPPolicy policy({gaussian_component("a", Vec2(1, 0), 0.5)});
  const ActionPrior prior = ActionPrior::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  const LatentState s = zero_state(2);
  CHECK(map_posterior_semantics(policy, s, Vec::Zero(2), prior)(0) ==
        doctest::Approx(log_unnormalized_density(policy, s, Vec::Zero(2))(0)));
  const Vec a = Vec2(0.6, -1.5);
  CHECK(map_posterior_semantics(policy, s, a, prior)(0) ==
        doctest::Approx(log_unnormalized_density(policy, s, a)(0) - 0.5 * a.squaredNorm()));
}

TEST_CASE("common beta scaling keeps the grid argmax") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  const Mat grid = Vec::LinSpaced(801, -4, 4).transpose();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EnergyComponent> base, scaled;
    const double lim = u(rng);
    auto wall = std::make_shared<FunctionEnergy>([lim](const LatentState &, const Vec &a) {
      return a(0) < lim ? kNegInf : 0.0;
    });
    for (int k = 0; k < 3; ++k) {
      const double m = u(rng), v = 0.2 + std::abs(u(rng));
      base.push_back(gaussian_component("g", Vec::Constant(1, m), v, 1.0));
      scaled.push_back(gaussian_component("g", Vec::Constant(1, m), v, 3.7));
    }
    base.push_back({"wall", identity(), wall});
    scaled.push_back({"wall", identity(), wall, 3.7});
    const Vec e1 = log_unnormalized_density(CEPPolicy(base), zero_state(1), grid);
    const Vec e2 = log_unnormalized_density(CEPPolicy(scaled), zero_state(1), grid);
    CHECK(grid_argmax(e1) == grid_argmax(e2));
  }
}

TEST_CASE("component order does not change the total") {
  std::vector<EnergyComponent> comps{gaussian_component("a", Vec2(1, 0), 0.5),
                                     gaussian_component("b", Vec2(-1, 2), 2.0),
                                     gaussian_component("c", Vec2(0, 1), 1.0)};
  auto wall = std::make_shared<FunctionEnergy>([](const LatentState &, const Vec &a) {
    return a(0) > 1.5 ? kNegInf : 0.0;
  });
  comps.push_back({"wall", identity(), wall});
  Mat actions = Mat::Random(2, 64) * 3.0;
  const Vec ref = log_unnormalized_density(CEPPolicy(comps), zero_state(2), actions);
  std::sort(comps.begin(), comps.end(),
            [](const auto &a, const auto &b) { return a.name > b.name; });
  const Vec perm = log_unnormalized_density(CEPPolicy(comps), zero_state(2), actions);
  for (Eigen::Index i = 0; i < ref.size(); ++i) {
    if (ref(i) == kNegInf) {
      CHECK(perm(i) == kNegInf);
    } else {
      CHECK(perm(i) == doctest::Approx(ref(i)).epsilon(1e-14));
    }
  }
}

TEST_CASE("batched and per-action evaluation agree") {
  const ChainSpec chain({0.5, 0.4, 0.3}, {{-2.8, 2.8}, {-2.8, 2.8}, {-2.8, 2.8}});
  GoToParams go;
  go.target = Vec2(0.6, 0.4);
  ObstacleParams ob;
  ob.center = Vec2(0.8, 0.2);
  ob.radius = 0.05;
  ob.gamma = 2.0;
  JointLimitParams jl;
  jl.limits = chain.joint_limits();
  CEPPolicy policy({{"go", std::make_shared<KinematicMap>(chain, 2), std::make_shared<GoToEnergy>(go)},
                    {"ob", std::make_shared<KinematicMap>(chain, 1, 0.5),
                     std::make_shared<ObstacleEnergy>(ob)},
                    {"jl", identity(), std::make_shared<JointLimitEnergy>(jl)}});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const JointState s{Vec3(normal(rng), normal(rng), normal(rng)),
                       Vec3(normal(rng), normal(rng), normal(rng))};
    const Mat actions = Mat::NullaryExpr(3, 50, [&] { return 5.0 * normal(rng); });
    const Vec batch = log_unnormalized_density(policy, s, actions);
    for (Eigen::Index i = 0; i < actions.cols(); ++i) {
      const double single = log_unnormalized_density(policy, s, Mat(actions.col(i)))(0);
      if (batch(i) == kNegInf) {
        CHECK(single == kNegInf);
      } else {
        CHECK(single == doctest::Approx(batch(i)).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("composed maps chain Jacobians") {
  const ChainSpec chain({0.5, 0.4}, {{-3, 3}, {-3, 3}});
  Mat A(2, 2);
  A << 2, 0, 1, 1;
  const auto inner = std::make_shared<KinematicMap>(chain, 1);
  const auto outer = std::make_shared<LinearMap>(A);
  const ComposedMap map(inner, outer);
  const LatentState s{Vec2(0.3, 0.8), Vec2(0.1, -0.2)};
  const Mat J = map.action_jacobian(s, Vec::Zero(2));
  CHECK((J - A * jacobian(chain, s.position, 1)).cwiseAbs().maxCoeff() < 1e-12);
}

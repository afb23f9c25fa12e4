#include "cep/sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace cep {

std::vector<std::string> Environment::problems() const {
  std::vector<std::string> out;
  const std::size_t n = chain.num_joints();
  if (name.empty()) out.emplace_back("environment name is empty");
  if (!target.allFinite()) out.emplace_back("target is not finite");
  if (target.norm() > chain.reach()) {
    std::ostringstream msg;
    msg << "target at distance " << target.norm() << " is beyond the chain reach "
        << chain.reach();
    out.push_back(msg.str());
  }
  if (!(target_tolerance > 0.0)) out.emplace_back("target_tolerance must be positive");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto &o = obstacles[i];
    const std::string tag = "obstacles[" + std::to_string(i) + "]";
    if (!(o.radius > 0.0)) out.push_back(tag + ": radius must be positive");
    if (!o.center.allFinite()) out.push_back(tag + ": centre is not finite");
    if ((target - o.center).norm() <= o.radius) out.push_back("target lies inside " + tag);
  }
  if (start_ranges.size() != n) {
    out.push_back("start_ranges needs " + std::to_string(n) + " entries, one per joint");
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const auto &r = start_ranges[j];
      const auto &lim = chain.joint_limits()[j];
      const std::string tag = "start_ranges[" + std::to_string(j) + "]";
      if (!(r.lower <= r.upper)) out.push_back(tag + ": lower exceeds upper");
      if (r.lower < lim.lower || r.upper > lim.upper) {
        out.push_back(tag + ": range leaves the joint limits");
      }
    }
  }
  return out;
}

void Environment::validate() const {
  const auto p = problems();
  if (!p.empty()) throw std::invalid_argument("environment '" + name + "': " + p.front());
}

std::vector<ControlPoint> control_points(const ChainSpec &chain) {
  std::vector<ControlPoint> out;
  for (std::size_t i = 0; i < chain.num_joints(); ++i) {
    out.push_back({i, 0.5});
    out.push_back({i, 1.0});
  }
  return out;
}

double min_clearance(const Environment &env, const Vec &q) {
  double best = std::numeric_limits<double>::infinity();
  if (env.obstacles.empty()) return best;
  for (const auto &cp : control_points(env.chain)) {
    const Vec2 p = forward_kinematics(env.chain, q, cp.link, cp.fraction);
    for (const auto &o : env.obstacles) {
      best = std::min(best, (p - o.center).norm() - o.radius);
    }
  }
  return best;
}

double distance_to_target(const Environment &env, const Vec &q) {
  return (forward_kinematics(env.chain, q, env.chain.num_joints() - 1) - env.target).norm();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// CEP controller

CEPPolicy CEPController::build_policy(const Environment &env, const CEPControllerConfig &config,
                                      std::vector<std::size_t> &hard) {
  const auto &chain = env.chain;
  const std::size_t n = chain.num_joints();
  std::vector<EnergyComponent> comps;

  GoToParams go_to = config.go_to;
  go_to.target = env.target;
  comps.emplace_back("go_to", std::make_shared<KinematicMap>(chain, n - 1),
                     std::make_shared<GoToEnergy>(go_to));

  for (const auto &cp : control_points(chain)) {
    auto map = std::make_shared<KinematicMap>(chain, cp.link, cp.fraction);
    for (std::size_t k = 0; k < env.obstacles.size(); ++k) {
      ObstacleParams p = config.obstacle;
      p.center = env.obstacles[k].center;
      p.radius = env.obstacles[k].radius;
      hard.push_back(comps.size());
      comps.emplace_back("obstacle_" + std::to_string(k) + "_link_" + std::to_string(cp.link) +
                             (cp.fraction < 1.0 ? "_mid" : "_tip"),
                         map, std::make_shared<ObstacleEnergy>(p));
    }
  }

  auto identity = std::make_shared<IdentityMap>();
  if (config.use_joint_limits) {
    JointLimitParams p = config.joint_limits;
    p.limits = chain.joint_limits();
    hard.push_back(comps.size());
    comps.emplace_back("joint_limits", identity, std::make_shared<JointLimitEnergy>(p));
  }
  if (config.damping_gain > 0.0) {
    comps.emplace_back("damping", identity,
                       std::make_shared<DampingEnergy>(config.damping_gain,
                                                       config.damping_variance));
  }
  return CEPPolicy(std::move(comps));
}

CEPController::CEPController(const Environment &env, CEPControllerConfig config)
    : config_(std::move(config)), policy_(build_policy(env, config_, hard_components_)) {
  if (!(config_.max_acceleration > 0.0)) {
    throw std::invalid_argument("CEP controller needs a positive acceleration bound");
  }
  const auto n = static_cast<Eigen::Index>(env.chain.num_joints());
  config_.cem.action_bound = Vec::Constant(n, config_.max_acceleration);
  config_.cem.validate(static_cast<std::size_t>(n));
  previous_ = Vec::Zero(n);
}

void CEPController::reset(std::uint64_t seed) {
  seed_ = seed;
  step_ = 0;
  previous_.setZero();
}

ControlOutput CEPController::act(const JointState &state) {
  CEMConfig cem = config_.cem;
  if (config_.warm_start) cem.init_mean = previous_;
  last_ = optimize(policy_, state, cem, derive_seed(seed_, step_++));
  previous_ = last_.action;
  return {last_.action, !last_.feasible};
}

bool CEPController::violates_constraints(const JointState &state, const Vec &qdd) const {
  const LatentState s = to_latent(state);
  Mat single(qdd.size(), 1);
  single.col(0) = qdd;
  Vec out(1);
  for (std::size_t k : hard_components_) {
    policy_.evaluate_component(k, s, single, out);
    if (out(0) == kNegInf) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// APF controller

APFController::APFController(const Environment &env, APFControllerConfig config)
    : config_(config) {
  const auto &chain = env.chain;
  const std::size_t n = chain.num_joints();
  const Mat unit = Mat::Identity(1, 1);
  components_.push_back({std::make_shared<KinematicMap>(chain, n - 1),
                         pd_attractor(env.target, config_.kp, config_.kv), unit});
  for (const auto &cp : control_points(chain)) {
    auto map = std::make_shared<KinematicMap>(chain, cp.link, cp.fraction);
    for (const auto &o : env.obstacles) {
      components_.push_back({map,
                             obstacle_repulsion(o.center, o.radius, config_.obstacle_gamma,
                                                config_.obstacle_gain),
                             unit});
    }
  }
  auto identity = std::make_shared<IdentityMap>();
  if (config_.joint_limit_gain > 0.0) {
    components_.push_back({identity,
                           joint_limit_repulsion(chain.joint_limits(), config_.joint_limit_gamma,
                                                 config_.joint_limit_gain),
                           unit});
  }
  if (config_.damping_gain > 0.0) {
    components_.push_back({identity, velocity_damping(config_.damping_gain), unit});
  }
}

ControlOutput APFController::act(const JointState &state) {
  Vec qdd = apf_action(components_, state);
  const double a = config_.max_acceleration;
  return {qdd.cwiseMax(-a).cwiseMin(a), false};
}

// ---------------------------------------------------------------------------
// Simulation

Integration integrate(const ChainSpec &chain, const JointState &state, const Vec &qdd,
                      double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  Integration out;
  out.next.qd = state.qd + qdd * dt;
  out.next.q = state.q + out.next.qd * dt;
  const auto &limits = chain.joint_limits();
  for (Eigen::Index j = 0; j < out.next.q.size(); ++j) {
    const auto &lim = limits[static_cast<std::size_t>(j)];
    if (out.next.q(j) > lim.upper) {
      out.next.q(j) = lim.upper;
      out.next.qd(j) = 0.0;
      out.clamped = true;
    } else if (out.next.q(j) < lim.lower) {
      out.next.q(j) = lim.lower;
      out.next.qd(j) = 0.0;
      out.clamped = true;
    }
  }
  return out;
}

StepOutcome step(const Environment &env, Controller &controller, const JointState &state,
                 double dt, double braking_gain) {
  StepOutcome out;
  bool ok = false;
  try {
    ControlOutput c = controller.act(state);
    if (c.qdd.size() == state.q.size() && c.qdd.allFinite()) {
      out.command = std::move(c.qdd);
      out.fallback = c.fallback;
      ok = true;
    }
  } catch (const std::exception &) {
    ok = false;
  }
  if (!ok) {
    out.command = -braking_gain * state.qd;
    out.fallback = true;
  }
  Integration integ = integrate(env.chain, state, out.command, dt);
  out.next = std::move(integ.next);
  out.clamped = integ.clamped;
  return out;
}

Vec sample_start(const Environment &env, std::uint64_t seed, const EpisodeConfig &config) {
  std::mt19937_64 rng(derive_seed(seed, 0x5157));
  const std::size_t n = env.chain.num_joints();
  Vec q(static_cast<Eigen::Index>(n));
  for (int attempt = 0; attempt < 100000; ++attempt) {
    for (std::size_t j = 0; j < n; ++j) {
      std::uniform_real_distribution<double> u(env.start_ranges[j].lower,
                                               env.start_ranges[j].upper);
      q(static_cast<Eigen::Index>(j)) = u(rng);
    }
    if (min_clearance(env, q) >= config.start_clearance &&
        distance_to_target(env, q) >= config.start_min_distance) {
      return q;
    }
  }
  throw std::runtime_error("environment '" + env.name +
                           "': no collision-free start configuration found");
}

EpisodeResult run_episode(const Environment &env, Controller &controller, std::uint64_t seed,
                          const EpisodeConfig &config, std::vector<TrajectoryRecord> *trajectory,
                          std::optional<JointState> start) {
  if (config.max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  EpisodeResult r;
  r.env = env.name;
  r.controller = controller.name();
  r.seed = seed;
  controller.reset(seed);

  JointState state = start ? *start : JointState::at_rest(sample_start(env, seed, config));
  check_state(env.chain, state);
  const std::size_t n = env.chain.num_joints();
  std::size_t hold = 0;
  double wall = 0.0;
  std::size_t calls = 0;

  for (std::size_t k = 0;; ++k) {
    const double clearance = min_clearance(env, state.q);
    const double dist = distance_to_target(env, state.q);
    r.final_distance = dist;
    if (clearance <= 0.0) {
      r.collided = true;
    }
    hold = dist <= env.target_tolerance ? hold + 1 : 0;
    if (!r.collided && hold >= config.hold_steps) r.success = true;
    const bool done = r.collided || r.success || k >= config.max_steps;

    StepOutcome out;
    if (!done) {
      const auto t0 = std::chrono::steady_clock::now();
      out = step(env, controller, state, config.dt);
      const auto t1 = std::chrono::steady_clock::now();
      wall += std::chrono::duration<double>(t1 - t0).count();
      ++calls;
      if (out.clamped) ++r.clamp_events;
      if (out.fallback) ++r.fallback_events;
      if (controller.violates_constraints(state, out.command)) ++r.constraint_violations;
    }
    if (trajectory) {
      trajectory->push_back({static_cast<double>(k) * config.dt, state.q, state.qd,
                             done ? Vec(Vec::Zero(static_cast<Eigen::Index>(n))) : out.command,
                             forward_kinematics(env.chain, state.q, n - 1), clearance});
    }
    if (done) {
      r.steps = k;
      break;
    }
    state = std::move(out.next);
  }
  r.mean_step_wallclock = calls ? wall / static_cast<double>(calls) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Benchmark

double BenchmarkRow::success_rate() const {
  return episodes ? static_cast<double>(successes) / static_cast<double>(episodes) : 0.0;
}

std::vector<BenchmarkRow> aggregate(const std::vector<EpisodeResult> &episodes) {
  std::vector<BenchmarkRow> rows;
  for (const auto &e : episodes) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const BenchmarkRow &r) {
      return r.env == e.env && r.controller == e.controller;
    });
    if (it == rows.end()) {
      rows.push_back({e.env, e.controller});
      it = rows.end() - 1;
    }
    it->mean_step_wallclock += e.mean_step_wallclock;
    ++it->episodes;
    it->successes += e.success ? 1 : 0;
    it->collisions += e.collided ? 1 : 0;
    it->constraint_violations += e.constraint_violations;
  }
  for (auto &r : rows) {
    if (r.episodes) r.mean_step_wallclock /= static_cast<double>(r.episodes);
  }
  return rows;
}

BenchmarkResult run_benchmark(const std::vector<Environment> &envs,
                              const std::vector<ControllerFactory> &controllers,
                              const std::vector<std::uint64_t> &seeds,
                              const EpisodeConfig &config, std::size_t threads,
                              const std::function<void(const EpisodeResult &)> &on_episode) {
  if (seeds.empty()) throw std::invalid_argument("benchmark needs at least one seed");
  for (const auto &env : envs) env.validate();
  const std::size_t per_env = controllers.size() * seeds.size();
  const std::size_t total = envs.size() * per_env;
  BenchmarkResult result;
  result.episodes.resize(total);

  std::atomic<std::size_t> next{0};
  std::mutex sink;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= total) return;
      const std::size_t e = job / per_env;
      const std::size_t c = (job % per_env) / seeds.size();
      const std::size_t s = job % seeds.size();
      try {
        auto ctrl = controllers[c](envs[e]);
        result.episodes[job] = run_episode(envs[e], *ctrl, seeds[s], config);
        if (on_episode) {
          std::lock_guard<std::mutex> lock(sink);
          on_episode(result.episodes[job]);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(sink);
        if (!failure) failure = std::current_exception();
        next = total;
        return;
      }
    }
  };
  threads = std::max<std::size_t>(1, threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  result.table = aggregate(result.episodes);
  return result;
}

// ---------------------------------------------------------------------------
// Records

std::string to_json_line(const EpisodeResult &r) {
  nlohmann::ordered_json j;
  j["env"] = r.env;
  j["controller"] = r.controller;
  j["seed"] = r.seed;
  j["success"] = r.success;
  j["collided"] = r.collided;
  j["steps"] = r.steps;
  j["final_distance"] = r.final_distance;
  j["clamp_events"] = r.clamp_events;
  j["fallback_events"] = r.fallback_events;
  j["constraint_violations"] = r.constraint_violations;
  j["mean_step_wallclock"] = r.mean_step_wallclock;
  return j.dump();
}

EpisodeResult episode_from_json_line(const std::string &line) {
  const auto j = nlohmann::json::parse(line);
  EpisodeResult r;
  r.env = j.at("env").get<std::string>();
  r.controller = j.at("controller").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.success = j.at("success").get<bool>();
  r.collided = j.at("collided").get<bool>();
  r.steps = j.at("steps").get<std::size_t>();
  r.final_distance = j.at("final_distance").get<double>();
  r.clamp_events = j.value("clamp_events", std::size_t{0});
  r.fallback_events = j.value("fallback_events", std::size_t{0});
  r.constraint_violations = j.value("constraint_violations", std::size_t{0});
  r.mean_step_wallclock = j.at("mean_step_wallclock").get<double>();
  return r;
}

void write_episodes(std::ostream &os, const std::vector<EpisodeResult> &episodes) {
  for (const auto &e : episodes) os << to_json_line(e) << '\n';
}

std::vector<EpisodeResult> read_episodes(std::istream &is) {
  std::vector<EpisodeResult> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(episode_from_json_line(line));
  }
  return out;
}

void write_summary(std::ostream &os, const std::vector<BenchmarkRow> &rows) {
  os << "env\tcontroller\tepisodes\tsuccess\tcollide\tsuccess_rate\tconstraint_violations"
        "\tmean_step_ms\n";
  for (const auto &r : rows) {
    os << r.env << '\t' << r.controller << '\t' << r.episodes << '\t' << r.successes << '\t'
       << r.collisions << '\t' << std::setprecision(6) << r.success_rate() << '\t'
       << r.constraint_violations << '\t' << r.mean_step_wallclock * 1e3 << '\n';
  }
}

std::vector<BenchmarkRow> read_summary(std::istream &is) {
  std::vector<BenchmarkRow> rows;
  std::string line;
  if (!std::getline(is, line)) return rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    BenchmarkRow r;
    double rate = 0.0;
    double ms = 0.0;
    std::getline(ls, r.env, '\t');
    std::getline(ls, r.controller, '\t');
    ls >> r.episodes >> r.successes >> r.collisions >> rate >> r.constraint_violations >> ms;
    if (!ls) throw std::runtime_error("malformed summary row: " + line);
    r.mean_step_wallclock = ms / 1e3;
    rows.push_back(r);
  }
  return rows;
}

void write_trajectory(std::ostream &os, const std::vector<TrajectoryRecord> &trajectory) {
  if (trajectory.empty()) return;
  const Eigen::Index n = trajectory.front().q.size();
  os << "t";
  for (const char *tag : {"q", "qd", "qdd"})
    for (Eigen::Index j = 0; j < n; ++j) os << '\t' << tag << j;
  os << "\tx\ty\tclearance\n";
  os << std::setprecision(9);
  for (const auto &r : trajectory) {
    os << r.t;
    for (const Vec *v : {&r.q, &r.qd, &r.qdd})
      for (Eigen::Index j = 0; j < n; ++j) os << '\t' << (*v)(j);
    os << '\t' << r.x.x() << '\t' << r.x.y() << '\t' << r.clearance << '\n';
  }
}

} // namespace cep

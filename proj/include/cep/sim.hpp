/**
 * @file sim.hpp
 * @brief Planar second-order simulator, obstacle-course environments and the
 *        CEP vs potential-field benchmark harness.
 */

#ifndef CEP_SIM_HPP_
#define CEP_SIM_HPP_

#include "cep/baselines.hpp"
#include "cep/cem.hpp"
#include "cep/energies.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cep {

struct Obstacle {
  Vec2 center;
  double radius;
};

struct Environment {
  std::string name;
  ChainSpec chain;
  std::vector<Obstacle> obstacles;
  Vec2 target;
  double target_tolerance = 0.05;
  /// Per-joint uniform range of the initial configuration.
  std::vector<JointLimit> start_ranges;

  /// Human-readable invariant violations; empty when the environment is valid.
  std::vector<std::string> problems() const;
  void validate() const;
};

/// A point of the chain used for collision checks and obstacle energies.
struct ControlPoint {
  std::size_t link;
  double fraction;
};

/// Every link tip and midpoint, ordered by link.
std::vector<ControlPoint> control_points(const ChainSpec &chain);

/// min over control points and obstacles of |p - c| - r. +inf without obstacles.
double min_clearance(const Environment &env, const Vec &q);

double distance_to_target(const Environment &env, const Vec &q);

struct ControlOutput {
  Vec qdd;
  /// The controller could not produce its nominal action and braked instead.
  bool fallback = false;
};

class Controller {
public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Called at the start of every episode.
  virtual void reset(std::uint64_t seed) = 0;
  virtual ControlOutput act(const JointState &state) = 0;
  /// True when the executed action breaks one of the controller's own hard
  /// constraints at `state`. Controllers without hard constraints return false.
  virtual bool violates_constraints(const JointState &, const Vec &) const { return false; }
};

using ControllerFactory = std::function<std::unique_ptr<Controller>(const Environment &)>;

struct CEPControllerConfig {
  GoToParams go_to;              ///< target is taken from the environment
  ObstacleParams obstacle;       ///< centre and radius are taken from each obstacle
  JointLimitParams joint_limits; ///< limits are taken from the chain
  bool use_joint_limits = true;
  /// Weak joint-space damping expert; gain 0 disables it.
  double damping_gain = 1.0;
  double damping_variance = 100.0;
  CEMConfig cem;
  /// |q̈| bound per joint (rad/s²).
  double max_acceleration = 20.0;
  /// Start each CEM call from the previous action.
  bool warm_start = true;
};

/// Composed energy policy on a planar chain: Go-To on the end effector, one
/// obstacle barrier per (control point, obstacle) pair, joint-limit barrier
/// and optional damping. Actions come from the cross-entropy optimizer.
class CEPController final : public Controller {
public:
  CEPController(const Environment &env, CEPControllerConfig config);

  std::string name() const override { return "CEP"; }
  void reset(std::uint64_t seed) override;
  ControlOutput act(const JointState &state) override;
  bool violates_constraints(const JointState &state, const Vec &qdd) const override;

  const CEPPolicy &policy() const { return policy_; }
  const CEMResult &last_result() const { return last_; }

private:
  static CEPPolicy build_policy(const Environment &env, const CEPControllerConfig &config,
                                std::vector<std::size_t> &hard);

  CEPControllerConfig config_;
  std::vector<std::size_t> hard_components_;
  CEPPolicy policy_;
  Vec previous_;
  std::uint64_t seed_ = 0;
  std::uint64_t step_ = 0;
  CEMResult last_;
};

struct APFControllerConfig {
  double kp = 20.0;
  double kv = 30.0;
  double obstacle_gamma = 0.2;
  double obstacle_gain = 0.05;
  double joint_limit_gamma = 0.3;
  double joint_limit_gain = 0.05;
  double damping_gain = 1.0;
  double max_acceleration = 20.0;
};

/// Potential-field baseline: Σ_k J_k⁺ g_k with unit weights, clipped to the
/// acceleration bound.
class APFController final : public Controller {
public:
  APFController(const Environment &env, APFControllerConfig config);

  std::string name() const override { return "APF"; }
  void reset(std::uint64_t) override {}
  ControlOutput act(const JointState &state) override;

private:
  APFControllerConfig config_;
  std::vector<APFComponent> components_;
};

/// Semi-implicit Euler: q̇ += q̈ dt, q += q̇ dt, then joints past a limit are
/// clamped to it with their velocity zeroed.
struct Integration {
  JointState next;
  bool clamped = false;
};
Integration integrate(const ChainSpec &chain, const JointState &state, const Vec &qdd, double dt);

struct StepOutcome {
  JointState next;
  Vec command;
  bool clamped = false;
  bool fallback = false;
};

/// Queries the controller and integrates. A controller that throws or returns
/// a non-finite or wrongly sized action is replaced by braking q̈ = -k q̇.
StepOutcome step(const Environment &env, Controller &controller, const JointState &state,
                 double dt, double braking_gain = 10.0);

struct EpisodeConfig {
  double dt = 0.002;
  std::size_t max_steps = 5000;
  std::size_t hold_steps = 50;
  /// Minimum clearance of a sampled initial configuration.
  double start_clearance = 0.05;
  /// Initial configurations closer than this to the target are resampled.
  double start_min_distance = 0.2;
  bool record_trajectory = false;
};

struct TrajectoryRecord {
  double t;
  Vec q;
  Vec qd;
  Vec qdd;
  Vec2 x;
  double clearance;
};

struct EpisodeResult {
  std::string env;
  std::string controller;
  std::uint64_t seed = 0;
  bool success = false;
  bool collided = false;
  std::size_t steps = 0;
  double final_distance = 0.0;
  /// Mean wall-clock seconds per controller call. Not deterministic.
  double mean_step_wallclock = 0.0;
  std::size_t clamp_events = 0;
  std::size_t fallback_events = 0;
  std::size_t constraint_violations = 0;
};

/// Initial configuration for `seed`: uniform in the start ranges, resampled
/// until collision-free and away from the target.
Vec sample_start(const Environment &env, std::uint64_t seed, const EpisodeConfig &config);

EpisodeResult run_episode(const Environment &env, Controller &controller, std::uint64_t seed,
                          const EpisodeConfig &config,
                          std::vector<TrajectoryRecord> *trajectory = nullptr,
                          std::optional<JointState> start = std::nullopt);

struct BenchmarkRow {
  std::string env;
  std::string controller;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  std::size_t collisions = 0;
  std::size_t constraint_violations = 0;
  double mean_step_wallclock = 0.0;

  double success_rate() const;
};

struct BenchmarkResult {
  /// Ordered by environment, then controller, then seed.
  std::vector<EpisodeResult> episodes;
  std::vector<BenchmarkRow> table;
};

/// Every (environment, controller, seed) episode, fanned out over `threads`
/// workers. Output order does not depend on the thread count.
BenchmarkResult run_benchmark(const std::vector<Environment> &envs,
                              const std::vector<ControllerFactory> &controllers,
                              const std::vector<std::uint64_t> &seeds,
                              const EpisodeConfig &config, std::size_t threads = 1,
                              const std::function<void(const EpisodeResult &)> &on_episode = {});

std::vector<BenchmarkRow> aggregate(const std::vector<EpisodeResult> &episodes);

/// One JSON object per line. Wall-clock fields are written last.
std::string to_json_line(const EpisodeResult &r);
EpisodeResult episode_from_json_line(const std::string &line);
void write_episodes(std::ostream &os, const std::vector<EpisodeResult> &episodes);
std::vector<EpisodeResult> read_episodes(std::istream &is);

/// Tab-separated summary with a header row.
void write_summary(std::ostream &os, const std::vector<BenchmarkRow> &rows);
std::vector<BenchmarkRow> read_summary(std::istream &is);

/// Tab-separated columns t, q_i, qd_i, qdd_i, x, y, clearance.
void write_trajectory(std::ostream &os, const std::vector<TrajectoryRecord> &trajectory);

/// splitmix64 of (seed, stream): independent deterministic seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace cep

#endif // CEP_SIM_HPP_

#include "cep/run.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

namespace cep {

namespace fs = std::filesystem;

std::string config_hash(const Json &config) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config.dump());
  return os.str();
}

ControllerFactory make_controller_factory(const std::string &name, const RunConfig &config) {
  if (name == "CEP") {
    const CEPControllerConfig c = config.cep;
    return [c](const Environment &env) -> std::unique_ptr<Controller> {
      return std::make_unique<CEPController>(env, c);
    };
  }
  if (name == "APF") {
    const APFControllerConfig c = config.apf;
    return [c](const Environment &env) -> std::unique_ptr<Controller> {
      return std::make_unique<APFController>(env, c);
    };
  }
  throw std::invalid_argument("unknown controller '" + name + "'");
}

namespace {

/// Collects output file names and writes the manifest last.
class Outputs {
public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  std::ofstream open(const std::string &name) {
    files_.push_back(name);
    std::ofstream os(dir_ / name);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    os << std::setprecision(17);
    return os;
  }

  const std::vector<std::string> &files() const { return files_; }
  const fs::path &dir() const { return dir_; }

private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::string seed_name(std::uint64_t seed) { return std::to_string(seed); }

int run_benchmark_mode(const RunConfig &config, Outputs &out, int verbosity, std::ostream &log) {
  std::vector<Environment> envs;
  for (const auto &p : config.environments) envs.push_back(load_environment(p));
  std::vector<ControllerFactory> factories;
  for (const auto &name : config.controllers) {
    factories.push_back(make_controller_factory(name, config));
  }

  std::vector<EpisodeResult> done;
  auto on_episode = [&](const EpisodeResult &r) {
    done.push_back(r);
    if (verbosity > 0) {
      log << r.env << " " << r.controller << " seed " << r.seed
          << (r.success ? " success" : r.collided ? " collision" : " timeout") << " steps "
          << r.steps << "\n";
    }
  };
  // Order partial results exactly like a complete benchmark.
  auto rank = [&](const EpisodeResult &r) {
    std::size_t e = 0, c = 0, s = 0;
    for (std::size_t i = 0; i < envs.size(); ++i)
      if (envs[i].name == r.env) e = i;
    for (std::size_t i = 0; i < config.controllers.size(); ++i)
      if (config.controllers[i] == r.controller) c = i;
    for (std::size_t i = 0; i < config.seeds.size(); ++i)
      if (config.seeds[i] == r.seed) s = i;
    return std::make_tuple(e, c, s);
  };
  auto write = [&](std::vector<EpisodeResult> episodes) {
    std::sort(episodes.begin(), episodes.end(),
              [&](const auto &a, const auto &b) { return rank(a) < rank(b); });
    auto os = out.open("episodes.jsonl");
    write_episodes(os, episodes);
    auto summary = out.open("summary.tsv");
    write_summary(summary, aggregate(episodes));
  };

  try {
    const BenchmarkResult result = run_benchmark(envs, factories, config.seeds, config.episode,
                                                 config.threads, on_episode);
    write(result.episodes);
    for (const auto &row : result.table) {
      log << row.env << "\t" << row.controller << "\tsuccess " << row.successes << "/"
          << row.episodes << "\tcollisions " << row.collisions << "\tmean step "
          << 1e3 * row.mean_step_wallclock << " ms\n";
    }
  } catch (...) {
    write(done);
    throw;
  }
  return kExitOk;
}

int run_episode_mode(const RunConfig &config, Outputs &out, int verbosity, std::ostream &log) {
  std::vector<EpisodeResult> episodes;
  try {
    for (const auto &p : config.environments) {
      const Environment env = load_environment(p);
      for (const auto &name : config.controllers) {
        const auto factory = make_controller_factory(name, config);
        for (std::uint64_t seed : config.seeds) {
          auto ctrl = factory(env);
          std::vector<TrajectoryRecord> trajectory;
          episodes.push_back(run_episode(env, *ctrl, seed, config.episode, &trajectory));
          auto os = out.open("trajectory_" + env.name + "_" + name + "_" + seed_name(seed) +
                             ".tsv");
          write_trajectory(os, trajectory);
          if (verbosity > 0) log << to_json_line(episodes.back()) << "\n";
        }
      }
    }
  } catch (...) {
    auto os = out.open("episodes.jsonl");
    write_episodes(os, episodes);
    throw;
  }
  auto os = out.open("episodes.jsonl");
  write_episodes(os, episodes);
  return kExitOk;
}

int run_softq_mode(const RunConfig &config, Outputs &out, int, std::ostream &log) {
  std::vector<std::pair<std::string, TabularMDP>> mdps;
  for (const auto &p : config.mdps) mdps.emplace_back(p.stem().string(), load_mdp(p));
  const auto &rc = config.random_mdps;
  for (std::size_t i = 0; i < rc.count; ++i) {
    const std::uint64_t seed = derive_seed(config.seeds.front(), i);
    mdps.emplace_back("random_" + std::to_string(i),
                      random_mdp_up_to(rc.max_states, rc.max_actions, rc.max_horizon, seed,
                                       rc.reward_scale));
  }

  auto table = out.open("delta_q.tsv");
  table << "mdp\tt\tstate\taction\tdelta_q\tdelta_q_recurrence\n";
  auto summary = out.open("softq_summary.tsv");
  summary << "mdp\tt\tremaining\tmin_delta_q\tmax_delta_q\n";
  auto checks = out.open("softq_checks.tsv");
  checks << "mdp\tn_states\tn_actions\thorizon\tterminal_zero\tmax_entry\tmin_monotone\t"
            "recurrence_residual\n";

  bool all_ok = true;
  for (const auto &[name, mdp] : mdps) {
    const DeltaQ dq = delta_q(mdp, config.softq_weight);
    const std::size_t T = mdp.horizon;
    for (std::size_t t = 0; t <= T; ++t) {
      for (Eigen::Index s = 0; s < dq.direct[t].rows(); ++s) {
        for (Eigen::Index a = 0; a < dq.direct[t].cols(); ++a) {
          table << name << "\t" << t << "\t" << s << "\t" << a << "\t" << dq.direct[t](s, a)
                << "\t" << dq.recurrence[t](s, a) << "\n";
        }
      }
    }
    const auto rows = summarize(dq);
    double max_entry = -std::numeric_limits<double>::infinity();
    for (const auto &r : rows) {
      summary << name << "\t" << r.t << "\t" << r.remaining << "\t" << r.min_delta << "\t"
              << r.max_delta << "\n";
      max_entry = std::max(max_entry, r.max_delta);
    }
    // rows run t = 0..T, i.e. remaining horizon T..0.
    bool monotone = true;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      if (rows[k - 1].min_delta > rows[k].min_delta + 1e-12) monotone = false;
    }
    const bool terminal_zero = (dq.direct[T].array() == 0.0).all();
    double residual = 0.0;
    for (std::size_t t = 0; t <= T; ++t) {
      residual = std::max(residual, (dq.direct[t] - dq.recurrence[t]).cwiseAbs().maxCoeff());
    }
    checks << name << "\t" << mdp.n_states << "\t" << mdp.n_actions << "\t" << T << "\t"
           << (terminal_zero ? 1 : 0) << "\t" << max_entry << "\t" << (monotone ? 1 : 0) << "\t"
           << residual << "\n";
    const bool sign_ok = max_entry <= 1e-12;
    if (!terminal_zero || !sign_ok || residual >= 1e-8) all_ok = false;
    if (!monotone) log << name << ": min ΔQ is not monotone in the remaining horizon\n";
    if (!sign_ok) log << name << ": positive ΔQ entry " << max_entry << "\n";
  }
  log << mdps.size() << " MDPs analysed\n";
  return all_ok ? kExitOk : kExitCheckFailed;
}

int run_equivalence_mode(const RunConfig &config, Outputs &out, int, std::ostream &log) {
  const auto &e = config.equivalence;
  std::mt19937_64 rng(config.seeds.front());
  std::uniform_int_distribution<std::size_t> dims(e.min_dim, e.max_dim);
  std::uniform_int_distribution<std::size_t> comps(e.min_components, e.max_components);
  auto os = out.open("equivalence.tsv");
  os << "trial\tdim\tcomponents\tdiscrepancy\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < e.trials; ++i) {
    const std::size_t d = dims(rng);
    const std::size_t k = comps(rng);
    const auto problem = random_equivalence_problem(d, k, derive_seed(config.seeds.front(), i));
    const APFEquivalence r = apf_cep_equivalence(problem.components, problem.state);
    os << i << "\t" << d << "\t" << k << "\t" << r.discrepancy << "\n";
    worst = std::max(worst, r.discrepancy);
  }
  auto summary = out.open("equivalence_summary.tsv");
  summary << "trials\tmax_discrepancy\n" << e.trials << "\t" << worst << "\n";
  log << "max discrepancy " << worst << " over " << e.trials << " trials\n";
  return worst < 1e-8 ? kExitOk : kExitCheckFailed;
}

PriorPolicy make_prior(const HRLRunConfig &c) {
  switch (c.prior) {
  case PriorKind::Uniform: return PriorPolicy::uniform();
  case PriorKind::Table: return table_constraint_prior(c.env);
  case PriorKind::Pushing: return pushing_prior(c.env, c.prior_variance);
  }
  return PriorPolicy::uniform();
}

std::string hrl_record(const std::string &source, std::uint64_t seed, const ToyEpisodeResult &r,
                       std::size_t steps) {
  nlohmann::ordered_json j;
  j["env"] = "puck";
  j["controller"] = source;
  j["seed"] = seed;
  j["return"] = r.total_return;
  j["collisions"] = r.collisions;
  j["prior_violations"] = r.prior_violations;
  j["infeasible_steps"] = r.infeasible_steps;
  j["final_puck_x"] = r.final_puck_x;
  j["steps"] = steps;
  return j.dump();
}

int run_hrl_mode(const RunConfig &config, Outputs &out, int verbosity, std::ostream &log) {
  const HRLRunConfig &c = config.hrl;
  const PriorPolicy prior = make_prior(c);
  HighLevelSource source;
  std::string label;
  switch (c.mode) {
  case HighLevelMode::Fixed:
    label = "fixed";
    source = [&c](const PuckState &) -> std::optional<HighLevelAction> {
      return HighLevelAction{c.fixed_mean, c.fixed_cov};
    };
    break;
  case HighLevelMode::Scripted:
    label = "scripted";
    source = [&c](const PuckState &s) -> std::optional<HighLevelAction> {
      return HighLevelAction{Vec(pushing_velocity(c.env, s)), c.scripted_cov};
    };
    break;
  case HighLevelMode::Search: {
    const PolicySearchResult search =
        search_high_level(c.env, prior, c.search, config.seeds.front());
    auto os = out.open("search.tsv");
    os << "generation\telite_mean_return\n";
    os << "initial\t" << search.initial_return << "\n";
    for (std::size_t g = 0; g < search.elite_returns.size(); ++g) {
      os << g << "\t" << search.elite_returns[g] << "\n";
    }
    nlohmann::ordered_json policy;
    const char *mode = c.search.covariance == CovarianceMode::Fixed      ? "fixed"
                       : c.search.covariance == CovarianceMode::Constant ? "constant"
                                                                         : "state_linear";
    policy["covariance"] = mode;
    policy["parameters"] = std::vector<double>(search.best.parameters().data(),
                                               search.best.parameters().data() +
                                                   search.best.parameters().size());
    policy["initial_return"] = search.initial_return;
    policy["best_return"] = search.best_return;
    auto ps = out.open("policy.json");
    ps << policy.dump(2) << "\n";
    log << "search: initial return " << search.initial_return << ", best "
        << search.best_return << " (" << mode << " covariance)\n";
    label = std::string("search/") + mode;
    const LinearHighLevel best = search.best;
    source = [best, &c](const PuckState &s) -> std::optional<HighLevelAction> {
      return best(c.env, s);
    };
    break;
  }
  }

  std::vector<std::string> records;
  std::size_t violations = 0;
  auto write = [&] {
    auto os = out.open("hrl_episodes.jsonl");
    for (const auto &r : records) os << r << "\n";
  };
  try {
    for (std::uint64_t seed : config.seeds) {
      const ToyEpisodeResult r = toy_episode(c.env, source, prior, c.cem, seed);
      violations += r.prior_violations;
      records.push_back(hrl_record(label, seed, r, r.actions.size()));
      if (verbosity > 0) log << records.back() << "\n";
    }
  } catch (...) {
    write();
    throw;
  }
  write();
  log << records.size() << " episodes, " << violations << " prior violations\n";
  return kExitOk;
}

void write_manifest(const RunConfig &config, Outputs &out, const std::string &label,
                    const std::string &status, const std::string &error, double seconds) {
  nlohmann::ordered_json m;
  m["version"] = kVersion;
  m["mode"] = to_string(config.mode);
  m["config"] = label;
  m["config_hash"] = config_hash(config.source);
  m["seeds"] = config.seeds;
  m["threads"] = config.threads;
  m["status"] = status;
  if (!error.empty()) m["error"] = error;
  m["outputs"] = out.files();
  m["wall_clock_seconds"] = seconds;
  std::ofstream os(out.dir() / "manifest.json");
  os << m.dump(2) << "\n";
}

} // namespace

int run(const RunConfig &config, const fs::path &out_dir, int verbosity, std::ostream &log,
        const std::string &config_label) {
  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    log << "error: cannot create output directory " << out_dir << ": " << ec.message() << "\n";
    return kExitRuntimeError;
  }
  Outputs out(out_dir);
  int code = kExitOk;
  std::string error;
  try {
    switch (config.mode) {
    case RunMode::Benchmark: code = run_benchmark_mode(config, out, verbosity, log); break;
    case RunMode::Episode: code = run_episode_mode(config, out, verbosity, log); break;
    case RunMode::SoftQ: code = run_softq_mode(config, out, verbosity, log); break;
    case RunMode::HRL: code = run_hrl_mode(config, out, verbosity, log); break;
    case RunMode::Equivalence: code = run_equivalence_mode(config, out, verbosity, log); break;
    }
  } catch (const std::exception &e) {
    error = e.what();
    code = kExitRuntimeError;
    log << "error: " << error << "\n";
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string status = code == kExitOk              ? "ok"
                             : code == kExitCheckFailed   ? "check_failed"
                                                          : "failed";
  write_manifest(config, out, config_label, status, error, seconds);
  return code;
}

int run(const RunOptions &options, std::ostream &log) {
  RunConfig config;
  try {
    config = load_run_config(options.config_path);
  } catch (const ConfigError &e) {
    for (const auto &d : e.diagnostics()) log << "config error: " << d.to_string() << "\n";
    return kExitConfigError;
  }
  if (options.mode) config.mode = *options.mode;
  if (options.seeds) {
    if (options.seeds->empty()) {
      log << "config error: seed list is empty\n";
      return kExitConfigError;
    }
    config.seeds = *options.seeds;
  }
  if (options.threads) config.threads = std::max<std::size_t>(1, *options.threads);
  if (options.mode || options.seeds) {
    // Re-check mode-dependent requirements after overrides.
    Json j = config.source;
    j["mode"] = to_string(config.mode);
    Json seeds = Json::array();
    for (auto s : config.seeds) seeds.push_back(s);
    j["seeds"] = seeds;
    auto diags = check_run(j, config.base_dir);
    if (!diags.empty()) {
      for (const auto &d : diags) log << "config error: " << d.to_string() << "\n";
      return kExitConfigError;
    }
    config.source = j;
  }
  return run(config, options.out_dir, options.verbosity, log, options.config_path.string());
}

int validate(const fs::path &path, std::ostream &out) {
  const auto diags = validate_file(path);
  for (const auto &d : diags) out << d.to_string() << "\n";
  if (diags.empty()) {
    out << path.string() << ": ok\n";
    return kExitOk;
  }
  return kExitConfigError;
}

} // namespace cep

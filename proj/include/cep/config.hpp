/**
 * @file config.hpp
 * @brief JSON config files: environments, tabular MDPs and run descriptions.
 *
 * Every file is a JSON object with a "kind" field: "environment", "mdp" or
 * "run". The schema is documented in docs/config.md.
 */

#ifndef CEP_CONFIG_HPP_
#define CEP_CONFIG_HPP_

#include "cep/hrl.hpp"
#include "cep/sim.hpp"
#include "cep/soft_q.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cep {

using Json = nlohmann::json;

/// One problem found in a config file. `path` is a JSON pointer into the
/// document ("" for the whole file); `line` is set for syntax errors.
struct Diagnostic {
  std::string file;
  std::string path;
  std::string message;
  std::optional<std::size_t> line;

  std::string to_string() const;
};

/// Malformed or invalid config. what() is the first diagnostic, formatted.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic> &diagnostics() const { return diagnostics_; }

private:
  std::vector<Diagnostic> diagnostics_;
};

/// Reads and parses a JSON file. Syntax errors carry line and column.
Json read_json_file(const std::filesystem::path &path);

std::vector<Diagnostic> check_environment(const Json &j);
std::vector<Diagnostic> check_mdp(const Json &j);

Environment environment_from_json(const Json &j);
Json environment_to_json(const Environment &env);
Environment load_environment(const std::filesystem::path &path);

TabularMDP mdp_from_json(const Json &j);
Json mdp_to_json(const TabularMDP &mdp, const std::string &name = "");
TabularMDP load_mdp(const std::filesystem::path &path);

enum class RunMode { Benchmark, Episode, SoftQ, HRL, Equivalence };

std::string to_string(RunMode mode);
std::optional<RunMode> parse_run_mode(const std::string &s);

struct EquivalenceRunConfig {
  std::size_t trials = 50;
  std::size_t min_dim = 1;
  std::size_t max_dim = 4;
  std::size_t min_components = 1;
  std::size_t max_components = 4;
};

/// Random MDP suite run in addition to the listed MDP files.
struct RandomMDPConfig {
  std::size_t count = 0;
  std::size_t max_states = 5;
  std::size_t max_actions = 3;
  std::size_t max_horizon = 5;
  double reward_scale = 1.0;
};

enum class PriorKind { Uniform, Table, Pushing };
enum class HighLevelMode { Fixed, Scripted, Search };

struct HRLRunConfig {
  PuckEnv env;
  PriorKind prior = PriorKind::Table;
  double prior_variance = 0.05;
  HighLevelMode mode = HighLevelMode::Scripted;
  /// Fixed mode: constant (μ_H, Σ_H).
  Vec fixed_mean = Vec::Zero(2);
  Vec fixed_cov = Vec::Constant(2, 0.1);
  /// Scripted mode: μ_H is the scripted pushing velocity with this Σ_H.
  Vec scripted_cov = Vec::Constant(2, 0.1);
  PolicySearchConfig search;
  CEMConfig cem;
};

struct RunConfig {
  RunMode mode = RunMode::Benchmark;
  /// Directory of the run file; relative paths are resolved against it.
  std::filesystem::path base_dir;
  std::vector<std::filesystem::path> environments;
  std::vector<std::string> controllers{"CEP", "APF"};
  CEPControllerConfig cep;
  APFControllerConfig apf;
  EpisodeConfig episode;
  std::vector<std::uint64_t> seeds;
  std::size_t threads = 1;
  std::vector<std::filesystem::path> mdps;
  RandomMDPConfig random_mdps;
  double softq_weight = 0.5;
  EquivalenceRunConfig equivalence;
  HRLRunConfig hrl;
  /// The parsed document, kept for the manifest hash.
  Json source;
};

/// Schema and invariant checks for a run file, including the files it
/// references. Never throws.
std::vector<Diagnostic> check_run(const Json &j, const std::filesystem::path &base_dir);

RunConfig run_config_from_json(const Json &j, const std::filesystem::path &base_dir);
RunConfig load_run_config(const std::filesystem::path &path);

/// Dispatches on "kind" and reports every problem found. Never throws.
std::vector<Diagnostic> validate_file(const std::filesystem::path &path);

/// "0-9", "3", "1,4,7" or "0-4,10" to a seed list.
std::vector<std::uint64_t> parse_seed_list(const std::string &text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string &bytes);

} // namespace cep

#endif // CEP_CONFIG_HPP_

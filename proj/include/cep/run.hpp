/**
 * @file run.hpp
 * @brief Experiment orchestration behind the command-line tool: dispatches a
 *        run config to its module and writes result files plus a manifest.
 */

#ifndef CEP_RUN_HPP_
#define CEP_RUN_HPP_

#include "cep/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cep {

inline constexpr const char *kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  /// The run finished but a checked property failed (e.g. ΔQ > 0).
  kExitCheckFailed = 1,
  /// Malformed or invalid config; no output files are written.
  kExitConfigError = 2,
  /// A module failed while running; results written so far are kept.
  kExitRuntimeError = 3,
};

struct RunOptions {
  std::filesystem::path config_path;
  std::filesystem::path out_dir = "out";
  std::optional<RunMode> mode;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::size_t> threads;
  int verbosity = 0;
};

/// Loads the config, applies overrides, runs and writes outputs. Messages go
/// to `log`.
int run(const RunOptions &options, std::ostream &log);

/// Runs an already loaded config into `out_dir`.
int run(const RunConfig &config, const std::filesystem::path &out_dir, int verbosity,
        std::ostream &log, const std::string &config_label = "");

/// Prints diagnostics for one file; returns kExitOk when there are none, else
/// kExitConfigError.
int validate(const std::filesystem::path &path, std::ostream &out);

/// Controller factory from the controller name ("CEP" or "APF").
ControllerFactory make_controller_factory(const std::string &name, const RunConfig &config);

/// Hex FNV-1a of the canonical dump of the config document.
std::string config_hash(const Json &config);

} // namespace cep

#endif // CEP_RUN_HPP_

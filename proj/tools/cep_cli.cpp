#include "cep/run.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv) {
  CLI::App app{"Composable energy policies: reactive control benchmarks and analyses"};
  app.require_subcommand(1);

  cep::RunOptions options;
  std::string mode;
  std::string seeds;
  std::size_t threads = 0;
  auto *run = app.add_subcommand("run", "Run the experiment described by a run config");
  run->add_option("-c,--config", options.config_path, "Run config file (kind: run)")->required();
  run->add_option("-m,--mode", mode, "Override the mode")
      ->check(CLI::IsMember({"benchmark", "episode", "softq", "hrl", "equivalence"}));
  run->add_option("-s,--seeds", seeds, "Override the seeds, e.g. 0-99 or 1,5,9");
  run->add_option("-o,--out", options.out_dir, "Output directory")->capture_default_str();
  run->add_option("-j,--threads", threads, "Worker threads for benchmark episodes");
  auto *verbose = run->add_flag("-v,--verbose", "Print one line per episode");

  std::vector<std::string> files;
  auto *validate = app.add_subcommand("validate", "Check config files without running them");
  validate->add_option("files", files, "Config files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    if (!mode.empty()) options.mode = cep::parse_run_mode(mode);
    if (!seeds.empty()) {
      try {
        options.seeds = cep::parse_seed_list(seeds);
      } catch (const std::exception &e) {
        std::cerr << "config error: --seeds: " << e.what() << "\n";
        return cep::kExitConfigError;
      }
    }
    if (threads > 0) options.threads = threads;
    options.verbosity = static_cast<int>(verbose->count());
    return cep::run(options, std::cerr);
  }
  int code = cep::kExitOk;
  for (const auto &f : files) {
    if (cep::validate(f, std::cout) != cep::kExitOk) code = cep::kExitConfigError;
  }
  return code;
}

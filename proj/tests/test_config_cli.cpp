#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cep/run.hpp"

#include <fstream>
#include <sstream>

using namespace cep;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = CEP_CONFIG_DIR;

fs::path fresh_dir(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("cep_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path &dir, const std::string &name, const Json &j) {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

bool mentions(const std::vector<Diagnostic> &ds, const std::string &needle) {
  for (const auto &d : ds) {
    if (d.to_string().find(needle) != std::string::npos) return true;
  }
  return false;
}

std::vector<std::vector<std::string>> read_tsv(const fs::path &p) {
  std::ifstream is(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

} // namespace

TEST_CASE("every shipped config validates cleanly") {
  std::size_t files = 0;
  for (const auto &entry : fs::recursive_directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".json") continue;
    ++files;
    const auto ds = validate_file(entry.path());
    INFO(entry.path().string());
    for (const auto &d : ds) INFO(d.to_string());
    CHECK(ds.empty());
  }
  CHECK(files >= 14);
}

TEST_CASE("a non-positive obstacle radius is reported with its path") {
  Json env = read_json_file(kConfigs / "environments" / "one_obstacle.json");
  env["obstacles"][0]["radius"] = 0.0;
  const auto ds = check_environment(env);
  REQUIRE_FALSE(ds.empty());
  CHECK(mentions(ds, "/obstacles/0/radius"));
}

TEST_CASE("a transition row that does not sum to one names the row") {
  Json mdp = read_json_file(kConfigs / "mdp" / "three_state.json");
  mdp["transitions"][1][2] = {0.4, 0.0, 0.5};
  const auto ds = check_mdp(mdp);
  REQUIRE_FALSE(ds.empty());
  CHECK(mentions(ds, "row 2"));
  CHECK(mentions(ds, "0.9"));
}

TEST_CASE("syntax errors carry a line number") {
  const fs::path dir = fresh_dir("syntax");
  {
    std::ofstream(dir / "bad.json") << "{\n  \"kind\": \"mdp\",\n  oops\n}\n";
  }
  const auto ds = validate_file(dir / "bad.json");
  REQUIRE(ds.size() == 1);
  REQUIRE(ds[0].line.has_value());
  CHECK(*ds[0].line == 3);
}

TEST_CASE("unknown keys and kinds are reported") {
  Json env = read_json_file(kConfigs / "environments" / "one_obstacle.json");
  env["colour"] = "red";
  CHECK(mentions(check_environment(env), "colour"));
  const fs::path dir = fresh_dir("kind");
  const fs::path p = write_file(dir, "x.json", Json{{"kind", "robot"}});
  CHECK_FALSE(validate_file(p).empty());
}

TEST_CASE("environments and MDPs round-trip through JSON") {
  for (const auto &entry : fs::directory_iterator(kConfigs / "environments")) {
    const Environment env = load_environment(entry.path());
    const Environment back = environment_from_json(environment_to_json(env));
    CHECK(back.name == env.name);
    CHECK(back.target == env.target);
    CHECK(back.obstacles.size() == env.obstacles.size());
    for (std::size_t i = 0; i < env.obstacles.size(); ++i) {
      CHECK(back.obstacles[i].center == env.obstacles[i].center);
      CHECK(back.obstacles[i].radius == env.obstacles[i].radius);
    }
    CHECK(back.chain.num_joints() == env.chain.num_joints());
    REQUIRE(back.start_ranges.size() == env.start_ranges.size());
    for (std::size_t i = 0; i < env.start_ranges.size(); ++i) {
      CHECK(back.start_ranges[i].lower == env.start_ranges[i].lower);
      CHECK(back.start_ranges[i].upper == env.start_ranges[i].upper);
    }
  }
  const TabularMDP mdp = load_mdp(kConfigs / "mdp" / "three_state.json");
  const TabularMDP back = mdp_from_json(mdp_to_json(mdp));
  CHECK(back.horizon == mdp.horizon);
  CHECK((back.reward1 - mdp.reward1).norm() == 0.0);
  CHECK((back.transitions[1] - mdp.transitions[1]).norm() == 0.0);
}

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("3") == std::vector<std::uint64_t>{3});
  CHECK(parse_seed_list("0-3") == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(parse_seed_list("1,4,7") == std::vector<std::uint64_t>{1, 4, 7});
  CHECK(parse_seed_list("0-1,10") == std::vector<std::uint64_t>{0, 1, 10});
  CHECK_THROWS(parse_seed_list("5-2"));
  CHECK_THROWS(parse_seed_list("x"));
}

TEST_CASE("a run referencing a missing environment fails before writing anything") {
  const fs::path dir = fresh_dir("missing");
  Json run = read_json_file(kConfigs / "runs" / "benchmark.json");
  run["environments"] = {"nowhere.json"};
  const fs::path p = write_file(dir, "run.json", run);
  RunOptions options;
  options.config_path = p;
  options.out_dir = dir / "out";
  std::stringstream log;
  CHECK(cep::run(options, log) == kExitConfigError);
  CHECK_FALSE(fs::exists(dir / "out"));
  CHECK(log.str().find("nowhere.json") != std::string::npos);
  std::stringstream vlog;
  CHECK(cep::validate(p, vlog) == kExitConfigError);
}

TEST_CASE("equivalence run stays below the tolerance") {
  const fs::path out = fresh_dir("equivalence");
  RunOptions options;
  options.config_path = kConfigs / "runs" / "equivalence.json";
  options.out_dir = out;
  std::stringstream log;
  REQUIRE(cep::run(options, log) == kExitOk);
  const auto rows = read_tsv(out / "equivalence_summary.tsv");
  REQUIRE(rows.size() == 2);
  CHECK(std::stod(rows[1][1]) < 1e-8);
  CHECK(read_tsv(out / "equivalence.tsv").size() == 51);
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("soft-Q run on the three-state MDP finds no positive gap") {
  const fs::path dir = fresh_dir("softq");
  Json run = read_json_file(kConfigs / "runs" / "softq.json");
  run["mdps"] = {(kConfigs / "mdp" / "three_state.json").string()};
  run["random_mdps"]["count"] = 0;
  const fs::path p = write_file(dir, "run.json", run);
  RunOptions options;
  options.config_path = p;
  options.out_dir = dir / "out";
  std::stringstream log;
  REQUIRE(cep::run(options, log) == kExitOk);
  const auto rows = read_tsv(dir / "out" / "delta_q.tsv");
  REQUIRE(rows.size() == 1 + 5 * 3 * 2);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][4]) <= 1e-12);
  const auto checks = read_tsv(dir / "out" / "softq_checks.tsv");
  REQUIRE(checks.size() == 2);
  CHECK(checks[1][4] == "1");
}

TEST_CASE("benchmark runs are reproducible and their files round-trip") {
  const fs::path dir = fresh_dir("bench");
  Json run = read_json_file(kConfigs / "runs" / "benchmark.json");
  run["environments"] = {(kConfigs / "environments" / "one_obstacle.json").string()};
  run["cep"]["cem"]["n_samples"] = 200;
  run["episode"]["max_steps"] = 200;
  run["seeds"] = "0-1";
  const RunConfig config = run_config_from_json(run, dir);
  std::stringstream log;
  REQUIRE(cep::run(config, dir / "a", 0, log) == kExitOk);
  REQUIRE(cep::run(config, dir / "b", 0, log) == kExitOk);
  std::ifstream fa(dir / "a" / "episodes.jsonl"), fb(dir / "b" / "episodes.jsonl");
  const auto a = read_episodes(fa);
  const auto b = read_episodes(fb);
  REQUIRE(a.size() == 4);
  REQUIRE(b.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].controller == b[i].controller);
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].steps == b[i].steps);
    CHECK(a[i].final_distance == b[i].final_distance);
    CHECK(a[i].success == b[i].success);
  }
  std::ifstream sa(dir / "a" / "summary.tsv");
  const auto rows = read_summary(sa);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].episodes == 2);
  const Json manifest = read_json_file(dir / "a" / "manifest.json");
  CHECK(manifest.contains("config_hash"));
  CHECK(config_hash(run) == config_hash(Json::parse(run.dump())));
}

TEST_CASE("the HRL run reports zero prior violations") {
  const fs::path dir = fresh_dir("hrl");
  Json run = read_json_file(kConfigs / "runs" / "hrl_adversarial.json");
  run["seeds"] = "0-2";
  const RunConfig config = run_config_from_json(run, dir);
  std::stringstream log;
  REQUIRE(cep::run(config, dir / "out", 0, log) == kExitOk);
  std::ifstream is(dir / "out" / "hrl_episodes.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    const Json j = Json::parse(line);
    CHECK(j["prior_violations"] == 0);
    ++n;
  }
  CHECK(n == 3);
}

#include "cep/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace cep {

namespace fs = std::filesystem;

std::string Diagnostic::to_string() const {
  std::ostringstream os;
  os << (file.empty() ? "<config>" : file);
  if (line) os << ":" << *line;
  if (!path.empty()) os << ": " << path;
  os << ": " << message;
  return os.str();
}

namespace {

std::string first_message(const std::vector<Diagnostic> &d) {
  if (d.empty()) return "invalid config";
  return d.front().to_string();
}

} // namespace

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(first_message(diagnostics)), diagnostics_(std::move(diagnostics)) {}

Json read_json_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({{path.string(), "", "cannot open file", std::nullopt}});
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error &e) {
    const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i + 1 < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    if (pos != std::string::npos) what = what.substr(pos);
    throw ConfigError({{path.string(), "",
                        "column " + std::to_string(column) + ": " + what, line}});
  }
}

namespace {

enum class Range { Any, Positive, NonNegative, Fraction };

/// Collects diagnostics while reading a document.
struct Reader {
  std::string file;
  std::vector<Diagnostic> diags;

  void add(const std::string &path, std::string message) {
    diags.push_back({file, path, std::move(message), std::nullopt});
  }

  bool object(const Json &j, const std::string &path) {
    if (j.is_object()) return true;
    add(path, "must be an object");
    return false;
  }

  void known_keys(const Json &j, const std::string &path,
                  std::initializer_list<const char *> allowed) {
    if (!j.is_object()) return;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                  [&](const char *k) { return it.key() == k; });
      if (!ok) add(path + "/" + it.key(), "unknown field");
    }
  }

  const Json *field(const Json &j, const std::string &path, const char *key, bool required) {
    if (!j.is_object()) return nullptr;
    const auto it = j.find(key);
    if (it == j.end()) {
      if (required) add(path + "/" + key, "missing required field");
      return nullptr;
    }
    return &*it;
  }

  bool check_range(double v, const std::string &path, Range range) {
    if (!std::isfinite(v)) {
      add(path, "must be finite");
      return false;
    }
    switch (range) {
    case Range::Any: return true;
    case Range::Positive:
      if (v > 0.0) return true;
      add(path, "must be positive");
      return false;
    case Range::NonNegative:
      if (v >= 0.0) return true;
      add(path, "must be non-negative");
      return false;
    case Range::Fraction:
      if (v > 0.0 && v <= 1.0) return true;
      add(path, "must lie in (0, 1]");
      return false;
    }
    return true;
  }

  bool value_number(const Json &v, const std::string &path, double &out, Range range) {
    if (!v.is_number()) {
      add(path, "must be a number");
      return false;
    }
    const double x = v.get<double>();
    if (!check_range(x, path, range)) return false;
    out = x;
    return true;
  }

  bool number(const Json &j, const std::string &path, const char *key, double &out,
              Range range = Range::Any, bool required = false) {
    const Json *v = field(j, path, key, required);
    return v && value_number(*v, path + "/" + key, out, range);
  }

  bool count(const Json &j, const std::string &path, const char *key, std::size_t &out,
             bool positive = true, bool required = false) {
    const Json *v = field(j, path, key, required);
    if (!v) return false;
    if (!v->is_number_integer() || v->get<long long>() < (positive ? 1 : 0)) {
      add(path + "/" + key, positive ? "must be a positive integer" : "must be a non-negative integer");
      return false;
    }
    out = v->get<std::size_t>();
    return true;
  }

  bool boolean(const Json &j, const std::string &path, const char *key, bool &out) {
    const Json *v = field(j, path, key, false);
    if (!v) return false;
    if (!v->is_boolean()) {
      add(path + "/" + key, "must be true or false");
      return false;
    }
    out = v->get<bool>();
    return true;
  }

  bool string(const Json &j, const std::string &path, const char *key, std::string &out,
              bool required = false) {
    const Json *v = field(j, path, key, required);
    if (!v) return false;
    if (!v->is_string()) {
      add(path + "/" + key, "must be a string");
      return false;
    }
    out = v->get<std::string>();
    return true;
  }

  bool vector(const Json &v, const std::string &path, Vec &out, std::optional<std::size_t> size,
              Range range = Range::Any) {
    if (!v.is_array() || (size && v.size() != *size) || v.empty()) {
      add(path, size ? "must be an array of " + std::to_string(*size) + " numbers"
                     : "must be a non-empty array of numbers");
      return false;
    }
    Vec tmp(static_cast<Eigen::Index>(v.size()));
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double x = 0.0;
      ok = value_number(v[i], path + "/" + std::to_string(i), x, range) && ok;
      tmp(static_cast<Eigen::Index>(i)) = x;
    }
    if (ok) out = tmp;
    return ok;
  }

  bool vec2(const Json &v, const std::string &path, Vec2 &out) {
    Vec tmp;
    if (!vector(v, path, tmp, 2)) return false;
    out = Vec2(tmp(0), tmp(1));
    return true;
  }

  bool interval(const Json &v, const std::string &path, JointLimit &out, bool strict) {
    Vec tmp;
    if (!vector(v, path, tmp, 2)) return false;
    if (strict ? !(tmp(0) < tmp(1)) : !(tmp(0) <= tmp(1))) {
      add(path, strict ? "lower bound must be below upper bound"
                       : "lower bound must not exceed upper bound");
      return false;
    }
    out = {tmp(0), tmp(1)};
    return true;
  }

  bool matrix(const Json &v, const std::string &path, Mat &out, std::size_t rows,
              std::size_t cols) {
    if (!v.is_array() || v.size() != rows) {
      add(path, "must be an array of " + std::to_string(rows) + " rows");
      return false;
    }
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    bool ok = true;
    for (std::size_t r = 0; r < rows; ++r) {
      Vec row;
      if (!vector(v[r], path + "/" + std::to_string(r), row, cols)) {
        ok = false;
        continue;
      }
      m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    if (ok) out = m;
    return ok;
  }

  void kind(const Json &j, const char *expected) {
    std::string k;
    if (string(j, "", "kind", k, true) && k != expected) {
      add("/kind", "expected \"" + std::string(expected) + "\", found \"" + k + "\"");
    }
  }
};

std::string pointer_for_problem(const std::string &message) {
  auto indexed = [&](const std::string &prefix) -> std::optional<std::string> {
    if (message.rfind(prefix + "[", 0) != 0) return std::nullopt;
    const auto close = message.find(']');
    return "/" + prefix + "/" + message.substr(prefix.size() + 1, close - prefix.size() - 1);
  };
  if (auto p = indexed("obstacles")) return *p;
  if (auto p = indexed("start_ranges")) return *p;
  if (message.find("inside obstacles[") != std::string::npos) return "/target";
  if (message.rfind("target_tolerance", 0) == 0) return "/target_tolerance";
  if (message.rfind("target", 0) == 0) return "/target";
  if (message.rfind("start_ranges", 0) == 0) return "/start_ranges";
  if (message.rfind("environment name", 0) == 0) return "/name";
  return "";
}

std::optional<Environment> read_environment(Reader &r, const Json &j) {
  if (!r.object(j, "")) return std::nullopt;
  r.kind(j, "environment");
  r.known_keys(j, "", {"kind", "name", "chain", "obstacles", "target", "target_tolerance",
                       "start_ranges"});
  const std::size_t before = r.diags.size();

  std::string name;
  r.string(j, "", "name", name, true);

  std::vector<double> lengths;
  std::vector<JointLimit> limits;
  if (const Json *chain = r.field(j, "", "chain", true); chain && r.object(*chain, "/chain")) {
    r.known_keys(*chain, "/chain", {"link_lengths", "joint_limits"});
    if (const Json *l = r.field(*chain, "/chain", "link_lengths", true)) {
      Vec v;
      if (r.vector(*l, "/chain/link_lengths", v, std::nullopt, Range::Positive)) {
        lengths.assign(v.data(), v.data() + v.size());
      }
    }
    if (const Json *l = r.field(*chain, "/chain", "joint_limits", true)) {
      if (!l->is_array()) {
        r.add("/chain/joint_limits", "must be an array of [lower, upper] pairs");
      } else {
        for (std::size_t i = 0; i < l->size(); ++i) {
          JointLimit lim{};
          if (r.interval((*l)[i], "/chain/joint_limits/" + std::to_string(i), lim, true)) {
            limits.push_back(lim);
          }
        }
        if (!lengths.empty() && l->size() != lengths.size()) {
          r.add("/chain/joint_limits", "needs " + std::to_string(lengths.size()) +
                                           " entries, one per link");
        }
      }
    }
  }

  std::vector<Obstacle> obstacles;
  if (const Json *obs = r.field(j, "", "obstacles", false)) {
    if (!obs->is_array()) {
      r.add("/obstacles", "must be an array");
    } else {
      for (std::size_t i = 0; i < obs->size(); ++i) {
        const std::string path = "/obstacles/" + std::to_string(i);
        const Json &o = (*obs)[i];
        if (!r.object(o, path)) continue;
        r.known_keys(o, path, {"center", "radius"});
        Obstacle ob{Vec2::Zero(), 0.0};
        bool ok = true;
        if (const Json *c = r.field(o, path, "center", true)) {
          ok = r.vec2(*c, path + "/center", ob.center) && ok;
        } else {
          ok = false;
        }
        ok = r.number(o, path, "radius", ob.radius, Range::Positive, true) && ok;
        if (ok) obstacles.push_back(ob);
      }
    }
  }

  Vec2 target = Vec2::Zero();
  if (const Json *t = r.field(j, "", "target", true)) r.vec2(*t, "/target", target);
  double tolerance = 0.05;
  r.number(j, "", "target_tolerance", tolerance, Range::Positive);

  std::vector<JointLimit> start;
  if (const Json *s = r.field(j, "", "start_ranges", true)) {
    if (!s->is_array()) {
      r.add("/start_ranges", "must be an array of [lower, upper] pairs");
    } else {
      for (std::size_t i = 0; i < s->size(); ++i) {
        JointLimit lim{};
        if (r.interval((*s)[i], "/start_ranges/" + std::to_string(i), lim, false)) {
          start.push_back(lim);
        }
      }
    }
  }

  if (r.diags.size() != before) return std::nullopt;
  Environment env{name, ChainSpec(lengths, limits), obstacles, target, tolerance, start};
  for (const auto &p : env.problems()) r.add(pointer_for_problem(p), p);
  if (r.diags.size() != before) return std::nullopt;
  return env;
}

std::optional<TabularMDP> read_mdp(Reader &r, const Json &j) {
  if (!r.object(j, "")) return std::nullopt;
  r.kind(j, "mdp");
  r.known_keys(j, "", {"kind", "name", "n_states", "n_actions", "horizon", "transitions",
                       "reward_1", "reward_2"});
  const std::size_t before = r.diags.size();
  TabularMDP mdp;
  const bool sizes = r.count(j, "", "n_states", mdp.n_states, true, true) &
                     r.count(j, "", "n_actions", mdp.n_actions, true, true);
  r.count(j, "", "horizon", mdp.horizon, false, true);
  if (!sizes) return std::nullopt;
  const std::size_t S = mdp.n_states;
  const std::size_t A = mdp.n_actions;

  if (const Json *t = r.field(j, "", "transitions", true)) {
    if (!t->is_array() || t->size() != A) {
      r.add("/transitions", "must hold one " + std::to_string(S) + "x" + std::to_string(S) +
                                " table per action (" + std::to_string(A) + ")");
    } else {
      for (std::size_t a = 0; a < A; ++a) {
        const std::string path = "/transitions/" + std::to_string(a);
        Mat P;
        if (!r.matrix((*t)[a], path, P, S, S)) continue;
        for (std::size_t s = 0; s < S; ++s) {
          const auto row = P.row(static_cast<Eigen::Index>(s));
          const std::string row_path = path + "/" + std::to_string(s);
          if ((row.array() < 0.0).any()) {
            r.add(row_path, "transition row " + std::to_string(s) + " of action " +
                                std::to_string(a) + " has a negative entry");
          } else if (std::abs(row.sum() - 1.0) > 1e-9) {
            std::ostringstream msg;
            msg << "transition row " << s << " of action " << a << " sums to " << row.sum()
                << " instead of 1";
            r.add(row_path, msg.str());
          }
        }
        mdp.transitions.push_back(P);
      }
    }
  }
  if (const Json *v = r.field(j, "", "reward_1", true)) r.matrix(*v, "/reward_1", mdp.reward1, S, A);
  if (const Json *v = r.field(j, "", "reward_2", false)) {
    r.matrix(*v, "/reward_2", mdp.reward2, S, A);
  } else {
    mdp.reward2 = mdp.reward1;
  }
  if (r.diags.size() != before) return std::nullopt;
  for (const auto &p : mdp.problems()) r.add("", p);
  if (r.diags.size() != before) return std::nullopt;
  return mdp;
}

template <class T> T or_throw(Reader &r, std::optional<T> v) {
  if (!r.diags.empty() || !v) throw ConfigError(r.diags);
  return std::move(*v);
}

} // namespace

std::vector<Diagnostic> check_environment(const Json &j) {
  Reader r;
  read_environment(r, j);
  return r.diags;
}

std::vector<Diagnostic> check_mdp(const Json &j) {
  Reader r;
  read_mdp(r, j);
  return r.diags;
}

Environment environment_from_json(const Json &j) {
  Reader r;
  auto env = read_environment(r, j);
  return or_throw(r, std::move(env));
}

Json environment_to_json(const Environment &env) {
  Json j;
  j["kind"] = "environment";
  j["name"] = env.name;
  Json lengths = Json::array();
  Json limits = Json::array();
  for (std::size_t i = 0; i < env.chain.num_joints(); ++i) {
    lengths.push_back(env.chain.link_lengths()[i]);
    limits.push_back({env.chain.joint_limits()[i].lower, env.chain.joint_limits()[i].upper});
  }
  j["chain"] = {{"link_lengths", lengths}, {"joint_limits", limits}};
  Json obstacles = Json::array();
  for (const auto &o : env.obstacles) {
    obstacles.push_back({{"center", {o.center.x(), o.center.y()}}, {"radius", o.radius}});
  }
  j["obstacles"] = obstacles;
  j["target"] = {env.target.x(), env.target.y()};
  j["target_tolerance"] = env.target_tolerance;
  Json start = Json::array();
  for (const auto &s : env.start_ranges) start.push_back({s.lower, s.upper});
  j["start_ranges"] = start;
  return j;
}

Environment load_environment(const fs::path &path) {
  const Json j = read_json_file(path);
  Reader r{path.string(), {}};
  auto env = read_environment(r, j);
  return or_throw(r, std::move(env));
}

TabularMDP mdp_from_json(const Json &j) {
  Reader r;
  auto mdp = read_mdp(r, j);
  return or_throw(r, std::move(mdp));
}

Json mdp_to_json(const TabularMDP &mdp, const std::string &name) {
  auto matrix = [](const Mat &m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
      rows.push_back(row);
    }
    return rows;
  };
  Json j;
  j["kind"] = "mdp";
  if (!name.empty()) j["name"] = name;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["horizon"] = mdp.horizon;
  Json t = Json::array();
  for (const auto &P : mdp.transitions) t.push_back(matrix(P));
  j["transitions"] = t;
  j["reward_1"] = matrix(mdp.reward1);
  j["reward_2"] = matrix(mdp.reward2);
  return j;
}

TabularMDP load_mdp(const fs::path &path) {
  const Json j = read_json_file(path);
  Reader r{path.string(), {}};
  auto mdp = read_mdp(r, j);
  return or_throw(r, std::move(mdp));
}

std::string to_string(RunMode mode) {
  switch (mode) {
  case RunMode::Benchmark: return "benchmark";
  case RunMode::Episode: return "episode";
  case RunMode::SoftQ: return "softq";
  case RunMode::HRL: return "hrl";
  case RunMode::Equivalence: return "equivalence";
  }
  return "";
}

std::optional<RunMode> parse_run_mode(const std::string &s) {
  for (RunMode m : {RunMode::Benchmark, RunMode::Episode, RunMode::SoftQ, RunMode::HRL,
                    RunMode::Equivalence}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

std::vector<std::uint64_t> parse_seed_list(const std::string &text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  auto parse = [&](const std::string &s) {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument("bad seed '" + s + "'");
    return static_cast<std::uint64_t>(v);
  };
  while (std::getline(ss, part, ',')) {
    if (part.empty()) throw std::invalid_argument("empty entry in seed list '" + text + "'");
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse(part));
      continue;
    }
    const std::uint64_t lo = parse(part.substr(0, dash));
    const std::uint64_t hi = parse(part.substr(dash + 1));
    if (hi < lo) throw std::invalid_argument("seed range '" + part + "' is decreasing");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("seed list is empty");
  return out;
}

std::uint64_t fnv1a(const std::string &bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

void read_cem(Reader &r, const Json &j, const std::string &path, CEMConfig &c) {
  if (!r.object(j, path)) return;
  r.known_keys(j, path, {"n_samples", "n_iters", "elite_fraction", "cov_floor",
                         "fallback_damping"});
  r.count(j, path, "n_samples", c.n_samples);
  r.count(j, path, "n_iters", c.n_iters);
  r.number(j, path, "elite_fraction", c.elite_fraction, Range::Fraction);
  r.number(j, path, "cov_floor", c.cov_floor, Range::Positive);
  r.number(j, path, "fallback_damping", c.fallback_damping, Range::NonNegative);
  if (c.elite_fraction * static_cast<double>(c.n_samples) < 1.0 - 1e-9) {
    r.add(path + "/elite_fraction", "selects no sample out of n_samples");
  }
}

void read_barrier(Reader &r, const Json &j, const std::string &path, double &gamma,
                  double &alpha, double &beta, double &tolerance) {
  if (!r.object(j, path)) return;
  r.known_keys(j, path, {"gamma", "alpha", "beta", "approach_tolerance"});
  r.number(j, path, "gamma", gamma, Range::Positive);
  r.number(j, path, "alpha", alpha, Range::NonNegative);
  r.number(j, path, "beta", beta, Range::NonNegative);
  r.number(j, path, "approach_tolerance", tolerance, Range::NonNegative);
}

void read_cep(Reader &r, const Json &j, const std::string &path, CEPControllerConfig &c) {
  if (!r.object(j, path)) return;
  r.known_keys(j, path, {"go_to", "obstacle", "joint_limits", "use_joint_limits",
                         "damping_gain", "damping_variance", "max_acceleration", "warm_start",
                         "cem"});
  if (const Json *g = r.field(j, path, "go_to", false); g && r.object(*g, path + "/go_to")) {
    const std::string p = path + "/go_to";
    r.known_keys(*g, p, {"kp", "kv", "alpha", "variance_floor"});
    r.number(*g, p, "kp", c.go_to.kp, Range::NonNegative);
    r.number(*g, p, "kv", c.go_to.kv, Range::NonNegative);
    r.number(*g, p, "alpha", c.go_to.alpha, Range::NonNegative);
    r.number(*g, p, "variance_floor", c.go_to.variance_floor, Range::Positive);
  }
  if (const Json *o = r.field(j, path, "obstacle", false)) {
    read_barrier(r, *o, path + "/obstacle", c.obstacle.gamma, c.obstacle.alpha, c.obstacle.beta,
                 c.obstacle.approach_tolerance);
  }
  if (const Json *o = r.field(j, path, "joint_limits", false)) {
    read_barrier(r, *o, path + "/joint_limits", c.joint_limits.gamma, c.joint_limits.alpha,
                 c.joint_limits.beta, c.joint_limits.approach_tolerance);
  }
  r.boolean(j, path, "use_joint_limits", c.use_joint_limits);
  r.number(j, path, "damping_gain", c.damping_gain, Range::NonNegative);
  r.number(j, path, "damping_variance", c.damping_variance, Range::Positive);
  r.number(j, path, "max_acceleration", c.max_acceleration, Range::Positive);
  r.boolean(j, path, "warm_start", c.warm_start);
  if (const Json *cem = r.field(j, path, "cem", false)) read_cem(r, *cem, path + "/cem", c.cem);
}

void read_apf(Reader &r, const Json &j, const std::string &path, APFControllerConfig &c) {
  if (!r.object(j, path)) return;
  r.known_keys(j, path, {"kp", "kv", "obstacle_gamma", "obstacle_gain", "joint_limit_gamma",
                         "joint_limit_gain", "damping_gain", "max_acceleration"});
  r.number(j, path, "kp", c.kp, Range::NonNegative);
  r.number(j, path, "kv", c.kv, Range::NonNegative);
  r.number(j, path, "obstacle_gamma", c.obstacle_gamma, Range::Positive);
  r.number(j, path, "obstacle_gain", c.obstacle_gain, Range::NonNegative);
  r.number(j, path, "joint_limit_gamma", c.joint_limit_gamma, Range::Positive);
  r.number(j, path, "joint_limit_gain", c.joint_limit_gain, Range::NonNegative);
  r.number(j, path, "damping_gain", c.damping_gain, Range::NonNegative);
  r.number(j, path, "max_acceleration", c.max_acceleration, Range::Positive);
}

void read_episode(Reader &r, const Json &j, const std::string &path, EpisodeConfig &c) {
  if (!r.object(j, path)) return;
  r.known_keys(j, path, {"dt", "max_steps", "hold_steps", "start_clearance",
                         "start_min_distance", "record_trajectory"});
  r.number(j, path, "dt", c.dt, Range::Positive);
  r.count(j, path, "max_steps", c.max_steps);
  r.count(j, path, "hold_steps", c.hold_steps);
  r.number(j, path, "start_clearance", c.start_clearance, Range::NonNegative);
  r.number(j, path, "start_min_distance", c.start_min_distance, Range::NonNegative);
  r.boolean(j, path, "record_trajectory", c.record_trajectory);
}

void read_seeds(Reader &r, const Json &j, std::vector<std::uint64_t> &seeds) {
  const Json *s = r.field(j, "", "seeds", true);
  if (!s) return;
  if (s->is_string()) {
    try {
      seeds = parse_seed_list(s->get<std::string>());
    } catch (const std::exception &e) {
      r.add("/seeds", e.what());
    }
  } else if (s->is_array()) {
    seeds.clear();
    for (std::size_t i = 0; i < s->size(); ++i) {
      if (!(*s)[i].is_number_unsigned()) {
        r.add("/seeds/" + std::to_string(i), "must be a non-negative integer");
        continue;
      }
      seeds.push_back((*s)[i].get<std::uint64_t>());
    }
    if (s->empty()) r.add("/seeds", "must not be empty");
  } else if (s->is_object()) {
    r.known_keys(*s, "/seeds", {"start", "count"});
    std::size_t start = 0;
    std::size_t count = 0;
    r.count(*s, "/seeds", "start", start, false);
    if (r.count(*s, "/seeds", "count", count, true, true)) {
      seeds.clear();
      for (std::size_t i = 0; i < count; ++i) seeds.push_back(start + i);
    }
  } else {
    r.add("/seeds", "must be a list, a range string such as \"0-99\", or {start, count}");
  }
}

void read_paths(Reader &r, const Json &j, const char *key, const fs::path &base,
                std::vector<fs::path> &out, bool required) {
  const Json *v = r.field(j, "", key, required);
  if (!v) return;
  const std::string path = std::string("/") + key;
  if (!v->is_array() || v->empty()) {
    r.add(path, "must be a non-empty array of file paths");
    return;
  }
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_string()) {
      r.add(path + "/" + std::to_string(i), "must be a file path string");
      continue;
    }
    fs::path p = (*v)[i].get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) {
      r.add(path + "/" + std::to_string(i), "file not found: " + p.string());
      continue;
    }
    out.push_back(p);
  }
}

void read_puck_env(Reader &r, const Json &j, const std::string &path, PuckEnv &e) {
  if (!r.object(j, path)) return;
  r.known_keys(j, path, {"ee_start", "puck_start_x", "puck_start_jitter", "target_x", "table_y",
                         "puck_radius", "ee_radius", "dt", "horizon", "max_speed",
                         "puck_damping", "distance_weight", "collision_penalty"});
  if (const Json *v = r.field(j, path, "ee_start", false)) r.vec2(*v, path + "/ee_start", e.ee_start);
  r.number(j, path, "puck_start_x", e.puck_start_x);
  r.number(j, path, "puck_start_jitter", e.puck_start_jitter, Range::NonNegative);
  r.number(j, path, "target_x", e.target_x);
  r.number(j, path, "table_y", e.table_y);
  r.number(j, path, "puck_radius", e.puck_radius, Range::Positive);
  r.number(j, path, "ee_radius", e.ee_radius, Range::Positive);
  r.number(j, path, "dt", e.dt, Range::Positive);
  r.count(j, path, "horizon", e.horizon);
  r.number(j, path, "max_speed", e.max_speed, Range::Positive);
  r.number(j, path, "puck_damping", e.puck_damping, Range::NonNegative);
  r.number(j, path, "distance_weight", e.distance_weight, Range::NonNegative);
  r.number(j, path, "collision_penalty", e.collision_penalty);
  for (const auto &p : e.problems()) r.add(path, p);
}

void read_hrl(Reader &r, const Json &j, const std::string &path, HRLRunConfig &c) {
  if (!r.object(j, path)) return;
  r.known_keys(j, path, {"env", "prior", "prior_variance", "high_level", "cem"});
  if (const Json *e = r.field(j, path, "env", false)) read_puck_env(r, *e, path + "/env", c.env);
  std::string prior;
  if (r.string(j, path, "prior", prior)) {
    if (prior == "uniform") c.prior = PriorKind::Uniform;
    else if (prior == "table") c.prior = PriorKind::Table;
    else if (prior == "pushing") c.prior = PriorKind::Pushing;
    else r.add(path + "/prior", "must be one of uniform, table, pushing");
  }
  r.number(j, path, "prior_variance", c.prior_variance, Range::Positive);
  if (const Json *cem = r.field(j, path, "cem", false)) read_cem(r, *cem, path + "/cem", c.cem);

  const Json *h = r.field(j, path, "high_level", false);
  if (h && r.object(*h, path + "/high_level")) {
    const std::string hp = path + "/high_level";
    r.known_keys(*h, hp, {"mode", "mean", "cov", "generations", "population", "elites",
                          "episodes_per_candidate", "init_std", "covariance"});
    std::string mode = "scripted";
    r.string(*h, hp, "mode", mode);
    if (mode == "fixed") {
      c.mode = HighLevelMode::Fixed;
      if (const Json *m = r.field(*h, hp, "mean", true)) r.vector(*m, hp + "/mean", c.fixed_mean, 2);
      if (const Json *v = r.field(*h, hp, "cov", false)) {
        r.vector(*v, hp + "/cov", c.fixed_cov, 2, Range::Positive);
      }
    } else if (mode == "scripted") {
      c.mode = HighLevelMode::Scripted;
      if (const Json *v = r.field(*h, hp, "cov", false)) {
        r.vector(*v, hp + "/cov", c.scripted_cov, 2, Range::Positive);
      }
    } else if (mode == "search") {
      c.mode = HighLevelMode::Search;
      r.count(*h, hp, "generations", c.search.generations);
      r.count(*h, hp, "population", c.search.population);
      r.count(*h, hp, "elites", c.search.elites);
      r.count(*h, hp, "episodes_per_candidate", c.search.episodes_per_candidate);
      r.number(*h, hp, "init_std", c.search.init_std, Range::Positive);
      std::string cov;
      if (r.string(*h, hp, "covariance", cov)) {
        if (cov == "fixed") c.search.covariance = CovarianceMode::Fixed;
        else if (cov == "constant") c.search.covariance = CovarianceMode::Constant;
        else if (cov == "state_linear") c.search.covariance = CovarianceMode::StateLinear;
        else r.add(hp + "/covariance", "must be one of fixed, constant, state_linear");
      }
      if (c.search.elites > c.search.population) {
        r.add(hp + "/elites", "must not exceed population");
      }
    } else {
      r.add(hp + "/mode", "must be one of fixed, scripted, search");
    }
  }
  c.search.low_level = c.cem;
}

std::optional<RunConfig> read_run(Reader &r, const Json &j, const fs::path &base,
                                  bool check_references) {
  if (!r.object(j, "")) return std::nullopt;
  r.kind(j, "run");
  r.known_keys(j, "", {"kind", "mode", "environments", "controllers", "cep", "apf", "episode",
                       "seeds", "threads", "mdps", "random_mdps", "weight", "equivalence",
                       "hrl"});
  const std::size_t before = r.diags.size();
  RunConfig c;
  c.base_dir = base;
  c.source = j;

  std::string mode;
  if (r.string(j, "", "mode", mode, true)) {
    if (auto m = parse_run_mode(mode)) {
      c.mode = *m;
    } else {
      r.add("/mode", "must be one of benchmark, episode, softq, hrl, equivalence");
    }
  }
  const bool needs_envs = c.mode == RunMode::Benchmark || c.mode == RunMode::Episode;
  read_paths(r, j, "environments", base, c.environments, needs_envs);
  if (const Json *ctl = r.field(j, "", "controllers", false)) {
    c.controllers.clear();
    if (!ctl->is_array() || ctl->empty()) {
      r.add("/controllers", "must be a non-empty array of controller names");
    } else {
      for (std::size_t i = 0; i < ctl->size(); ++i) {
        const Json &v = (*ctl)[i];
        if (!v.is_string() || (v != "CEP" && v != "APF")) {
          r.add("/controllers/" + std::to_string(i), "must be \"CEP\" or \"APF\"");
          continue;
        }
        c.controllers.push_back(v.get<std::string>());
      }
    }
  }
  if (const Json *v = r.field(j, "", "cep", false)) read_cep(r, *v, "/cep", c.cep);
  if (const Json *v = r.field(j, "", "apf", false)) read_apf(r, *v, "/apf", c.apf);
  if (const Json *v = r.field(j, "", "episode", false)) read_episode(r, *v, "/episode", c.episode);
  read_seeds(r, j, c.seeds);
  r.count(j, "", "threads", c.threads);

  const Json *random = r.field(j, "", "random_mdps", false);
  if (random && r.object(*random, "/random_mdps")) {
    r.known_keys(*random, "/random_mdps", {"count", "max_states", "max_actions", "max_horizon",
                                           "reward_scale"});
    r.count(*random, "/random_mdps", "count", c.random_mdps.count, false);
    r.count(*random, "/random_mdps", "max_states", c.random_mdps.max_states);
    r.count(*random, "/random_mdps", "max_actions", c.random_mdps.max_actions);
    r.count(*random, "/random_mdps", "max_horizon", c.random_mdps.max_horizon, false);
    r.number(*random, "/random_mdps", "reward_scale", c.random_mdps.reward_scale,
             Range::NonNegative);
  }
  read_paths(r, j, "mdps", base, c.mdps, c.mode == RunMode::SoftQ && !random);
  if (r.number(j, "", "weight", c.softq_weight) &&
      !(c.softq_weight >= 0.0 && c.softq_weight <= 1.0)) {
    r.add("/weight", "must lie in [0, 1]");
  }

  const Json *eq = r.field(j, "", "equivalence", false);
  if (eq && r.object(*eq, "/equivalence")) {
    auto &e = c.equivalence;
    r.known_keys(*eq, "/equivalence", {"trials", "min_dim", "max_dim", "min_components",
                                       "max_components"});
    r.count(*eq, "/equivalence", "trials", e.trials);
    r.count(*eq, "/equivalence", "min_dim", e.min_dim);
    r.count(*eq, "/equivalence", "max_dim", e.max_dim);
    r.count(*eq, "/equivalence", "min_components", e.min_components);
    r.count(*eq, "/equivalence", "max_components", e.max_components);
    if (e.min_dim > e.max_dim) r.add("/equivalence/min_dim", "must not exceed max_dim");
    if (e.min_components > e.max_components) {
      r.add("/equivalence/min_components", "must not exceed max_components");
    }
  }
  if (const Json *h = r.field(j, "", "hrl", false)) read_hrl(r, *h, "/hrl", c.hrl);

  if (check_references) {
    for (const auto &p : c.environments) {
      try {
        load_environment(p);
      } catch (const ConfigError &e) {
        for (const auto &d : e.diagnostics()) r.diags.push_back(d);
      }
    }
    for (const auto &p : c.mdps) {
      try {
        load_mdp(p);
      } catch (const ConfigError &e) {
        for (const auto &d : e.diagnostics()) r.diags.push_back(d);
      }
    }
  }
  if (r.diags.size() != before) return std::nullopt;
  return c;
}

} // namespace

std::vector<Diagnostic> check_run(const Json &j, const fs::path &base_dir) {
  Reader r;
  read_run(r, j, base_dir, true);
  return r.diags;
}

RunConfig run_config_from_json(const Json &j, const fs::path &base_dir) {
  Reader r;
  auto c = read_run(r, j, base_dir, true);
  return or_throw(r, std::move(c));
}

RunConfig load_run_config(const fs::path &path) {
  const Json j = read_json_file(path);
  Reader r{path.string(), {}};
  auto c = read_run(r, j, path.parent_path(), true);
  return or_throw(r, std::move(c));
}

std::vector<Diagnostic> validate_file(const fs::path &path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const ConfigError &e) {
    return e.diagnostics();
  }
  Reader r{path.string(), {}};
  std::string kind;
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    r.add("/kind", "missing required field (one of environment, mdp, run)");
    return r.diags;
  }
  kind = j["kind"].get<std::string>();
  if (kind == "environment") {
    read_environment(r, j);
  } else if (kind == "mdp") {
    read_mdp(r, j);
  } else if (kind == "run") {
    read_run(r, j, path.parent_path(), true);
  } else {
    r.add("/kind", "unknown kind \"" + kind + "\" (expected environment, mdp or run)");
  }
  return r.diags;
}

} // namespace cep

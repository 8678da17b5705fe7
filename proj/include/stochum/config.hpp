#ifndef STOCHUM_CONFIG_HPP
#define STOCHUM_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace stochum {

enum class RunMode { norm, sweep, time, equivalence, selftest };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::norm: return "norm";
    case RunMode::sweep: return "sweep";
    case RunMode::time: return "time";
    case RunMode::equivalence: return "equivalence";
    case RunMode::selftest: return "selftest";
  }
  return "?";
}

enum class NoiseKind { constant, per_level, per_node_file };
enum class InitialKind { eigenvector, bump, file };

// Scenario description parsed from the sectioned key=value format. Field
// defaults are the library's default desk-scale scenario; an empty file is a
// valid config.
struct ScenarioConfig {
  // [domain]
  double length = 1.0;
  int points = 16;
  double g_lo = 0.2;
  double g_hi = 0.9;

  // [noise]
  NoiseKind noise_kind = NoiseKind::constant;
  double a = 0.3;
  std::vector<double> a_levels;
  std::string a_file;

  // [initial]
  InitialKind initial_kind = InitialKind::eigenvector;
  int eigen_index = 1;
  double bump_x0 = 0.5;
  double amplitude = 1.0;
  std::string initial_file;

  // [solve]
  RunMode mode = RunMode::norm;
  double dt = 0.1;
  int depth = 0;  // 0: derive from dt
  double T = 0.6;
  std::vector<double> t_list;
  double n0 = 0.0;
  double bracket_lo = 0.25;
  double bracket_hi = 2.0;
  double cg_tol = 1e-10;
  int max_iter = 0;
  double eps = 0.0;
  bool eps_ladder = false;
  double bisection_tol = 1e-3;
  double bb_floor = 1e-10;
  bool dense_oracle = false;
  int fixed_depth = 0;

  // [output]
  std::string out_dir = "out";

  // CLI flags, echoed into the record
  bool seedless = false;
  unsigned long long prop_seed = 20240711ull;
};

struct ConfigParseResult {
  std::optional<ScenarioConfig> config;
  std::vector<std::string> errors;
  std::vector<std::string> defaulted;  // keys left at their defaults
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_double(const std::string& s, double& out) {
  std::istringstream in(s);
  in >> out;
  return static_cast<bool>(in) && in.eof() && std::isfinite(out);
}

inline bool parse_int(const std::string& s, int& out) {
  std::istringstream in(s);
  in >> out;
  return static_cast<bool>(in) && in.eof();
}

inline bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no") {
    out = false;
    return true;
  }
  return false;
}

inline bool parse_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    double v;
    if (!parse_double(trim(item), v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

}  // namespace detail

// Parse and validate a config file; on failure every detected problem is
// reported, not just the first.
inline ConfigParseResult parse_config(const std::string& path) {
  ConfigParseResult result;
  std::ifstream in(path);
  if (!in) {
    result.errors.push_back("cannot open config file: " + path);
    return result;
  }

  static const std::map<std::string, std::set<std::string>> known = {
      {"domain", {"length", "points", "g_lo", "g_hi"}},
      {"noise", {"a", "a_levels", "a_file"}},
      {"initial", {"type", "k", "x0", "amplitude", "file"}},
      {"solve",
       {"mode", "dt", "depth", "T", "t_list", "n0", "bracket_lo", "bracket_hi",
        "cg_tol", "max_iter", "eps", "eps_ladder", "bisection_tol", "bb_floor",
        "dense_oracle", "fixed_depth"}},
      {"output", {"dir"}},
  };

  ScenarioConfig cfg;
  std::vector<std::string>& errors = result.errors;
  std::set<std::string> seen;
  std::string section;
  std::string line;
  int lineno = 0;

  auto fail = [&](const std::string& msg) {
    errors.push_back("line " + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        fail("malformed section header: " + line);
        continue;
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!known.count(section)) fail("unknown section [" + section + "]");
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail("expected key = value: " + line);
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) {
      fail("key '" + key + "' appears before any section");
      continue;
    }
    auto it = known.find(section);
    if (it == known.end()) continue;  // section error already reported
    if (!it->second.count(key)) {
      fail("unknown key '" + key + "' in section [" + section + "]");
      continue;
    }
    seen.insert(section + "." + key);

    auto bad_value = [&]() {
      fail("cannot parse value for " + section + "." + key + ": '" + value +
           "'");
    };

    if (section == "domain") {
      if (key == "length" && !detail::parse_double(value, cfg.length)) bad_value();
      if (key == "points" && !detail::parse_int(value, cfg.points)) bad_value();
      if (key == "g_lo" && !detail::parse_double(value, cfg.g_lo)) bad_value();
      if (key == "g_hi" && !detail::parse_double(value, cfg.g_hi)) bad_value();
    } else if (section == "noise") {
      if (key == "a") {
        if (!detail::parse_double(value, cfg.a)) bad_value();
        cfg.noise_kind = NoiseKind::constant;
      }
      if (key == "a_levels") {
        if (!detail::parse_list(value, cfg.a_levels)) bad_value();
        cfg.noise_kind = NoiseKind::per_level;
      }
      if (key == "a_file") {
        cfg.a_file = value;
        cfg.noise_kind = NoiseKind::per_node_file;
      }
    } else if (section == "initial") {
      if (key == "type") {
        if (value == "eigenvector")
          cfg.initial_kind = InitialKind::eigenvector;
        else if (value == "bump")
          cfg.initial_kind = InitialKind::bump;
        else if (value == "file")
          cfg.initial_kind = InitialKind::file;
        else
          fail("initial.type must be eigenvector | bump | file");
      }
      if (key == "k" && !detail::parse_int(value, cfg.eigen_index)) bad_value();
      if (key == "x0" && !detail::parse_double(value, cfg.bump_x0)) bad_value();
      if (key == "amplitude" && !detail::parse_double(value, cfg.amplitude))
        bad_value();
      if (key == "file") cfg.initial_file = value;
    } else if (section == "solve") {
      if (key == "mode") {
        if (value == "norm")
          cfg.mode = RunMode::norm;
        else if (value == "sweep")
          cfg.mode = RunMode::sweep;
        else if (value == "time")
          cfg.mode = RunMode::time;
        else if (value == "equivalence")
          cfg.mode = RunMode::equivalence;
        else if (value == "selftest")
          cfg.mode = RunMode::selftest;
        else
          fail("mode must be norm | sweep | time | equivalence | selftest");
      }
      if (key == "dt" && !detail::parse_double(value, cfg.dt)) bad_value();
      if (key == "depth" && !detail::parse_int(value, cfg.depth)) bad_value();
      if (key == "T" && !detail::parse_double(value, cfg.T)) bad_value();
      if (key == "t_list" && !detail::parse_list(value, cfg.t_list)) bad_value();
      if (key == "n0" && !detail::parse_double(value, cfg.n0)) bad_value();
      if (key == "bracket_lo" && !detail::parse_double(value, cfg.bracket_lo))
        bad_value();
      if (key == "bracket_hi" && !detail::parse_double(value, cfg.bracket_hi))
        bad_value();
      if (key == "cg_tol" && !detail::parse_double(value, cfg.cg_tol)) bad_value();
      if (key == "max_iter" && !detail::parse_int(value, cfg.max_iter))
        bad_value();
      if (key == "eps" && !detail::parse_double(value, cfg.eps)) bad_value();
      if (key == "eps_ladder" && !detail::parse_bool(value, cfg.eps_ladder))
        bad_value();
      if (key == "bisection_tol" &&
          !detail::parse_double(value, cfg.bisection_tol))
        bad_value();
      if (key == "bb_floor" && !detail::parse_double(value, cfg.bb_floor))
        bad_value();
      if (key == "dense_oracle" && !detail::parse_bool(value, cfg.dense_oracle))
        bad_value();
      if (key == "fixed_depth" && !detail::parse_int(value, cfg.fixed_depth))
        bad_value();
    } else if (section == "output") {
      if (key == "dir") cfg.out_dir = value;
    }
  }

  // semantic validation: gather every violation
  if (!(cfg.length > 0.0)) errors.push_back("domain.length must be > 0");
  if (cfg.points < 1) errors.push_back("domain.points must be >= 1");
  if (!(cfg.g_lo >= 0.0 && cfg.g_lo < cfg.g_hi && cfg.g_hi <= cfg.length))
    errors.push_back(
        "domain: control region must satisfy 0 <= g_lo < g_hi <= length "
        "(g_lo = " +
        std::to_string(cfg.g_lo) + ", g_hi = " + std::to_string(cfg.g_hi) + ")");

  if (cfg.initial_kind == InitialKind::eigenvector &&
      (cfg.eigen_index < 1 || cfg.eigen_index > cfg.points))
    errors.push_back("initial.k must lie in [1, points]");
  if (cfg.initial_kind == InitialKind::bump &&
      !(cfg.bump_x0 > 0.0 && cfg.bump_x0 < cfg.length))
    errors.push_back("initial.x0 must lie inside (0, length)");
  if (cfg.initial_kind == InitialKind::file && cfg.initial_file.empty())
    errors.push_back("initial.file must name a file when type = file");
  if (cfg.mode != RunMode::selftest && cfg.amplitude == 0.0 &&
      cfg.initial_kind != InitialKind::file)
    errors.push_back("initial.amplitude must be nonzero (y0 != 0 modes)");

  if (!(cfg.dt > 0.0)) errors.push_back("solve.dt must be > 0");
  if (cfg.depth < 0) errors.push_back("solve.depth must be >= 0");
  if (cfg.fixed_depth < 0) errors.push_back("solve.fixed_depth must be >= 0");
  if (!(cfg.cg_tol > 0.0)) errors.push_back("solve.cg_tol must be > 0");
  if (cfg.eps < 0.0) errors.push_back("solve.eps must be >= 0");
  if (!(cfg.bisection_tol > 0.0))
    errors.push_back("solve.bisection_tol must be > 0");
  if (cfg.bb_floor < 0.0) errors.push_back("solve.bb_floor must be >= 0");
  if (cfg.max_iter < 0) errors.push_back("solve.max_iter must be >= 0");

  const bool has_tlist = seen.count("solve.t_list") > 0;
  const bool has_n0 = seen.count("solve.n0") > 0;
  const bool has_T = seen.count("solve.T") > 0;
  const bool has_depth = seen.count("solve.depth") > 0 && cfg.depth > 0;
  const bool has_dt = seen.count("solve.dt") > 0;

  if (has_depth && has_T && has_dt &&
      std::abs(cfg.depth * cfg.dt - cfg.T) > 1e-12 * std::max(1.0, cfg.T))
    errors.push_back("solve: depth * dt must equal T; give dt or depth, not both");
  if (has_depth && has_T) cfg.dt = cfg.T / cfg.depth;

  switch (cfg.mode) {
    case RunMode::norm:
    case RunMode::equivalence:
      if (!(cfg.T > 0.0)) errors.push_back("solve.T must be > 0");
      if (has_tlist)
        errors.push_back("solve.t_list conflicts with mode " +
                         std::string(to_string(cfg.mode)));
      if (has_n0)
        errors.push_back("solve.n0 conflicts with mode " +
                         std::string(to_string(cfg.mode)));
      break;
    case RunMode::sweep: {
      if (!has_tlist)
        errors.push_back("sweep mode requires solve.t_list");
      bool increasing = !cfg.t_list.empty();
      for (std::size_t i = 0; i < cfg.t_list.size(); ++i) {
        if (!(cfg.t_list[i] > 0.0)) increasing = false;
        if (i > 0 && !(cfg.t_list[i] > cfg.t_list[i - 1])) increasing = false;
      }
      if (has_tlist && !increasing)
        errors.push_back(
            "solve.t_list must be strictly increasing and positive");
      if (has_n0) errors.push_back("solve.n0 conflicts with sweep mode");
      if (cfg.noise_kind != NoiseKind::constant)
        errors.push_back("sweep mode requires a constant noise coefficient");
      break;
    }
    case RunMode::time:
      if (!has_n0 || !(cfg.n0 > 0.0))
        errors.push_back("time mode requires solve.n0 > 0");
      if (!(cfg.bracket_lo > 0.0 && cfg.bracket_hi > cfg.bracket_lo))
        errors.push_back("time mode requires 0 < bracket_lo < bracket_hi");
      if (has_tlist) errors.push_back("solve.t_list conflicts with time mode");
      if (cfg.noise_kind != NoiseKind::constant)
        errors.push_back("time mode requires a constant noise coefficient");
      break;
    case RunMode::selftest:
      if (has_tlist || has_n0)
        errors.push_back("selftest mode takes no t_list/n0 fields");
      break;
  }
  if (cfg.out_dir.empty()) errors.push_back("output.dir must not be empty");

  // record which knobs stayed at defaults so runs log them
  static const char* all_keys[] = {
      "domain.length", "domain.points", "domain.g_lo", "domain.g_hi",
      "noise.a", "initial.type", "initial.k", "initial.amplitude",
      "solve.mode", "solve.dt", "solve.T", "solve.cg_tol", "solve.max_iter",
      "solve.eps", "solve.bisection_tol", "solve.bb_floor", "output.dir"};
  for (const char* k : all_keys)
    if (!seen.count(k)) result.defaulted.push_back(k);

  if (errors.empty()) result.config = cfg;
  return result;
}

}  // namespace stochum

#endif  // STOCHUM_CONFIG_HPP

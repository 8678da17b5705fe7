// stochum: batch experiment runner for minimal-norm / minimal-time null
// control of the 1-D stochastic heat equation on a scenario tree.
//
//   stochum <config> [--mode M] [--out DIR] [--dense-oracle] [--seedless]
//           [--prop-seed N]
//
// Exit status is the conjunction of the run's invariant ledger.

#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "stochum/config.hpp"
#include "stochum/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"norm/time optimal control of the stochastic heat equation"};
  std::string config_path;
  std::string mode_override;
  std::string out_override;
  bool dense_oracle = false;
  bool seedless = false;
  unsigned long long prop_seed = 0;

  app.add_option("config", config_path, "scenario config file")->required();
  app.add_option("--mode", mode_override,
                 "override [solve] mode: norm | sweep | time | equivalence | "
                 "selftest");
  app.add_option("--out", out_override, "override [output] dir");
  app.add_flag("--dense-oracle", dense_oracle,
               "cross-check the solve against the dense pseudoinverse oracle");
  app.add_flag("--seedless", seedless,
               "document that the run uses no RNG (property probes excepted)");
  CLI::Option* seed_opt =
      app.add_option("--prop-seed", prop_seed,
                     "seed for the selftest's randomized property checks");

  CLI11_PARSE(app, argc, argv);

  stochum::ConfigParseResult parsed = stochum::parse_config(config_path);
  if (!parsed.config) {
    std::fprintf(stderr, "config rejected (%zu problem%s):\n",
                 parsed.errors.size(), parsed.errors.size() == 1 ? "" : "s");
    for (const auto& e : parsed.errors)
      std::fprintf(stderr, "  - %s\n", e.c_str());
    return 2;
  }
  stochum::ScenarioConfig cfg = *parsed.config;

  if (!mode_override.empty()) {
    if (mode_override == "norm")
      cfg.mode = stochum::RunMode::norm;
    else if (mode_override == "sweep")
      cfg.mode = stochum::RunMode::sweep;
    else if (mode_override == "time")
      cfg.mode = stochum::RunMode::time;
    else if (mode_override == "equivalence")
      cfg.mode = stochum::RunMode::equivalence;
    else if (mode_override == "selftest")
      cfg.mode = stochum::RunMode::selftest;
    else {
      std::fprintf(stderr, "unknown --mode %s\n", mode_override.c_str());
      return 2;
    }
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (dense_oracle) cfg.dense_oracle = true;
  cfg.seedless = seedless;
  if (seed_opt->count() > 0) cfg.prop_seed = prop_seed;

  for (const auto& key : parsed.defaulted)
    std::fprintf(stderr, "default: %s\n", key.c_str());

  stochum::RunOutcome outcome = stochum::run(cfg);
  for (const auto& entry : outcome.record["ledger"]) {
    std::printf("%-34s %s  (measured %.3e, tolerance %.3e)\n",
                entry["name"].get<std::string>().c_str(),
                entry["status"].get<std::string>().c_str(),
                entry["measured"].get<double>(),
                entry["tolerance"].get<double>());
  }
  std::printf("%s\n", outcome.all_pass ? "PASS" : "FAIL");
  return outcome.all_pass ? 0 : 1;
}

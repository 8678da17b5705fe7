#ifndef STOCHUM_TESTS_TEST_UTIL_HPP
#define STOCHUM_TESTS_TEST_UTIL_HPP

#include <cstdlib>
#include <random>

#include "stochum/adapted_field.hpp"
#include "stochum/scenario_tree.hpp"
#include "stochum/spatial_grid.hpp"

namespace stochum::testing {

// Property tests draw from an explicit seed; STOCHUM_PROP_SEED overrides it
// so failures are reproducible from the command line.
inline std::uint64_t prop_seed() {
  if (const char* s = std::getenv("STOCHUM_PROP_SEED")) {
    return std::strtoull(s, nullptr, 10);
  }
  return 20240711ull;
}

inline SpatialField random_field(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  SpatialField f(n);
  for (auto& v : f) v = dist(rng);
  return f;
}

inline TerminalData random_terminal(std::mt19937_64& rng,
                                    const ScenarioTree& tree, int n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  TerminalData eta(tree, n);
  for (auto& v : eta.raw()) v = dist(rng);
  return eta;
}

inline AdaptedField random_control(std::mt19937_64& rng,
                                   const ScenarioTree& tree, int n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  AdaptedField u = AdaptedField::control(tree, n);
  for (auto& v : u.raw()) v = dist(rng);
  return u;
}

}  // namespace stochum::testing

#endif  // STOCHUM_TESTS_TEST_UTIL_HPP

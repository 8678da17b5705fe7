#include "stochum/forward.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

namespace stochum {
namespace {

using testing::prop_seed;
using testing::random_control;
using testing::random_field;

TEST(Forward, EigenvectorDecayClosedForm) {
  ScenarioTree tree = build_tree(4, 0.1);
  SpatialGrid g = build_grid(15, 1.0, 0.3, 0.8);
  SpatialField y0 = g.sine_mode(1);
  const double lambda1 = g.sine_eigenvalue(1);

  AdaptedField state =
      solve_forward(tree, g, CoefficientProcess::constant(0.0), y0);
  for (int l = 0; l <= tree.depth(); ++l) {
    const double factor = std::pow(1.0 + tree.dt() * lambda1, -l);
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      auto ym = state.at(l, m);
      for (int i = 0; i < 15; ++i)
        EXPECT_NEAR(ym[i], factor * y0[i], 1e-12 * std::abs(factor * y0[i]));
    }
  }
}

TEST(Forward, ZeroDataZeroProcess) {
  ScenarioTree tree = build_tree(3, 0.1);
  SpatialGrid g = build_grid(8, 1.0, 0.2, 0.7);
  SpatialField y0(8, 0.0);
  AdaptedField state =
      solve_forward(tree, g, CoefficientProcess::constant(0.7), y0);
  for (double v : state.raw()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Forward, Superposition) {
  ScenarioTree tree = build_tree(4, 0.05);
  SpatialGrid g = build_grid(9, 1.0, 0.3, 0.8);
  const CoefficientProcess a = CoefficientProcess::constant(0.4);
  std::mt19937_64 rng(prop_seed());
  SpatialField y0 = random_field(rng, 9);
  AdaptedField u = random_control(rng, tree, 9);
  SpatialField zero(9, 0.0);

  AdaptedField both = solve_forward(tree, g, a, y0, &u);
  AdaptedField free_part = solve_forward(tree, g, a, y0);
  AdaptedField control_part = solve_forward(tree, g, a, zero, &u);

  const auto& b = both.raw();
  const auto& f = free_part.raw();
  const auto& c = control_part.raw();
  for (std::size_t i = 0; i < b.size(); ++i)
    EXPECT_NEAR(b[i], f[i] + c[i], 1e-13 * std::max(1.0, std::abs(b[i])));
}

TEST(Forward, TerminalStateShape) {
  ScenarioTree tree = build_tree(1, 0.2);
  SpatialGrid g = build_grid(4, 1.0, 0.0, 1.0);
  SpatialField y0 = g.sine_mode(1);
  AdaptedField state =
      solve_forward(tree, g, CoefficientProcess::constant(0.0), y0);
  TerminalData term = terminal_state(tree, state);
  EXPECT_EQ(term.leaves(), 2u);

  const double factor = 1.0 / (1.0 + tree.dt() * g.sine_eigenvalue(1));
  for (std::size_t leaf = 0; leaf < 2; ++leaf)
    for (int i = 0; i < 4; ++i)
      EXPECT_NEAR(term.at(leaf)[i], factor * y0[i], 1e-13);

  AdaptedField zero_state =
      solve_forward(tree, g, CoefficientProcess::constant(0.3),
                    SpatialField(4, 0.0));
  TerminalData zt = terminal_state(tree, zero_state);
  for (double v : zt.raw()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Forward, MeanSquareStability) {
  ScenarioTree tree = build_tree(6, 0.1);
  SpatialGrid g = build_grid(10, 1.0, 0.2, 0.9);
  const double a = 0.8;
  std::mt19937_64 rng(prop_seed());
  SpatialField y0 = random_field(rng, 10);
  AdaptedField state =
      solve_forward(tree, g, CoefficientProcess::constant(a), y0);

  const double y0_sq = g.inner(y0, y0);
  for (int l = 0; l <= tree.depth(); ++l) {
    const double nl = level_norm(tree, g, state, l);
    const double bound = std::pow(1.0 + a * a * tree.dt(), l) * y0_sq;
    EXPECT_LE(nl * nl, bound * (1.0 + 1e-12));
  }
}

TEST(Forward, DeterministicReduction) {
  // a = 0 with deterministic data: all nodes at a level carry equal fields.
  ScenarioTree tree = build_tree(5, 0.08);
  SpatialGrid g = build_grid(6, 1.0, 0.3, 0.8);
  std::mt19937_64 rng(prop_seed());
  SpatialField y0 = random_field(rng, 6);
  AdaptedField u = AdaptedField::control(tree, 6);
  for (int l = 0; l < tree.depth(); ++l) {
    SpatialField ul = random_field(rng, 6);
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      auto um = u.at(l, m);
      for (int i = 0; i < 6; ++i) um[i] = ul[i];
    }
  }
  AdaptedField state =
      solve_forward(tree, g, CoefficientProcess::constant(0.0), y0, &u);
  for (int l = 0; l <= tree.depth(); ++l) {
    auto ref = state.at(l, 0);
    for (std::size_t m = 1; m < tree.level_size(l); ++m) {
      auto ym = state.at(l, m);
      for (int i = 0; i < 6; ++i)
        EXPECT_NEAR(ym[i], ref[i], 1e-13 * std::max(1.0, std::abs(ref[i])));
    }
  }
}

TEST(Forward, EnergyEstimate) {
  // ||y||_{L^2_F} <= e^{a^2 T / 2} max(1, sqrt(T)) (||y0|| + ||u||) for T <= 1.
  std::mt19937_64 rng(prop_seed());
  for (double T : {0.5, 1.0}) {
    ScenarioTree tree = build_tree(5, T / 5.0);
    SpatialGrid g = build_grid(8, 1.0, 0.3, 0.8);
    const double a = 0.6;
    SpatialField y0 = random_field(rng, 8);
    AdaptedField u = random_control(rng, tree, 8);
    AdaptedField state =
        solve_forward(tree, g, CoefficientProcess::constant(a), y0, &u);
    const double c_scheme =
        std::exp(a * a * T / 2.0) * std::max(1.0, std::sqrt(T));
    const double lhs = process_norm(tree, g, state);
    const double rhs =
        c_scheme * (g.norm(y0) + process_norm(tree, g, u));
    EXPECT_LE(lhs, rhs);
  }
}

TEST(Forward, NonAnticipation) {
  // Changing the coefficient inside one subtree after level 1 must not move
  // states at or before level 1.
  ScenarioTree tree = build_tree(4, 0.1);
  SpatialGrid g = build_grid(6, 1.0, 0.2, 0.8);
  std::mt19937_64 rng(prop_seed());
  SpatialField y0 = random_field(rng, 6);

  std::vector<std::vector<double>> base(tree.depth());
  for (int l = 0; l < tree.depth(); ++l)
    base[l].assign(tree.level_size(l), 0.3);
  auto modified = base;
  modified[2][0] = -0.9;  // deep inside the down-down subtree

  AdaptedField s1 =
      solve_forward(tree, g, CoefficientProcess::per_node(base), y0);
  AdaptedField s2 =
      solve_forward(tree, g, CoefficientProcess::per_node(modified), y0);
  for (int l = 0; l <= 2; ++l)
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      auto a1 = s1.at(l, m);
      auto a2 = s2.at(l, m);
      for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(a1[i], a2[i]);
    }
}

TEST(Forward, BlowUpIsReportedNotClamped) {
  ScenarioTree tree = build_tree(4, 0.1);
  SpatialGrid g = build_grid(4, 1.0, 0.0, 1.0);
  SpatialField y0(4, 1e300);
  EXPECT_THROW(
      solve_forward(tree, g, CoefficientProcess::constant(1e10), y0),
      std::runtime_error);
  SpatialField bad = {1.0, std::nan(""), 0.0, 0.0};
  EXPECT_THROW(solve_forward(tree, g, CoefficientProcess::constant(0.0), bad),
               std::invalid_argument);
}

}  // namespace
}  // namespace stochum

#include "stochum/spatial_grid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stochum/adapted_field.hpp"
#include "stochum/scenario_tree.hpp"
#include "test_util.hpp"

namespace stochum {
namespace {

using testing::prop_seed;
using testing::random_field;

TEST(SpatialGrid, BuildGeometry) {
  SpatialGrid g = build_grid(3, 1.0, 0.25, 0.75);
  EXPECT_DOUBLE_EQ(g.h(), 0.25);
  EXPECT_DOUBLE_EQ(g.x(0), 0.25);
  EXPECT_DOUBLE_EQ(g.x(2), 0.75);

  SpatialGrid whole = build_grid(1, 2.0, 0.0, 2.0);
  EXPECT_DOUBLE_EQ(whole.h(), 1.0);
  EXPECT_EQ(whole.control_point_count(), 1u);

  SpatialGrid g9 = build_grid(9, 1.0, 0.3, 0.8);
  EXPECT_DOUBLE_EQ(g9.h(), 0.1);
  // closed-interval membership: x = 0.3..0.8 inclusive
  EXPECT_EQ(g9.control_point_count(), 6u);

  EXPECT_THROW(build_grid(3, 1.0, 0.7, 0.4), std::invalid_argument);
  EXPECT_THROW(build_grid(0, 1.0, 0.0, 1.0), std::invalid_argument);
}

TEST(SpatialGrid, MaskConvention) {
  // Endpoints of G landing on grid points are included (closed interval).
  SpatialGrid g = build_grid(3, 1.0, 0.25, 0.75);
  SpatialField f = g.control_mask({1.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(f[0], 1.0);
  EXPECT_DOUBLE_EQ(f[1], 1.0);
  EXPECT_DOUBLE_EQ(f[2], 1.0);

  SpatialGrid inner = build_grid(3, 1.0, 0.26, 0.74);
  SpatialField fi = inner.control_mask({1.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(fi[0], 0.0);
  EXPECT_DOUBLE_EQ(fi[1], 1.0);
  EXPECT_DOUBLE_EQ(fi[2], 0.0);
}

TEST(SpatialGrid, MaskIsIdempotentProjection) {
  SpatialGrid g = build_grid(17, 1.0, 0.2, 0.6);
  std::mt19937_64 rng(prop_seed());
  SpatialField f = random_field(rng, 17);
  SpatialField once = g.control_mask(f);
  SpatialField twice = g.control_mask(once);
  for (int i = 0; i < 17; ++i) EXPECT_DOUBLE_EQ(once[i], twice[i]);

  SpatialGrid whole = build_grid(17, 1.0, 0.0, 1.0);
  SpatialField id = whole.control_mask(f);
  for (int i = 0; i < 17; ++i) EXPECT_DOUBLE_EQ(id[i], f[i]);

  // orthogonal projection: <mask f, g> = <f, mask g>
  SpatialField h = random_field(rng, 17);
  EXPECT_NEAR(g.inner(g.control_mask(f), h), g.inner(f, g.control_mask(h)),
              1e-14);
}

TEST(SpatialGrid, LaplacianStencil) {
  SpatialGrid g = build_grid(3, 1.0, 0.0, 1.0);
  SpatialField out = g.laplacian({0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(out[0], 16.0);
  EXPECT_DOUBLE_EQ(out[1], -32.0);
  EXPECT_DOUBLE_EQ(out[2], 16.0);

  SpatialField zero = g.laplacian({0.0, 0.0, 0.0});
  for (double v : zero) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(SpatialGrid, LaplacianSineEigenvector) {
  SpatialGrid g = build_grid(15, 1.0, 0.0, 1.0);
  SpatialField f = g.sine_mode(1);
  const double lambda1 = g.sine_eigenvalue(1);
  SpatialField lap = g.laplacian(f);
  for (int i = 0; i < 15; ++i)
    EXPECT_NEAR(lap[i], -lambda1 * f[i], 1e-12 * std::abs(lambda1 * f[i]));
}

TEST(SpatialGrid, LaplacianSymmetricNegativeDefinite) {
  SpatialGrid g = build_grid(12, 2.0, 0.5, 1.5);
  std::mt19937_64 rng(prop_seed());
  for (int trial = 0; trial < 20; ++trial) {
    SpatialField f = random_field(rng, 12);
    SpatialField h = random_field(rng, 12);
    const double lfh = g.inner(g.laplacian(f), h);
    const double flh = g.inner(f, g.laplacian(h));
    EXPECT_NEAR(lfh, flh, 1e-12 * std::max(std::abs(lfh), 1.0));
    EXPECT_LT(g.inner(g.laplacian(f), f), 0.0);
  }
}

TEST(SpatialGrid, InnerProduct) {
  SpatialGrid g = build_grid(3, 1.0, 0.0, 1.0);
  SpatialField ones = {1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(g.inner(ones, ones), 0.75);

  std::mt19937_64 rng(prop_seed());
  for (int trial = 0; trial < 20; ++trial) {
    SpatialField f = random_field(rng, 3);
    SpatialField h = random_field(rng, 3);
    EXPECT_GE(g.inner(f, f), 0.0);
    // Cauchy-Schwarz
    const double fg = g.inner(f, h);
    EXPECT_LE(fg * fg, g.inner(f, f) * g.inner(h, h) * (1.0 + 1e-14));
  }
  SpatialField z = {0.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(g.inner(z, z), 0.0);
}

TEST(ImplicitHeat, SolveMatchesDirectResidual) {
  SpatialGrid g = build_grid(9, 1.0, 0.0, 1.0);
  const double dt = 0.05;
  ImplicitHeatSolver heat(g, dt);
  std::mt19937_64 rng(prop_seed());
  SpatialField rhs = random_field(rng, 9);
  SpatialField x = rhs;
  heat.solve_in_place(x);
  // (I - dt Lap) x == rhs
  SpatialField lx = g.laplacian(x);
  for (int i = 0; i < 9; ++i)
    EXPECT_NEAR(x[i] - dt * lx[i], rhs[i], 1e-12);
}

TEST(ProcessNorm, ZeroConstantAndScaling) {
  ScenarioTree tree = build_tree(3, 0.125);
  SpatialGrid g = build_grid(7, 1.0, 0.25, 0.75);

  AdaptedField zero = AdaptedField::control(tree, 7);
  EXPECT_DOUBLE_EQ(process_norm(tree, g, zero), 0.0);

  const double c = 2.5;
  AdaptedField constant = AdaptedField::control(tree, 7);
  for (auto& v : constant.raw()) v = c;
  const double expected =
      c * std::sqrt(tree.horizon() * g.length() * 7.0 / 8.0);
  EXPECT_NEAR(process_norm(tree, g, constant), expected, 1e-13 * expected);

  std::mt19937_64 rng(prop_seed());
  AdaptedField p = testing::random_control(rng, tree, 7);
  const double base = process_norm(tree, g, p);
  AdaptedField scaled = p;
  for (auto& v : scaled.raw()) v *= -3.5;
  EXPECT_NEAR(process_norm(tree, g, scaled), 3.5 * base, 1e-12 * base);
}

TEST(ProcessNorm, SquaredNormAdditiveAcrossLevels) {
  ScenarioTree tree = build_tree(4, 0.1);
  SpatialGrid g = build_grid(5, 1.0, 0.0, 1.0);
  std::mt19937_64 rng(prop_seed());
  AdaptedField p = testing::random_control(rng, tree, 5);

  AdaptedField head = p;
  AdaptedField tail = p;
  for (int l = 0; l < tree.depth(); ++l)
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      auto h = head.at(l, m);
      auto t = tail.at(l, m);
      for (int i = 0; i < 5; ++i) {
        if (l < 2)
          t[i] = 0.0;
        else
          h[i] = 0.0;
      }
    }
  EXPECT_NEAR(process_norm_sq(tree, g, p),
              process_norm_sq(tree, g, head) + process_norm_sq(tree, g, tail),
              1e-13);
}

}  // namespace
}  // namespace stochum

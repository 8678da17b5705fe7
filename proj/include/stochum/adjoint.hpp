#ifndef STOCHUM_ADJOINT_HPP
#define STOCHUM_ADJOINT_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "stochum/adapted_field.hpp"
#include "stochum/forward.hpp"
#include "stochum/scenario_tree.hpp"
#include "stochum/spatial_grid.hpp"

namespace stochum {

// Solution pair of the discrete backward equation: z on levels 0..depth and
// the martingale integrand Zint on levels 0..depth-1. On a binary tree the
// martingale representation is exact: z_child = E[z_child] + Zint dW.
struct AdjointPair {
  AdaptedField z;
  AdaptedField zint;

  AdjointPair(const ScenarioTree& tree, int n)
      : z(tree, n, 0, tree.depth(), FieldRole::adjoint),
        zint(AdaptedField::integrand(tree, n)) {}
};

// Backward sweep defined as the exact algebraic transpose of the forward
// one-step map:
//
//   w_child = (1 + a(l,m) dW(m->child)) z_child     (noise transpose)
//   v       = E[w | node m]                         (child average)
//   z_m     = (I - dt Lap_h)^{-1} v                 (Lap_h symmetric)
//   Zint_m  = E[z_child dW] / dt
//
// With this definition the composed control-to-terminal map and the
// observation map are adjoint by construction, so the duality pairing
// E<y(T;0,v), eta> = E int <v, chi_G z> dt holds to rounding error.
inline AdjointPair solve_adjoint(const ScenarioTree& tree,
                                 const SpatialGrid& grid,
                                 const CoefficientProcess& a,
                                 const TerminalData& eta) {
  const int n = grid.n();
  if (eta.n() != n || eta.leaves() != tree.leaf_count())
    throw std::invalid_argument("solve_adjoint: terminal data shape mismatch");

  const ImplicitHeatSolver heat(grid, tree.dt());
  AdjointPair pair(tree, n);

  for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    auto dst = pair.z.at(tree.depth(), leaf);
    auto src = eta.at(leaf);
    for (int i = 0; i < n; ++i) dst[i] = src[i];
  }

  std::vector<double> work(n);
  const int children = tree.branching();

  for (int l = tree.depth() - 1; l >= 0; --l) {
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      const double am = a.at(l, m);
      auto zm = pair.z.at(l, m);
      auto zi = pair.zint.at(l, m);
      if (children == 2) {
        auto zlo = pair.z.at(l + 1, tree.child(m, 0));  // down edge
        auto zhi = pair.z.at(l + 1, tree.child(m, 1));  // up edge
        const double dw = tree.increment_to(tree.child(m, 1));
        for (int i = 0; i < n; ++i) {
          work[i] = 0.5 * ((1.0 + am * dw) * zhi[i] + (1.0 - am * dw) * zlo[i]);
          zi[i] = 0.5 * dw * (zhi[i] - zlo[i]) / tree.dt();
        }
      } else {
        auto zc = pair.z.at(l + 1, tree.child(m, 0));
        for (int i = 0; i < n; ++i) {
          work[i] = zc[i];
          zi[i] = 0.0;
        }
      }
      heat.solve_in_place(work);
      for (int i = 0; i < n; ++i) zm[i] = work[i];
    }
  }
  return pair;
}

// chi_G z on levels 0..depth-1: the observation entering the HUM functional,
// and the adjoint of the control-to-terminal map.
inline AdaptedField observe(const ScenarioTree& tree, const SpatialGrid& grid,
                            const AdjointPair& pair) {
  AdaptedField obs = AdaptedField::control(tree, grid.n());
  for (int l = 0; l < tree.depth(); ++l) {
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      auto src = pair.z.at(l, m);
      auto dst = obs.at(l, m);
      for (int i = 0; i < grid.n(); ++i) dst[i] = src[i];
      grid.apply_mask(dst);
    }
  }
  return obs;
}

// E<y0, z(0)>; level 0 has a single node so the expectation is trivial.
inline double initial_pairing(const SpatialGrid& grid, const AdjointPair& pair,
                              const SpatialField& y0) {
  return grid.inner(y0, pair.z.at(0, 0));
}

}  // namespace stochum

#endif  // STOCHUM_ADJOINT_HPP

#ifndef STOCHUM_FORWARD_HPP
#define STOCHUM_FORWARD_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "stochum/adapted_field.hpp"
#include "stochum/scenario_tree.hpp"
#include "stochum/spatial_grid.hpp"

namespace stochum {

// One time step of the controlled forward equation at node m, level l:
//
//   (I - dt Lap_h) yhat = y_m + dt chi_G u_m
//   y_child = yhat + a(l,m) dW(m->child) yhat
//
// The Laplacian is implicit (unconditionally stable stiff part), the
// multiplicative noise is explicit on the post-step state, and a is
// evaluated at the parent node (Ito convention). The control is masked at
// injection, so only its G-restriction ever enters the dynamics.
inline AdaptedField solve_forward(const ScenarioTree& tree,
                                  const SpatialGrid& grid,
                                  const CoefficientProcess& a,
                                  const SpatialField& y0,
                                  const AdaptedField* u = nullptr) {
  const int n = grid.n();
  if (y0.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("solve_forward: y0 size mismatch");
  for (double v : y0)
    if (!std::isfinite(v))
      throw std::invalid_argument("solve_forward: y0 must be finite");
  if (u) {
    if (u->n() != n)
      throw std::invalid_argument("solve_forward: control width mismatch");
    if (u->first_level() != 0 || u->last_level() < tree.depth() - 1)
      throw std::invalid_argument(
          "solve_forward: control must cover levels 0..depth-1");
  }

  const ImplicitHeatSolver heat(grid, tree.dt());
  AdaptedField state = AdaptedField::state(tree, n);
  auto root = state.at(0, 0);
  for (int i = 0; i < n; ++i) root[i] = y0[i];

  std::vector<double> work(n);
  const auto mask = grid.mask();
  const int children = tree.branching();

  for (int l = 0; l < tree.depth(); ++l) {
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      auto ym = state.at(l, m);
      if (u) {
        auto um = u->at(l, m);
        for (int i = 0; i < n; ++i)
          work[i] = ym[i] + tree.dt() * mask[i] * um[i];
      } else {
        for (int i = 0; i < n; ++i) work[i] = ym[i];
      }
      heat.solve_in_place(work);

      const double am = a.at(l, m);
      for (int c = 0; c < children; ++c) {
        const std::size_t ci = tree.child(m, c);
        const double factor = 1.0 + am * tree.increment_to(ci);
        auto yc = state.at(l + 1, ci);
        for (int i = 0; i < n; ++i) {
          const double v = factor * work[i];
          if (!std::isfinite(v))
            throw std::runtime_error(
                "solve_forward: non-finite state (blow-up at level " +
                std::to_string(l + 1) + ")");
          yc[i] = v;
        }
      }
    }
  }
  return state;
}

// Leaf slice of a state process; the discrete y(T).
inline TerminalData terminal_state(const ScenarioTree& tree,
                                   const AdaptedField& state) {
  if (state.last_level() != tree.depth())
    throw std::invalid_argument("terminal_state: state must reach level depth");
  TerminalData out(tree, state.n());
  for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    auto src = state.at(tree.depth(), leaf);
    auto dst = out.at(leaf);
    for (int i = 0; i < state.n(); ++i) dst[i] = src[i];
  }
  return out;
}

}  // namespace stochum

#endif  // STOCHUM_FORWARD_HPP

#ifndef STOCHUM_SCENARIO_TREE_HPP
#define STOCHUM_SCENARIO_TREE_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace stochum {

// Non-recombining binomial discretization of the filtered probability space.
//
// Level l holds 2^l nodes; node k at level l has children 2k (down edge,
// increment -sqrt(dt)) and 2k+1 (up edge, increment +sqrt(dt)). Both edges
// carry probability 1/2, so every node at level l has probability 2^-l and
// conditional expectations are plain child averages. The tree enumerates all
// outcomes; nothing is sampled.
//
// The flat index of node k at level l is (2^l - 1) + k; the l low bits of k,
// read from the most significant, are the path from the root (0 = down,
// 1 = up). This encoding is what result files use.
//
// A single-path variant (branching factor 1, zero increments) exists as the
// deterministic reference for a == 0 runs; it is not produced by build_tree.
class ScenarioTree {
 public:
  static constexpr std::size_t kDefaultNodeCap = std::size_t{1} << 21;

  static ScenarioTree binomial(int depth, double dt,
                               std::size_t node_cap = kDefaultNodeCap) {
    return ScenarioTree(depth, dt, 2, node_cap);
  }

  // Degenerate one-node-per-level tree: probability 1, increments 0.
  static ScenarioTree single_path(int depth, double dt) {
    return ScenarioTree(depth, dt, 1, kDefaultNodeCap);
  }

  int depth() const { return depth_; }
  double dt() const { return dt_; }
  double horizon() const { return depth_ * dt_; }
  int branching() const { return branching_; }

  std::size_t level_size(int level) const {
    check_level(level);
    return branching_ == 2 ? (std::size_t{1} << level) : 1;
  }

  std::size_t node_count() const {
    return branching_ == 2 ? (std::size_t{1} << (depth_ + 1)) - 1
                           : static_cast<std::size_t>(depth_) + 1;
  }

  // Number of nodes on levels 0..depth-1 (the control/observation window).
  std::size_t interior_node_count() const {
    return branching_ == 2 ? (std::size_t{1} << depth_) - 1
                           : static_cast<std::size_t>(depth_);
  }

  std::size_t leaf_count() const { return level_size(depth_); }

  // All nodes at a level share the same probability.
  double probability(int level) const {
    check_level(level);
    return branching_ == 2 ? std::ldexp(1.0, -level) : 1.0;
  }

  std::size_t child(std::size_t node, int which) const {
    return branching_ == 2 ? 2 * node + static_cast<std::size_t>(which) : node;
  }

  // Brownian increment on the edge into a child node: odd child index = up.
  double increment_to(std::size_t child_index) const {
    if (branching_ == 1) return 0.0;
    return (child_index & 1u) ? sqrt_dt_ : -sqrt_dt_;
  }

  // E[. | F_l] at a node: average of the two child values.
  double conditional_expectation(int parent_level,
                                 std::span<const double> child_level_values,
                                 std::size_t parent_index) const {
    if (parent_level < 0 || parent_level >= depth_)
      throw std::invalid_argument(
          "conditional_expectation: node has no children");
    if (child_level_values.size() != level_size(parent_level + 1))
      throw std::invalid_argument(
          "conditional_expectation: child level size mismatch");
    if (parent_index >= level_size(parent_level))
      throw std::invalid_argument("conditional_expectation: bad node index");
    if (branching_ == 1) return child_level_values[parent_index];
    return 0.5 * (child_level_values[2 * parent_index] +
                  child_level_values[2 * parent_index + 1]);
  }

  // E[.] over one level: probability-weighted sum.
  double expectation(int level, std::span<const double> values) const {
    if (values.size() != level_size(level))
      throw std::invalid_argument("expectation: level size mismatch");
    double sum = 0.0;
    for (double v : values) sum += v;
    return probability(level) * sum;
  }

 private:
  ScenarioTree(int depth, double dt, int branching, std::size_t node_cap)
      : depth_(depth), dt_(dt), branching_(branching),
        sqrt_dt_(std::sqrt(dt)) {
    if (depth < 1) throw std::invalid_argument("ScenarioTree: depth must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt))
      throw std::invalid_argument("ScenarioTree: dt must be positive");
    if (branching == 2) {
      if (depth >= 63 || ((std::size_t{1} << (depth + 1)) - 1) > node_cap)
        throw std::invalid_argument(
            "ScenarioTree: depth " + std::to_string(depth) +
            " exceeds the node cap; instance is not desk-scale");
    }
  }

  void check_level(int level) const {
    if (level < 0 || level > depth_)
      throw std::invalid_argument("ScenarioTree: level out of range");
  }

  int depth_;
  double dt_;
  int branching_;
  double sqrt_dt_;
};

inline ScenarioTree build_tree(int depth, double dt,
                               std::size_t node_cap =
                                   ScenarioTree::kDefaultNodeCap) {
  return ScenarioTree::binomial(depth, dt, node_cap);
}

}  // namespace stochum

#endif  // STOCHUM_SCENARIO_TREE_HPP

#ifndef STOCHUM_ADAPTED_FIELD_HPP
#define STOCHUM_ADAPTED_FIELD_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "stochum/scenario_tree.hpp"
#include "stochum/spatial_grid.hpp"

namespace stochum {

enum class FieldRole { state, control, adjoint, integrand };

// A spatial field attached to every tree node over a contiguous level range.
// Adaptedness is structural: the value stored at a node is indexed by the
// path to that node and by nothing else.
class AdaptedField {
 public:
  AdaptedField(const ScenarioTree& tree, int n, int first_level,
               int last_level, FieldRole role)
      : n_(n), first_level_(first_level), last_level_(last_level),
        role_(role) {
    if (first_level < 0 || last_level > tree.depth() ||
        first_level > last_level)
      throw std::invalid_argument("AdaptedField: bad level range");
    level_offset_.resize(last_level - first_level + 1);
    std::size_t off = 0;
    for (int l = first_level; l <= last_level; ++l) {
      level_offset_[l - first_level] = off;
      level_nodes_.push_back(tree.level_size(l));
      off += tree.level_size(l) * static_cast<std::size_t>(n);
    }
    data_.assign(off, 0.0);
  }

  // State process: levels 0..depth.
  static AdaptedField state(const ScenarioTree& tree, int n) {
    return AdaptedField(tree, n, 0, tree.depth(), FieldRole::state);
  }

  // Control / observation / integrand processes: levels 0..depth-1
  // (left-endpoint quadrature in time).
  static AdaptedField control(const ScenarioTree& tree, int n) {
    return AdaptedField(tree, n, 0, tree.depth() - 1, FieldRole::control);
  }

  static AdaptedField integrand(const ScenarioTree& tree, int n) {
    return AdaptedField(tree, n, 0, tree.depth() - 1, FieldRole::integrand);
  }

  int n() const { return n_; }
  int first_level() const { return first_level_; }
  int last_level() const { return last_level_; }
  FieldRole role() const { return role_; }

  std::size_t level_size(int level) const {
    return level_nodes_[check(level)];
  }

  std::span<double> at(int level, std::size_t node) {
    return {data_.data() + offset(level, node), static_cast<std::size_t>(n_)};
  }
  std::span<const double> at(int level, std::size_t node) const {
    return {data_.data() + offset(level, node), static_cast<std::size_t>(n_)};
  }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

 private:
  int check(int level) const {
    if (level < first_level_ || level > last_level_)
      throw std::invalid_argument("AdaptedField: level out of range");
    return level - first_level_;
  }
  std::size_t offset(int level, std::size_t node) const {
    const int li = check(level);
    if (node >= level_nodes_[li])
      throw std::invalid_argument("AdaptedField: node out of range");
    return level_offset_[li] + node * static_cast<std::size_t>(n_);
  }

  int n_;
  int first_level_, last_level_;
  FieldRole role_;
  std::vector<std::size_t> level_offset_;
  std::vector<std::size_t> level_nodes_;
  std::vector<double> data_;
};

// One spatial field per leaf: the discretization of terminal data in
// L^2_{F_T}(Omega; L^2(D)).
class TerminalData {
 public:
  TerminalData(const ScenarioTree& tree, int n)
      : n_(n), leaves_(tree.leaf_count()),
        leaf_probability_(tree.probability(tree.depth())),
        data_(leaves_ * static_cast<std::size_t>(n), 0.0) {}

  int n() const { return n_; }
  std::size_t leaves() const { return leaves_; }
  double leaf_probability() const { return leaf_probability_; }

  std::span<double> at(std::size_t leaf) {
    return {data_.data() + index(leaf), static_cast<std::size_t>(n_)};
  }
  std::span<const double> at(std::size_t leaf) const {
    return {data_.data() + index(leaf), static_cast<std::size_t>(n_)};
  }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

 private:
  std::size_t index(std::size_t leaf) const {
    if (leaf >= leaves_) throw std::invalid_argument("TerminalData: bad leaf");
    return leaf * static_cast<std::size_t>(n_);
  }

  int n_;
  std::size_t leaves_;
  double leaf_probability_;
  std::vector<double> data_;
};

// Bounded adapted noise coefficient a(t). Constant, per-level, or per-node.
class CoefficientProcess {
 public:
  static CoefficientProcess constant(double a) {
    CoefficientProcess c;
    c.mode_ = Mode::constant;
    c.value_ = a;
    c.bound_ = std::abs(a);
    c.validate();
    return c;
  }

  static CoefficientProcess per_level(std::vector<double> a) {
    CoefficientProcess c;
    c.mode_ = Mode::per_level;
    c.levels_ = std::move(a);
    for (double v : c.levels_) c.bound_ = std::max(c.bound_, std::abs(v));
    c.validate();
    return c;
  }

  // nodes[level][node] for levels 0..depth-1.
  static CoefficientProcess per_node(std::vector<std::vector<double>> a) {
    CoefficientProcess c;
    c.mode_ = Mode::per_node;
    c.nodes_ = std::move(a);
    for (const auto& lvl : c.nodes_)
      for (double v : lvl) c.bound_ = std::max(c.bound_, std::abs(v));
    c.validate();
    return c;
  }

  double at(int level, std::size_t node) const {
    switch (mode_) {
      case Mode::constant:
        return value_;
      case Mode::per_level:
        if (static_cast<std::size_t>(level) >= levels_.size())
          throw std::invalid_argument("CoefficientProcess: level out of range");
        return levels_[level];
      case Mode::per_node:
        if (static_cast<std::size_t>(level) >= nodes_.size() ||
            node >= nodes_[level].size())
          throw std::invalid_argument("CoefficientProcess: node out of range");
        return nodes_[level][node];
    }
    return 0.0;
  }

  double bound() const { return bound_; }

 private:
  enum class Mode { constant, per_level, per_node };

  void validate() const {
    if (!std::isfinite(bound_))
      throw std::invalid_argument("CoefficientProcess: coefficient unbounded");
  }

  Mode mode_ = Mode::constant;
  double value_ = 0.0;
  double bound_ = 0.0;
  std::vector<double> levels_;
  std::vector<std::vector<double>> nodes_;
};

// ||p||_{L^2_F(0,T;L^2(D))}^2 = sum_{l=0}^{depth-1} dt E[<p(l),p(l)>].
inline double process_norm_sq(const ScenarioTree& tree, const SpatialGrid& grid,
                              const AdaptedField& p) {
  if (p.first_level() != 0 || p.last_level() < tree.depth() - 1)
    throw std::invalid_argument("process_norm: field must cover levels 0..depth-1");
  double total = 0.0;
  for (int l = 0; l < tree.depth(); ++l) {
    double level_sum = 0.0;
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      auto f = p.at(l, m);
      double s = 0.0;
      for (double v : f) s += v * v;
      level_sum += s;
    }
    total += tree.dt() * tree.probability(l) * grid.quad_weight() * level_sum;
  }
  return total;
}

inline double process_norm(const ScenarioTree& tree, const SpatialGrid& grid,
                           const AdaptedField& p) {
  return std::sqrt(process_norm_sq(tree, grid, p));
}

// E int_0^T <u(t), v(t)> dt over levels 0..depth-1.
inline double process_inner(const ScenarioTree& tree, const SpatialGrid& grid,
                            const AdaptedField& u, const AdaptedField& v) {
  double total = 0.0;
  for (int l = 0; l < tree.depth(); ++l) {
    double level_sum = 0.0;
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      auto a = u.at(l, m);
      auto b = v.at(l, m);
      double s = 0.0;
      for (int i = 0; i < u.n(); ++i) s += a[i] * b[i];
      level_sum += s;
    }
    total += tree.dt() * tree.probability(l) * grid.quad_weight() * level_sum;
  }
  return total;
}

// sqrt(E||p(level)||^2): the conditional L^2 norm of one time slice.
inline double level_norm(const ScenarioTree& tree, const SpatialGrid& grid,
                         const AdaptedField& p, int level) {
  double s = 0.0;
  for (std::size_t m = 0; m < tree.level_size(level); ++m) {
    auto f = p.at(level, m);
    for (double v : f) s += v * v;
  }
  return std::sqrt(tree.probability(level) * grid.quad_weight() * s);
}

// E<eta, xi> over the leaves; the terminal-space inner product.
inline double leaf_inner(const SpatialGrid& grid, const TerminalData& a,
                         const TerminalData& b) {
  if (a.leaves() != b.leaves() || a.n() != b.n())
    throw std::invalid_argument("leaf_inner: shape mismatch");
  double s = 0.0;
  const auto& x = a.raw();
  const auto& y = b.raw();
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return a.leaf_probability() * grid.quad_weight() * s;
}

inline double leaf_norm(const SpatialGrid& grid, const TerminalData& a) {
  return std::sqrt(leaf_inner(grid, a, a));
}

}  // namespace stochum

#endif  // STOCHUM_ADAPTED_FIELD_HPP

#include "stochum/scenario_tree.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace stochum {
namespace {

TEST(ScenarioTree, BuildCountsAndProbabilities) {
  ScenarioTree tree = build_tree(2, 0.5);
  EXPECT_EQ(tree.node_count(), 7u);  // 1 + 2 + 4
  EXPECT_EQ(tree.leaf_count(), 4u);
  EXPECT_DOUBLE_EQ(tree.probability(2), 0.25);
  EXPECT_DOUBLE_EQ(tree.increment_to(1), std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(tree.increment_to(2), -std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(tree.horizon(), 1.0);
}

TEST(ScenarioTree, IncrementMomentsDepthOne) {
  ScenarioTree tree = build_tree(1, 1.0);
  EXPECT_DOUBLE_EQ(tree.increment_to(tree.child(0, 1)), 1.0);
  EXPECT_DOUBLE_EQ(tree.increment_to(tree.child(0, 0)), -1.0);
  // E[dW] = 0 and E[dW^2] = dt, exactly.
  std::vector<double> dw = {tree.increment_to(0), tree.increment_to(1)};
  EXPECT_DOUBLE_EQ(tree.conditional_expectation(0, dw, 0), 0.0);
  std::vector<double> dw2 = {dw[0] * dw[0], dw[1] * dw[1]};
  EXPECT_DOUBLE_EQ(tree.conditional_expectation(0, dw2, 0), 1.0);
}

TEST(ScenarioTree, GeometricNodeCount) {
  ScenarioTree tree = build_tree(10, 0.01);
  EXPECT_EQ(tree.node_count(), 2047u);
  EXPECT_NEAR(tree.horizon(), 0.1, 1e-15);
}

TEST(ScenarioTree, NodeCapRejectsLargeDepth) {
  EXPECT_THROW(build_tree(40, 0.01), std::invalid_argument);
  EXPECT_THROW(build_tree(8, 0.1, /*node_cap=*/100), std::invalid_argument);
  EXPECT_THROW(build_tree(0, 0.1), std::invalid_argument);
  EXPECT_THROW(build_tree(3, -1.0), std::invalid_argument);
}

TEST(ScenarioTree, ConditionalExpectationIsChildMean) {
  ScenarioTree tree = build_tree(2, 0.25);
  std::vector<double> level1 = {1.0, 3.0};
  EXPECT_DOUBLE_EQ(tree.conditional_expectation(0, level1, 0), 2.0);
  std::vector<double> level2 = {7.0, 7.0, -2.0, 4.0};
  EXPECT_DOUBLE_EQ(tree.conditional_expectation(1, level2, 0), 7.0);
  EXPECT_DOUBLE_EQ(tree.conditional_expectation(1, level2, 1), 1.0);
}

TEST(ScenarioTree, ConditionalExpectationMisuse) {
  ScenarioTree tree = build_tree(2, 0.25);
  std::vector<double> leaves = {1.0, 2.0, 3.0, 4.0};
  // a leaf has no children
  EXPECT_THROW(tree.conditional_expectation(2, leaves, 0),
               std::invalid_argument);
  std::vector<double> short_level = {1.0};
  EXPECT_THROW(tree.conditional_expectation(1, short_level, 0),
               std::invalid_argument);
}

TEST(ScenarioTree, ExpectationWeightedSums) {
  ScenarioTree tree = build_tree(2, 0.25);
  std::vector<double> ones = {1.0, 1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(tree.expectation(2, ones), 1.0);
  std::vector<double> level1 = {2.0, 4.0};
  EXPECT_DOUBLE_EQ(tree.expectation(1, level1), 3.0);
  // values prob^-1 / 4 at depth 2 sum to 1
  std::vector<double> scaled(4, 1.0 / tree.probability(2) / 4.0);
  EXPECT_DOUBLE_EQ(tree.expectation(2, scaled), 1.0);
  EXPECT_THROW(tree.expectation(1, ones), std::invalid_argument);
}

TEST(ScenarioTree, MomentInvariantsAtEveryNode) {
  ScenarioTree tree = build_tree(4, 0.2);
  for (int l = 0; l < tree.depth(); ++l) {
    std::vector<double> dw(tree.level_size(l + 1));
    std::vector<double> dw2(tree.level_size(l + 1));
    for (std::size_t c = 0; c < dw.size(); ++c) {
      dw[c] = tree.increment_to(c);
      dw2[c] = dw[c] * dw[c];
    }
    for (std::size_t m = 0; m < tree.level_size(l); ++m) {
      EXPECT_DOUBLE_EQ(tree.conditional_expectation(l, dw, m), 0.0);
      EXPECT_DOUBLE_EQ(tree.conditional_expectation(l, dw2, m), tree.dt());
    }
  }
}

TEST(ScenarioTree, ExpectationOfConstantIsConstant) {
  ScenarioTree tree = build_tree(5, 0.1);
  for (int l = 0; l <= tree.depth(); ++l) {
    std::vector<double> c(tree.level_size(l), 3.25);
    EXPECT_DOUBLE_EQ(tree.expectation(l, c), 3.25);
  }
}

TEST(ScenarioTree, TowerProperty) {
  ScenarioTree tree = build_tree(6, 0.05);
  const int l = 3;
  std::vector<double> next(tree.level_size(l + 1));
  for (std::size_t c = 0; c < next.size(); ++c)
    next[c] = std::sin(0.3 * static_cast<double>(c + 1));
  std::vector<double> cond(tree.level_size(l));
  for (std::size_t m = 0; m < cond.size(); ++m)
    cond[m] = tree.conditional_expectation(l, next, m);
  EXPECT_NEAR(tree.expectation(l, cond), tree.expectation(l + 1, next), 1e-15);
}

TEST(ScenarioTree, SinglePathReference) {
  ScenarioTree tree = ScenarioTree::single_path(4, 0.25);
  EXPECT_EQ(tree.node_count(), 5u);
  EXPECT_EQ(tree.leaf_count(), 1u);
  EXPECT_DOUBLE_EQ(tree.probability(3), 1.0);
  EXPECT_DOUBLE_EQ(tree.increment_to(0), 0.0);
}

}  // namespace
}  // namespace stochum

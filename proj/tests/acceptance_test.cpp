// Acceptance suite: one test per criterion, one PASS/FAIL line each.
// Thresholds are pinned in code; the dense pseudoinverse oracle anchors the
// solver-level checks at desk scale.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "stochum/adjoint.hpp"
#include "stochum/forward.hpp"
#include "stochum/hum.hpp"
#include "stochum/optimal_time.hpp"
#include "stochum/oracle.hpp"
#include "stochum/scenario_tree.hpp"
#include "stochum/spatial_grid.hpp"

namespace stochum {
namespace {

constexpr std::uint64_t kSeed = 20240711ull;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

void report(int criterion, bool pass, const std::string& what) {
  std::printf("[CRITERION %2d] %s  %s\n", criterion, pass ? "PASS" : "FAIL",
              what.c_str());
  EXPECT_TRUE(pass) << "criterion " << criterion << ": " << what;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

// ---- default scenario: n = 16, depth = 6, eigenvector y0, a = 0.3, T = 0.6

struct DefaultScenario {
  SpatialGrid grid{16, 1.0, 0.2, 0.9};
  ScenarioTree tree = build_tree(6, 0.1);
  CoefficientProcess a = CoefficientProcess::constant(0.3);
  SpatialField y0 = grid.sine_mode(1);
  HumResult solve = minimize_J(tree, grid, a, y0, 1e-10, 0, 0.0);
};

const DefaultScenario& default_scenario() {
  static const DefaultScenario s;
  return s;
}

// ---- criterion 2 instances, shared with criteria 3 and 8

struct AgreementRun {
  int n;
  int depth;
  double a;
  double norm_rel_diff;
  double control_distance;
  double duality_gap_rel;
  bool converged;
  double bb_integrated_rel;
  double bb_min_over_max;
};

struct AgreementSuite {
  std::vector<AgreementRun> runs;
  double seconds = 0.0;
};

const AgreementSuite& agreement_suite() {
  static const AgreementSuite suite = [] {
    AgreementSuite s;
    Timer timer;
    std::mt19937_64 rng(kSeed);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int n : {2, 4, 8}) {
      for (int depth : {2, 3, 4}) {
        for (double aval : {0.0, 0.5}) {
          SpatialGrid grid(n, 1.0, 0.2, 0.9);
          ScenarioTree tree = build_tree(depth, 0.2);
          CoefficientProcess a = CoefficientProcess::constant(aval);
          DenseMap map = assemble_control_to_terminal(tree, grid, a);
          for (int trial = 0; trial < 5; ++trial) {
            SpatialField y0(n);
            for (auto& v : y0) v = dist(rng);
            HumResult hum = minimize_J(tree, grid, a, y0, 1e-11);

            AdaptedField fs = solve_forward(tree, grid, a, y0);
            TerminalData target = terminal_state(tree, fs);
            for (auto& v : target.raw()) v = -v;
            OracleSolution oracle =
                min_norm_least_squares(map, tree, grid, target);
            ControlComparison rep =
                compare(tree, grid, hum.u_star, oracle.control);

            BangBangReport bb =
                check_bang_bang(tree, grid, hum.u_star, hum.norm_N);
            s.runs.push_back(
                {n, depth, aval, rep.norm_rel_diff, rep.distance_rel,
                 hum.duality_gap / (hum.norm_N * hum.norm_N), hum.converged,
                 std::abs(bb.integrated_norm - hum.norm_N) / hum.norm_N,
                 bb.min_level / bb.max_level});
          }
        }
      }
    }
    s.seconds = timer.seconds();
    return s;
  }();
  return suite;
}

TEST(Acceptance, C01_DiscreteItoDuality) {
  Timer timer;
  ScenarioTree tree = build_tree(6, 0.1);
  SpatialGrid grid(16, 1.0, 0.2, 0.9);
  CoefficientProcess a = CoefficientProcess::constant(0.3);
  SpatialField zero(16, 0.0);

  std::mt19937_64 rng(kSeed);
  std::normal_distribution<double> dist(0.0, 1.0);
  double worst = 0.0;
  for (int pair_idx = 0; pair_idx < 100; ++pair_idx) {
    AdaptedField v = AdaptedField::control(tree, 16);
    for (auto& x : v.raw()) x = dist(rng);
    TerminalData eta(tree, 16);
    for (auto& x : eta.raw()) x = dist(rng);

    AdaptedField state = solve_forward(tree, grid, a, zero, &v);
    const double lhs = leaf_inner(grid, terminal_state(tree, state), eta);
    AdjointPair adj = solve_adjoint(tree, grid, a, eta);
    const double rhs =
        process_inner(tree, grid, v, observe(tree, grid, adj));
    const double scale = process_norm(tree, grid, v) * leaf_norm(grid, eta);
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  const double secs = timer.seconds();
  report(1, worst <= 1e-11 && secs <= 10.0,
         "Ito duality, 100 random pairs at n=16 depth=6 a=0.3: worst " +
             fmt(worst) + ", " + fmt(secs) + " s");
}

TEST(Acceptance, C02_OracleEquivalence) {
  const AgreementSuite& s = agreement_suite();
  double worst_norm = 0.0, worst_dist = 0.0;
  for (const auto& r : s.runs) {
    worst_norm = std::max(worst_norm, r.norm_rel_diff);
    worst_dist = std::max(worst_dist, r.control_distance);
  }
  report(2,
         s.runs.size() == 90 && worst_norm <= 1e-6 && worst_dist <= 1e-6 &&
             s.seconds <= 60.0,
         "HUM vs pseudoinverse on 90 instances: worst norm diff " +
             fmt(worst_norm) + ", worst control distance " +
             fmt(worst_dist) + ", " + fmt(s.seconds) +
             " s");
}

TEST(Acceptance, C03_DualityRelation) {
  const AgreementSuite& s = agreement_suite();
  double worst = 0.0;
  int converged = 0;
  for (const auto& r : s.runs) {
    if (!r.converged) continue;
    ++converged;
    worst = std::max(worst, r.duality_gap_rel);
  }
  const HumResult& d = default_scenario().solve;
  const double default_gap = d.duality_gap / (d.norm_N * d.norm_N);
  worst = std::max(worst, default_gap);
  report(3, converged > 0 && worst <= 1e-8,
         "duality V = -N^2/2: worst |V + N^2/2|/N^2 = " +
             fmt(worst) + " over " + std::to_string(converged) +
             " converged solves + default scenario");
}

TEST(Acceptance, C04_NullReach) {
  const DefaultScenario& s = default_scenario();
  const double rel = s.solve.max_leaf_residual / s.solve.initial_norm;
  report(4, rel <= 1e-6,
         "default scenario eps=0 CG at tol=1e-10: max leaf ||y(T)|| = " +
             fmt(rel) + " x ||y0||");
}

TEST(Acceptance, C05_MonotonicityAndContinuity) {
  Timer timer;
  SolverConfig cfg;
  cfg.n = 8;
  cfg.dt = 0.18;
  SpatialGrid grid = cfg.make_grid();
  SpatialField y0 = grid.sine_mode(1);

  std::vector<double> t_list;
  for (int k = 0; k < 10; ++k) t_list.push_back(0.36 + 0.18 * k);
  NormCurve curve = sweep_norm_function(cfg, 0.3, y0, t_list);

  bool monotone = curve.strictly_decreasing && curve.all_converged;

  auto norm_at = [&](double T) {
    return detail::solve_at_horizon(cfg, grid, 0.3, y0, T).norm_N;
  };
  const double base = norm_at(1.0);
  const double d1 = std::abs(norm_at(1.04) - base);
  const double d2 = std::abs(norm_at(1.02) - base);
  const double d3 = std::abs(norm_at(1.01) - base);
  const bool continuity = d1 > d2 && d2 > d3;

  report(5, monotone && continuity,
         "10-horizon sweep strictly decreasing (fixed dt), halving-delta "
         "differences " +
             fmt(d1) + " > " + fmt(d2) + " > " +
             fmt(d3) + ", " + fmt(timer.seconds()) +
             " s");
}

TEST(Acceptance, C06_LimitTrends) {
  SolverConfig cfg;  // default scenario under the fixed-depth policy
  cfg.fixed_depth = 6;
  SpatialGrid grid = cfg.make_grid();
  SpatialField y0 = grid.sine_mode(1);
  const double n_small = detail::solve_at_horizon(cfg, grid, 0.3, y0, 0.05).norm_N;
  const double n_large = detail::solve_at_horizon(cfg, grid, 0.3, y0, 2.0).norm_N;
  const double ratio = n_small / n_large;
  report(6, ratio >= 10.0,
         "N(0.05)/N(2.0) = " + fmt(ratio) + " >= 10");
}

TEST(Acceptance, C07_RoundTrip) {
  Timer timer;
  SolverConfig cfg;  // fixed-depth policy: N(T) has no discretization bands
  cfg.fixed_depth = 6;
  SpatialGrid grid = cfg.make_grid();
  SpatialField y0 = grid.sine_mode(1);
  const double tol = 1e-3;

  bool pass = true;
  std::string detail_str;
  for (double T0 : {0.5, 1.0}) {
    HumResult at_T0 = detail::solve_at_horizon(cfg, grid, 0.3, y0, T0);
    TimeOptimalResult tr =
        optimal_time(cfg, 0.3, y0, at_T0.norm_N, {0.3, 1.6}, tol);
    const bool ok = tr.bracket_established && tr.converged &&
                    std::abs(tr.T_star - T0) <= 2.0 * tol;
    pass = pass && ok;
    detail_str += " T0=" + fmt(T0) +
                  " -> T*=" + fmt(tr.T_star);
  }
  const double secs = timer.seconds();
  pass = pass && secs <= 120.0;
  report(7, pass, "bisection round trip:" + detail_str + ", " +
                      fmt(secs) + " s");
}

TEST(Acceptance, C08_BangBang) {
  const AgreementSuite& s = agreement_suite();
  double worst_integrated = 0.0;
  double worst_floor = 1.0;
  for (const auto& r : s.runs) {
    worst_integrated = std::max(worst_integrated, r.bb_integrated_rel);
    worst_floor = std::min(worst_floor, r.bb_min_over_max);
  }
  const DefaultScenario& d = default_scenario();
  BangBangReport bb =
      check_bang_bang(d.tree, d.grid, d.solve.u_star, d.solve.norm_N);
  worst_integrated = std::max(
      worst_integrated,
      std::abs(bb.integrated_norm - d.solve.norm_N) / d.solve.norm_N);
  worst_floor = std::min(worst_floor, bb.min_level / bb.max_level);

  report(8, worst_integrated <= 1e-8 && worst_floor > 1e-10,
         "bang-bang on all y0 != 0 runs: worst |integrated - N|/N = " +
             fmt(worst_integrated) +
             ", worst min/max level norm = " + fmt(worst_floor));
}

TEST(Acceptance, C09_EquivalencePipeline) {
  Timer timer;
  SolverConfig cfg;  // default scenario
  SpatialGrid grid = cfg.make_grid();
  SpatialField y0 = grid.sine_mode(1);
  EquivalenceReport rep = equivalence_check(cfg, 0.3, y0, 0.6, 1e-3);
  report(9, rep.pass,
         "equivalence: reach " + fmt(rep.null_reach_rel) +
             ", extension " + fmt(rep.extended_reach_rel) +
             ", T* = " + fmt(rep.t_star) + ", restriction diff " +
             fmt(rep.restriction_rel_diff) + ", " +
             fmt(timer.seconds()) + " s");
}

TEST(Acceptance, C10_DeterministicReduction) {
  ScenarioTree tree = build_tree(6, 0.1);
  SpatialGrid grid(16, 1.0, 0.2, 0.9);
  CoefficientProcess a0 = CoefficientProcess::constant(0.0);
  SpatialField y0 = grid.sine_mode(1);

  HumResult stoch = minimize_J(tree, grid, a0, y0, 1e-10);
  AdaptedField state = solve_forward(tree, grid, a0, y0, &stoch.u_star);
  double level_dev = 0.0;
  for (int l = 0; l <= tree.depth(); ++l) {
    auto ref = state.at(l, 0);
    for (std::size_t m = 1; m < tree.level_size(l); ++m) {
      auto ym = state.at(l, m);
      for (int i = 0; i < grid.n(); ++i)
        level_dev = std::max(level_dev, std::abs(ym[i] - ref[i]));
    }
  }

  ScenarioTree single = ScenarioTree::single_path(6, 0.1);
  HumResult det = minimize_J(single, grid, a0, y0, 1e-10);
  const double norm_dev =
      std::abs(stoch.norm_N - det.norm_N) / det.norm_N;

  // both HUM solves sit at their CG precision floors (~1e-9 residual), so
  // the norm comparison is pinned just above that floor
  report(10, level_dev <= 1e-13 && norm_dev <= 1e-8,
         "a=0: level spread " + fmt(level_dev) +
             ", single-branch HUM norm deviation " + fmt(norm_dev));
}

}  // namespace
}  // namespace stochum

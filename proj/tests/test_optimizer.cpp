#include <gtest/gtest.h>

#include <cmath>

#include "qubit_est/optimizer.hpp"

using namespace qest;

namespace {

OptimizationConfig quick(int restarts, std::uint64_t seed = 1) {
  OptimizationConfig cfg;
  cfg.restarts = restarts;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(LocalSearch, NelderMeadFindsQuadraticMinimum) {
  const detail::Objective f = [](const std::vector<double>& x) {
    return (x[0] - 1) * (x[0] - 1) + 10 * (x[1] + 2) * (x[1] + 2) + (x[2] - 0.5) * (x[2] - 0.5);
  };
  const auto r = detail::nelder_mead(f, {0.0, 0.0, 0.0});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], -2.0, 1e-4);
  const auto p = detail::bfgs_fd(f, r.x);
  EXPECT_NEAR(p.x[0], 1.0, 1e-6);
  EXPECT_NEAR(p.x[2], 0.5, 1e-6);
  EXPECT_LE(p.value, r.value);
}

TEST(LocalSearch, BfgsOnRosenbrock) {
  const detail::Objective f = [](const std::vector<double>& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  const auto r = detail::bfgs_fd(f, {-1.2, 1.0});
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(Parameterization, RoundTrip) {
  Rng rng(2);
  for (Prior prior : {Prior::Sphere3D, Prior::Circle2D})
    for (bool gauge : {true, false})
      for (int depth = 1; depth <= 4; ++depth) {
        const TreeParameterization param(depth, prior, gauge);
        std::vector<double> x(param.size());
        for (double& v : x) v = 3.0 * rng.uniform();
        const AdaptiveTree t = param.to_tree(x);
        const AdaptiveTree back = param.to_tree(param.from_tree(t));
        for (std::size_t i = 0; i < t.node_count(); ++i)
          EXPECT_NEAR(norm(t.node(i).components() - back.node(i).components()), 0.0, 1e-12);
      }
}

TEST(Parameterization, GaugeRotationKeepsFidelity) {
  Rng rng(4);
  AdaptiveTree t = detail::random_tree(4, Prior::Sphere3D, rng);
  const TreeParameterization param(4, Prior::Sphere3D, true);
  const AdaptiveTree g = param.gauge_rotated(t);
  EXPECT_NEAR(g.node(0).z(), 1.0, 1e-14);
  EXPECT_NEAR(g.node(1).y(), 0.0, 1e-14);
  TreeEvaluator eval(Prior::Sphere3D, 4);
  EXPECT_NEAR(eval.fidelity(t), eval.fidelity(g), 1e-12);
  EXPECT_EQ(param.size(), 2u * 15 - 3);
}

TEST(Optimize, TwoCopies) {
  const auto r = optimize_tree(2, Prior::Sphere3D, quick(6));
  EXPECT_NEAR(r.report.fidelity, (3 + std::sqrt(2.0)) / 6, 1e-6);
  EXPECT_TRUE(r.converged);
  // second measurement orthogonal to the first whatever the outcome
  EXPECT_NEAR(r.tree.node(0).dot(r.tree.node(1)), 0.0, 1e-4);
  EXPECT_NEAR(r.tree.node(0).dot(r.tree.node(2)), 0.0, 1e-4);
  EXPECT_FALSE(structure_report(r.tree).history_dependent);
}

TEST(Optimize, ThreeCopiesUseThreeOrthogonalAxes) {
  const auto r = optimize_tree(3, Prior::Sphere3D, quick(8));
  EXPECT_NEAR(r.report.fidelity, (3 + std::sqrt(3.0)) / 6, 1e-6);
  const auto st = structure_report(r.tree);
  EXPECT_FALSE(st.history_dependent);
  EXPECT_NEAR(st.communication_gain, 0.0, 1e-6);
}

TEST(Optimize, EquatorialTwoCopiesReachBound) {
  const auto r = optimize_tree(2, Prior::Circle2D, quick(4));
  EXPECT_NEAR(r.report.fidelity, cm_bound_2d(2), 1e-9);
  for (const auto& n : r.tree.nodes()) EXPECT_TRUE(n.is_planar());
}

TEST(Optimize, SeedReproducibleAcrossThreadCounts) {
  auto a = quick(4, 99), b = quick(4, 99);
  b.threads = 3;
  const auto ra = optimize_tree(3, Prior::Sphere3D, a);
  const auto rb = optimize_tree(3, Prior::Sphere3D, b);
  EXPECT_EQ(ra.report.fidelity, rb.report.fidelity);
  EXPECT_EQ(ra.best_restart, rb.best_restart);
  for (std::size_t i = 0; i < ra.tree.node_count(); ++i) EXPECT_EQ(ra.tree.node(i), rb.tree.node(i));
  ASSERT_EQ(ra.restarts.size(), 4u);
  EXPECT_TRUE(ra.restarts[0].heuristic_start);
  EXPECT_FALSE(ra.restarts[1].heuristic_start);
  EXPECT_FALSE(ra.history.empty());
}

TEST(Optimize, WithoutGaugeFixingSameOptimum) {
  auto cfg = quick(6);
  cfg.gauge_fixing = false;
  EXPECT_NEAR(optimize_tree(2, Prior::Sphere3D, cfg).report.fidelity, (3 + std::sqrt(2.0)) / 6, 1e-6);
}

TEST(Optimize, RejectsBadInput) {
  EXPECT_THROW(optimize_tree(kMaxOptimizeDepth + 1, Prior::Sphere3D), CapExceeded);
  EXPECT_THROW(optimize_tree(0, Prior::Sphere3D), std::invalid_argument);
  EXPECT_THROW(optimize_tree(2, Prior::Sphere3D, quick(0)), std::invalid_argument);
}

TEST(Optimize, OptimalGuessVectorMatchesReport) {
  Rng rng(6);
  const AdaptiveTree t = detail::random_tree(3, Prior::Sphere3D, rng);
  const auto rep = eval_adaptive_tree(t, Prior::Sphere3D);
  for (const auto& o : rep.outcomes)
    EXPECT_NEAR(norm(optimal_guess_vector(t, History::parse(o.id)).components() - o.guess.components()), 0.0, 1e-12);
}

TEST(Structure, FixedAxesTreeIsHistoryIndependent) {
  const auto st = structure_report(FixedAxesPlan::standard(Prior::Sphere3D, 1).to_tree());
  EXPECT_FALSE(st.history_dependent);
  ASSERT_EQ(st.depths.size(), 3u);
  EXPECT_NEAR(st.depths[1].mean_angle_to_guess, 90.0, 1e-9);
}

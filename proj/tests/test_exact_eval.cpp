#include <gtest/gtest.h>

#include <cmath>

#include "qubit_est/exact_eval.hpp"

using namespace qest;

namespace {

using Mat3 = std::array<Vec3, 3>;

Mat3 rotation(const Vec3& axis_in, double angle) {
  const Vec3 k = BlochVector(axis_in).components();
  const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
  return {{{t * k[0] * k[0] + c, t * k[0] * k[1] - s * k[2], t * k[0] * k[2] + s * k[1]},
           {t * k[0] * k[1] + s * k[2], t * k[1] * k[1] + c, t * k[1] * k[2] - s * k[0]},
           {t * k[0] * k[2] - s * k[1], t * k[1] * k[2] + s * k[0], t * k[2] * k[2] + c}}};
}

BlochVector apply(const Mat3& r, const BlochVector& v) {
  return BlochVector(Vec3{dot(r[0], v.components()), dot(r[1], v.components()), dot(r[2], v.components())});
}

AdaptiveTree random_tree(int depth, Prior prior, Rng& rng) {
  AdaptiveTree t(depth);
  for (std::size_t i = 0; i < t.node_count(); ++i) t.set_node(i, sample_prior(prior, rng));
  return t;
}

}  // namespace

TEST(Bounds, ClosedForms) {
  EXPECT_DOUBLE_EQ(cm_bound_3d(1), 2.0 / 3);
  EXPECT_DOUBLE_EQ(cm_bound_3d(4), 5.0 / 6);
  EXPECT_NEAR(cm_bound_2d(1), 0.75, 1e-15);
  EXPECT_NEAR(cm_bound_2d(2), 0.5 + std::sqrt(2.0) / 4, 1e-15);
  EXPECT_THROW(cm_bound_2d(0), std::invalid_argument);
  EXPECT_THROW(cm_bound_3d(0), std::invalid_argument);
  double prev = 0.5;
  for (int n = 1; n <= 2000; ++n) {
    const double b = cm_bound_2d(n);
    ASSERT_GT(b, prev);
    ASSERT_LT(b, 1.0);
    prev = b;
  }
  // 1 - F ~ 1/(4N) for the equatorial bound
  EXPECT_NEAR(10000 * (1 - cm_bound_2d(10000)), 0.25, 1e-3);
}

TEST(Bounds, OrderingReport) {
  const auto rep = verify_bound_ordering(50, {{Prior::Sphere3D, 2, (3 + std::sqrt(2.0)) / 6, "n2"}});
  EXPECT_TRUE(rep.all_ok);
  const auto bad = verify_bound_ordering(3, {{Prior::Sphere3D, 1, 0.7, "too good"}});
  EXPECT_FALSE(bad.all_ok);
}

TEST(TreeEval, SingleMeasurement) {
  EXPECT_NEAR(eval_adaptive_tree(AdaptiveTree(1), Prior::Sphere3D).fidelity, 2.0 / 3, 1e-15);
  EXPECT_NEAR(eval_adaptive_tree(AdaptiveTree(1, kAxisX), Prior::Circle2D).fidelity, 0.75, 1e-15);
}

TEST(TreeEval, TwoOrthogonalMeasurements) {
  AdaptiveTree t(2);
  t.set_direction(History::parse("0"), kAxisX);
  t.set_direction(History::parse("1"), kAxisX);
  const auto r = eval_adaptive_tree(t, Prior::Sphere3D);
  EXPECT_NEAR(r.fidelity, (3 + std::sqrt(2.0)) / 6, 1e-14);
  EXPECT_NEAR(r.total_probability, 1.0, 1e-14);
  ASSERT_EQ(r.outcomes.size(), 4u);
  for (const auto& o : r.outcomes) {
    EXPECT_NEAR(o.probability, 0.25, 1e-15);
    EXPECT_NEAR(o.v_magnitude, std::sqrt(2.0) / 12, 1e-15);
  }
}

TEST(TreeEval, RepeatingAnAxisGainsNothingAtTwoCopies) {
  EXPECT_NEAR(eval_adaptive_tree(AdaptiveTree(2), Prior::Sphere3D).fidelity, 2.0 / 3, 1e-15);
}

TEST(TreeEval, EquatorialTwoCopiesReachBound) {
  AdaptiveTree t(2, kAxisX);
  t.set_direction(History::parse("0"), kAxisY);
  t.set_direction(History::parse("1"), kAxisY);
  EXPECT_NEAR(eval_adaptive_tree(t, Prior::Circle2D).fidelity, cm_bound_2d(2), 1e-14);
}

TEST(TreeEval, ThreeOrthogonalAxes) {
  const auto plan = FixedAxesPlan::standard(Prior::Sphere3D, 1);
  EXPECT_NEAR(eval_adaptive_tree(plan.to_tree(), Prior::Sphere3D).fidelity, (3 + std::sqrt(3.0)) / 6, 1e-14);
}

TEST(TreeEval, ProbabilitiesSumToOneAndFidelityBounded) {
  Rng rng(11);
  for (int depth = 1; depth <= 9; ++depth)
    for (Prior prior : {Prior::Sphere3D, Prior::Circle2D}) {
      const auto t = random_tree(depth, prior, rng);
      const auto r = eval_adaptive_tree(t, prior);
      EXPECT_NEAR(r.total_probability, 1.0, 1e-10);
      EXPECT_GE(r.fidelity, 0.5);
      EXPECT_LE(r.fidelity, cm_bound(prior, depth) + 1e-9);
      double p = 0.0;
      for (const auto& o : r.outcomes) {
        EXPECT_GE(o.probability, -1e-15);
        p += o.probability;
      }
      EXPECT_NEAR(p, 1.0, 1e-10);
    }
}

TEST(TreeEval, GlobalRotationInvariance) {
  Rng rng(3);
  for (int depth = 2; depth <= 7; ++depth) {
    const auto t = random_tree(depth, Prior::Sphere3D, rng);
    const Mat3 r = rotation(sample_prior(Prior::Sphere3D, rng).components(), 2.0 * rng.uniform() + 0.1);
    AdaptiveTree rotated(depth);
    for (std::size_t i = 0; i < t.node_count(); ++i) rotated.set_node(i, apply(r, t.node(i)));
    EXPECT_NEAR(eval_adaptive_tree(t, Prior::Sphere3D).fidelity, eval_adaptive_tree(rotated, Prior::Sphere3D).fidelity,
                1e-10);
    // equatorial prior: rotations about z only
    const auto e = random_tree(depth, Prior::Circle2D, rng);
    const Mat3 rz = rotation({0.0, 0.0, 1.0}, 6.0 * rng.uniform());
    AdaptiveTree erot(depth);
    for (std::size_t i = 0; i < e.node_count(); ++i) erot.set_node(i, apply(rz, e.node(i)));
    EXPECT_NEAR(eval_adaptive_tree(e, Prior::Circle2D).fidelity, eval_adaptive_tree(erot, Prior::Circle2D).fidelity,
                1e-10);
  }
}

TEST(TreeEval, OptimalGuessDominatesAnyRule) {
  Rng rng(8);
  const auto t = random_tree(6, Prior::Sphere3D, rng);
  const double opt = eval_adaptive_tree(t, Prior::Sphere3D).fidelity;
  const GuessFunction fixed = [](const History&, const PosteriorVector&) { return kAxisX; };
  EXPECT_NEAR(eval_adaptive_tree(t, Prior::Sphere3D, fixed, "constant").fidelity, 0.5, 1e-12);
  const GuessFunction noisy = [&](const History& h, const PosteriorVector& v) {
    Vec3 c = v.components;
    c[h.bits % 3] += 0.05;
    return BlochVector(c);
  };
  EXPECT_LT(eval_adaptive_tree(t, Prior::Sphere3D, noisy, "perturbed").fidelity, opt);
}

TEST(TreeEval, DepthCap) {
  EvalOptions opts;
  opts.depth_cap = 4;
  EXPECT_THROW(eval_adaptive_tree(AdaptiveTree(5), Prior::Sphere3D, opts), CapExceeded);
}

TEST(FixedAxes, AgreesWithBitStringEvaluation) {
  std::vector<std::pair<FixedAxesPlan, Prior>> plans = {
      {FixedAxesPlan::standard(Prior::Sphere3D, 1), Prior::Sphere3D},
      {FixedAxesPlan::standard(Prior::Sphere3D, 2), Prior::Sphere3D},
      {FixedAxesPlan::standard(Prior::Sphere3D, 3), Prior::Sphere3D},
      {FixedAxesPlan({kAxisX, kAxisY, kAxisZ}, {4, 3, 2}), Prior::Sphere3D},
      {FixedAxesPlan({BlochVector(1, 1, 0), BlochVector(1, -1, 0), kAxisZ}, {2, 3, 2}), Prior::Sphere3D},
      {FixedAxesPlan::standard(Prior::Circle2D, 1), Prior::Circle2D},
      {FixedAxesPlan::standard(Prior::Circle2D, 5), Prior::Circle2D},
      {FixedAxesPlan({BlochVector::planar(1, 2), BlochVector::planar(-2, 1)}, {3, 6}), Prior::Circle2D},
  };
  for (const auto& [plan, prior] : plans) {
    const AdaptiveTree tree = plan.to_tree();
    for (GuessRule rule : {GuessRule::Optimal, GuessRule::Tomographic}) {
      const double fixed = eval_fixed_axes(plan, rule, prior).fidelity;
      const double bits = rule == GuessRule::Optimal
                              ? eval_adaptive_tree(tree, prior).fidelity
                              : eval_adaptive_tree(tree, prior, tomographic_tree_rule(plan), "t").fidelity;
      EXPECT_NEAR(fixed, bits, 1e-10) << "N=" << plan.copies() << " rule=" << to_string(rule);
    }
  }
}

TEST(FixedAxes, ReportSumsAndDominance) {
  for (int per = 1; per <= 12; ++per) {
    const auto plan = FixedAxesPlan::standard(Prior::Sphere3D, per);
    const auto og = eval_fixed_axes(plan, GuessRule::Optimal, Prior::Sphere3D);
    const auto t = eval_fixed_axes(plan, GuessRule::Tomographic, Prior::Sphere3D);
    EXPECT_NEAR(og.total_probability, 1.0, 1e-10);
    EXPECT_GE(og.fidelity, t.fidelity - 1e-13);
    EXPECT_LE(og.fidelity, cm_bound_3d(3 * per) + 1e-9);
    EXPECT_EQ(og.outcomes.size(), static_cast<std::size_t>((per + 1) * (per + 1) * (per + 1)));
  }
}

TEST(FixedAxes, OutcomeIdentifiers) {
  const auto r = eval_fixed_axes(FixedAxesPlan::standard(Prior::Circle2D, 2), GuessRule::Optimal, Prior::Circle2D);
  ASSERT_EQ(r.outcomes.size(), 9u);
  EXPECT_EQ(r.outcomes.front().id, "0,0");
  EXPECT_EQ(r.outcomes.back().id, "2,2");
}

TEST(FixedAxes, CapsAndPriorChecks) {
  EXPECT_THROW(eval_fixed_axes(FixedAxesPlan::standard(Prior::Sphere3D, 81), GuessRule::Optimal, Prior::Sphere3D),
               CapExceeded);
  EXPECT_THROW(eval_fixed_axes(FixedAxesPlan::standard(Prior::Sphere3D, 2), GuessRule::Optimal, Prior::Circle2D),
               DimensionMismatch);
  EXPECT_THROW(fixed_axes_fidelity(Prior::Sphere3D, 10, GuessRule::Optimal), InvalidPlan);
}

TEST(FixedAxes, ThreadCountDoesNotChangeResult) {
  const auto plan = FixedAxesPlan::standard(Prior::Sphere3D, 15);
  EvalOptions one, four;
  four.threads = 4;
  EXPECT_EQ(eval_fixed_axes(plan, GuessRule::Optimal, Prior::Sphere3D, one).fidelity,
            eval_fixed_axes(plan, GuessRule::Optimal, Prior::Sphere3D, four).fidelity);
}

TEST(FixedAxes, LargePlansStayWellConditioned) {
  const double f = fixed_axes_fidelity(Prior::Sphere3D, 240, GuessRule::Optimal);
  EXPECT_GT(f, 0.99);
  EXPECT_LT(f, cm_bound_3d(240));
  const double g = fixed_axes_fidelity(Prior::Circle2D, 1200, GuessRule::Optimal);
  EXPECT_LT(g, cm_bound_2d(1200));
  EXPECT_NEAR(1200 * (1 - g), 0.25, 0.03);
}

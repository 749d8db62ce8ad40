#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qubit_est/asympt_fit.hpp"

using namespace qest;

namespace {

FidelitySeries synthetic(double c, double d, double se = 0.0) {
  FidelitySeries s{"synthetic", SeriesSource::Exact, {}};
  for (int n = 40; n <= 400; n += 20) s.points.push_back({n, 1.0 - c / n - d / (double(n) * n), se});
  return s;
}

}  // namespace

TEST(Fit, RecoversExactCoefficients) {
  const auto f = fit_leading_coefficient(synthetic(0.7, 2.0), FitModel::LeadingPlusSubleading);
  EXPECT_NEAR(f.c, 0.7, 1e-10);
  EXPECT_NEAR(f.d, 2.0, 1e-7);
  EXPECT_EQ(f.points, 19);
  EXPECT_EQ(f.min_copies, 40);
  EXPECT_EQ(f.max_copies, 400);
  const auto g = fit_leading_coefficient(synthetic(1.3, 0.0), FitModel::Leading);
  EXPECT_NEAR(g.c, 1.3, 1e-12);
  EXPECT_TRUE(std::isnan(g.d));
}

TEST(Fit, HalfOrderModel) {
  FidelitySeries s{"h", SeriesSource::Exact, {}};
  for (int n = 40; n <= 800; n += 40) s.points.push_back({n, 1.0 - 0.25 / n - 0.5 * std::pow(n, -1.5), 0.0});
  const auto f = fit_leading_coefficient(s, FitModel::LeadingPlusHalfOrder);
  EXPECT_NEAR(f.c, 0.25, 1e-10);
  EXPECT_NEAR(f.d, 0.5, 1e-8);
  EXPECT_EQ(parse_fit_model("c,e"), FitModel::LeadingPlusHalfOrder);
}

TEST(Fit, MinCopiesFilter) {
  const auto f = fit_leading_coefficient(synthetic(0.7, 2.0), FitModel::LeadingPlusSubleading, 200);
  EXPECT_EQ(f.min_copies, 200);
  EXPECT_THROW(fit_leading_coefficient(synthetic(0.7, 2.0), FitModel::Leading, 390), std::invalid_argument);
}

TEST(Fit, InvariantUnderCommonErrorScale) {
  auto s = synthetic(1.0, 3.0, 1e-4);
  Rng rng(3);
  for (auto& p : s.points) p.fidelity += 1e-4 * (rng.uniform() - 0.5);
  const auto a = fit_leading_coefficient(s, FitModel::LeadingPlusSubleading);
  for (auto& p : s.points) p.stderr_ *= 10;
  const auto b = fit_leading_coefficient(s, FitModel::LeadingPlusSubleading);
  EXPECT_NEAR(a.c, b.c, 1e-12);
  EXPECT_NEAR(a.c_stderr, b.c_stderr, 1e-12 * a.c_stderr + 1e-15);
  EXPECT_GT(a.c_stderr, 0.0);
}

TEST(Fit, RejectsBadSeries) {
  FidelitySeries s = synthetic(1.0, 0.0);
  std::swap(s.points[0], s.points[1]);
  EXPECT_THROW(fit_leading_coefficient(s, FitModel::Leading), std::invalid_argument);
  FidelitySeries t = synthetic(1.0, 0.0);
  t.points[3].fidelity = 0.3;
  EXPECT_THROW(fit_leading_coefficient(t, FitModel::Leading), std::invalid_argument);
  EXPECT_THROW(parse_fit_model("c,d,e"), std::invalid_argument);
}

TEST(Fit, CollectiveBoundSeries) {
  const auto f3 = fit_leading_coefficient(cm_bound_series(Prior::Sphere3D, default_cm_copies()),
                                          FitModel::LeadingPlusSubleading);
  EXPECT_NEAR(f3.c, 1.0, 0.02);
  const auto f2 = fit_leading_coefficient(cm_bound_series(Prior::Circle2D, default_cm_copies()),
                                          FitModel::LeadingPlusSubleading);
  EXPECT_NEAR(f2.c, 0.25, 0.005);
}

TEST(Csv, SeriesRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "qest_series_test.csv";
  const auto s = cm_bound_series(Prior::Sphere3D, {50, 60, 70, 80});
  {
    std::ofstream out(path);
    write_series_csv(out, {s});
  }
  const auto back = read_series_csv(path);
  ASSERT_EQ(back.count("3d-cm"), 1u);
  const auto& pts = back.at("3d-cm").points;
  ASSERT_EQ(pts.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(pts[i].fidelity, s.points[i].fidelity);
  EXPECT_TRUE(read_series_csv(path, "2d-og").empty());
  std::filesystem::remove(path);
}

TEST(Csv, LedgerRowsMergeByInverseVariance) {
  const auto path = std::filesystem::temp_directory_path() / "qest_ledger_fit_test.csv";
  {
    std::ofstream out(path);
    out << kLedgerHeader << '\n'
        << "abc,two-stage,64,1000,1,0.98,0.001\n"
        << "abc,two-stage,64,1000,2,0.99,0.002\n"
        << "def,two-stage,144,1000,1,0.99,0.001\n";
  }
  const auto m = read_series_csv(path, "two-stage");
  const auto& pts = m.at("two-stage").points;
  ASSERT_EQ(pts.size(), 2u);
  // weights 1e6 and 2.5e5
  EXPECT_NEAR(pts[0].fidelity, (0.98 * 1e6 + 0.99 * 2.5e5) / 1.25e6, 1e-14);
  EXPECT_NEAR(pts[0].stderr_, 1 / std::sqrt(1.25e6), 1e-15);
  EXPECT_EQ(m.at("two-stage").source, SeriesSource::Simulated);
  std::filesystem::remove(path);
}

TEST(Csv, RejectsUnknownHeader) {
  const auto path = std::filesystem::temp_directory_path() / "qest_bad_header.csv";
  {
    std::ofstream out(path);
    out << "a,b,c\n1,2,3\n";
  }
  EXPECT_THROW(read_series_csv(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(Table, ReportsMissingSeries) {
  std::map<std::string, FidelitySeries> m;
  m.emplace("3d-cm", cm_bound_series(Prior::Sphere3D, default_cm_copies()));
  EXPECT_THROW(coefficient_table(m), MissingSeries);
  EXPECT_NEAR(reference_coefficient("3d-og"), 13.0 / 12, 1e-15);
  EXPECT_THROW(reference_coefficient("4d-x"), std::invalid_argument);
}

TEST(Grids, DefaultCopies) {
  const auto g2 = default_copies(Prior::Circle2D);
  EXPECT_EQ(g2.front(), 40);
  EXPECT_EQ(g2.back(), 800);
  const auto g3 = default_copies(Prior::Sphere3D);
  EXPECT_EQ(g3.back(), 180);
  for (int n : g3) EXPECT_EQ(n % 3, 0);
  for (int n : g2) EXPECT_EQ(n % 2, 0);
}

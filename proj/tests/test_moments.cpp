#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <numbers>

#include "qubit_est/moments.hpp"

using namespace qest;

namespace {

double double_factorial(int k) {
  double r = 1.0;
  for (; k > 1; k -= 2) r *= k;
  return r;
}

// Closed form for even exponents: (p-1)!!(q-1)!!(r-1)!!/(p+q+r+1)!!
double sphere_reference(int p, int q, int r) {
  if (p % 2 || q % 2 || r % 2) return 0.0;
  return double_factorial(p - 1) * double_factorial(q - 1) * double_factorial(r - 1) / double_factorial(p + q + r + 1);
}

using boost::math::quadrature::gauss_kronrod;

double azimuth_quad(int p, int q) {
  auto f = [p, q](double t) { return std::pow(std::cos(t), p) * std::pow(std::sin(t), q); };
  return gauss_kronrod<double, 61>::integrate(f, 0.0, 2 * std::numbers::pi, 12, 1e-13) / (2 * std::numbers::pi);
}

double polar_quad(int s, int r) {
  // integral over z = cos(t) of z^r (1 - z^2)^(s/2) / 2
  auto f = [s, r](double t) { return std::pow(std::cos(t), r) * std::pow(std::sin(t), s + 1); };
  return gauss_kronrod<double, 61>::integrate(f, 0.0, std::numbers::pi, 12, 1e-13) / 2.0;
}

}  // namespace

TEST(SphereMoment, KnownValues) {
  EXPECT_DOUBLE_EQ(sphere_moment(0, 0, 0), 1.0);
  EXPECT_NEAR(sphere_moment(2, 0, 0), 1.0 / 3, 1e-16);
  EXPECT_NEAR(sphere_moment(0, 0, 4), 1.0 / 5, 1e-16);
  EXPECT_NEAR(sphere_moment(2, 2, 0), 1.0 / 15, 1e-16);
  EXPECT_NEAR(sphere_moment(2, 2, 2), 1.0 / 105, 1e-16);
  EXPECT_EQ(sphere_moment(1, 0, 0), 0.0);
  EXPECT_EQ(sphere_moment(2, 3, 0), 0.0);
  EXPECT_THROW(sphere_moment(-1, 0, 0), std::invalid_argument);
}

TEST(CircleMoment, KnownValues) {
  EXPECT_DOUBLE_EQ(circle_moment(0, 0), 1.0);
  EXPECT_NEAR(circle_moment(2, 0), 0.5, 1e-16);
  EXPECT_NEAR(circle_moment(4, 0), 3.0 / 8, 1e-16);
  EXPECT_NEAR(circle_moment(2, 2), 1.0 / 8, 1e-16);
  EXPECT_EQ(circle_moment(3, 2), 0.0);
  EXPECT_EQ(prior_moment(Prior::Circle2D, 2, 0, 2), 0.0);
}

TEST(SphereMoment, MatchesDoubleFactorialFormula) {
  for (int p = 0; p <= 30; ++p)
    for (int q = 0; p + q <= 30; ++q)
      for (int r = 0; p + q + r <= 30; ++r) {
        const double ref = sphere_reference(p, q, r);
        ASSERT_NEAR(sphere_moment(p, q, r), ref, 1e-13 * std::max(ref, 1e-300)) << p << ' ' << q << ' ' << r;
      }
}

TEST(SphereMoment, MatchesQuadratureUpToDegree60) {
  std::map<std::pair<int, int>, double> az, po;
  for (int p = 0; p <= 60; ++p)
    for (int q = 0; p + q <= 60; ++q) {
      const auto ia = az.try_emplace({p, q}, 0.0);
      if (ia.second) ia.first->second = azimuth_quad(p, q);
      for (int r = 0; p + q + r <= 60; ++r) {
        const auto ip = po.try_emplace({p + q, r}, 0.0);
        if (ip.second) ip.first->second = polar_quad(p + q, r);
        const double quad = ia.first->second * ip.first->second;
        const double m = sphere_moment(p, q, r);
        ASSERT_NEAR(m, quad, 1e-10 * std::max(std::abs(quad), 1e-4)) << p << ' ' << q << ' ' << r;
      }
    }
}

TEST(CircleMoment, MatchesQuadratureUpToDegree60) {
  for (int p = 0; p <= 60; ++p)
    for (int q = 0; p + q <= 60; ++q) {
      const double quad = azimuth_quad(p, q);
      ASSERT_NEAR(circle_moment(p, q), quad, 1e-10 * std::max(std::abs(quad), 1e-4)) << p << ' ' << q;
    }
}

TEST(MomentTable, AgreesWithDirectMoments) {
  const MomentTable t(Prior::Sphere3D, 12);
  for (int p = 0; p <= 12; ++p)
    for (int q = 0; p + q <= 12; ++q)
      for (int r = 0; p + q + r <= 12; ++r) EXPECT_EQ(t(p, q, r), sphere_moment(p, q, r));
}

TEST(TermIndex, DenseAndUnique) {
  std::vector<int> hits(tetra(9), 0);
  for (int t = 0; t < 9; ++t)
    for (int p = 0; p <= t; ++p)
      for (int q = 0; p + q <= t; ++q) {
        const int r = t - p - q;
        const std::size_t i = term_index(p, q, r);
        ASSERT_LT(i, hits.size());
        ++hits[i];
      }
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Polynomial, AffineFactorEvaluates) {
  SpherePolynomial poly(1.0);
  const Vec3 a{0.3, -0.2, 0.9};
  const Vec3 b{-0.5, 0.5, 0.1};
  poly = multiply_affine_factor(poly, a);
  poly = multiply_affine_factor(poly, b);
  EXPECT_EQ(poly.degree(), 2);
  const Vec3 n{0.48, 0.6, 0.64};
  EXPECT_NEAR(poly.evaluate(n), (1 + dot(a, n)) / 2 * (1 + dot(b, n)) / 2, 1e-15);
}

TEST(Polynomial, SingleMeasurementIntegrals) {
  // p(n) = (1 + n.m)/2: integral 1/2, V = m/6 (3d) and m/4 (2d)
  const auto p = multiply_linear_factor(SpherePolynomial(1.0), BlochVector(1.0, 2.0, 2.0));
  EXPECT_NEAR(integrate(p, Prior::Sphere3D), 0.5, 1e-15);
  const auto v = posterior_vector(p, Prior::Sphere3D);
  EXPECT_NEAR(v.magnitude, 1.0 / 6, 1e-15);
  EXPECT_NEAR(v.components[2], 2.0 / 18, 1e-15);

  const auto q = multiply_linear_factor(SpherePolynomial(1.0), kAxisX);
  EXPECT_NEAR(posterior_vector(q, Prior::Circle2D).magnitude, 0.25, 1e-15);
}

TEST(Polynomial, TwoDimensionalPriorRejectsZTerms) {
  const auto p = multiply_linear_factor(SpherePolynomial(1.0), kAxisZ);
  EXPECT_THROW(integrate(p, Prior::Circle2D), DimensionMismatch);
}

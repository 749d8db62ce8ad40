// moments.hpp
// Exact integration of polynomials in the Bloch components over the
// isotropic priors.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "qubit_est/bloch.hpp"

namespace qest {

/// Integral of n_x^p n_y^q n_z^r over the uniform unit sphere (unit mass).
///
/// Zero when any exponent is odd, otherwise (p-1)!!(q-1)!!(r-1)!!/(p+q+r+1)!!.
/// The ratio is built as a running product of factors below one, so it never
/// overflows regardless of degree.
inline double sphere_moment(int p, int q, int r) {
  if (p < 0 || q < 0 || r < 0) throw std::invalid_argument("sphere_moment: negative exponent");
  if ((p | q | r) & 1) return 0.0;
  double m = 1.0;
  int total = 0;  // running p+q+r of the exponents already absorbed
  for (int e : {p, q, r}) {
    for (int j = 0; j < e; j += 2) {
      m *= static_cast<double>(j + 1) / static_cast<double>(total + j + 3);
    }
    total += e;
  }
  return m;
}

/// Integral of cos^p(phi) sin^q(phi) dphi/(2 pi): (p-1)!!(q-1)!!/(p+q)!! for
/// even p, q and zero otherwise.
inline double circle_moment(int p, int q) {
  if (p < 0 || q < 0) throw std::invalid_argument("circle_moment: negative exponent");
  if ((p | q) & 1) return 0.0;
  double m = 1.0;
  int total = 0;
  for (int e : {p, q}) {
    for (int j = 0; j < e; j += 2) {
      m *= static_cast<double>(j + 1) / static_cast<double>(total + j + 2);
    }
    total += e;
  }
  return m;
}

inline double prior_moment(Prior prior, int p, int q, int r) {
  if (prior == Prior::Sphere3D) return sphere_moment(p, q, r);
  if (r < 0) throw std::invalid_argument("prior_moment: negative exponent");
  return r == 0 ? circle_moment(p, q) : 0.0;
}

// Dense triangular layout shared by SpherePolynomial and MomentTable:
// terms are grouped by total degree t = p+q+r, and within a degree by
// a = q+r then r.
inline constexpr std::size_t tetra(int t) {
  return static_cast<std::size_t>(t) * (t + 1) * (t + 2) / 6;
}
inline constexpr std::size_t term_index(int p, int q, int r) {
  const int a = q + r;
  return tetra(p + a) + static_cast<std::size_t>(a) * (a + 1) / 2 + r;
}

/// Moments of every monomial up to a fixed total degree, built once and then
/// shared read-only.
class MomentTable {
 public:
  MomentTable(Prior prior, int max_degree) : prior_(prior), max_degree_(max_degree) {
    if (max_degree < 0) throw std::invalid_argument("MomentTable: negative degree");
    values_.assign(tetra(max_degree + 1), 0.0);
    for (int t = 0; t <= max_degree; t += 2) {
      for (int a = 0; a <= t; ++a) {
        for (int r = 0; r <= a; ++r) {
          values_[term_index(t - a, a - r, r)] = prior_moment(prior, t - a, a - r, r);
        }
      }
    }
  }

  Prior prior() const { return prior_; }
  int max_degree() const { return max_degree_; }
  double operator()(int p, int q, int r) const { return values_[term_index(p, q, r)]; }

 private:
  Prior prior_;
  int max_degree_;
  std::vector<double> values_;
};

/// Polynomial in (n_x, n_y, n_z) with dense coefficients for every monomial
/// of total degree <= degree().
class SpherePolynomial {
 public:
  SpherePolynomial() : SpherePolynomial(1.0) {}
  explicit SpherePolynomial(double constant) : degree_(0), coeffs_{constant} {}

  static SpherePolynomial zero(int degree) {
    SpherePolynomial s;
    s.degree_ = degree;
    s.coeffs_.assign(tetra(degree + 1), 0.0);
    return s;
  }

  int degree() const { return degree_; }
  double coefficient(int p, int q, int r) const {
    if (p < 0 || q < 0 || r < 0 || p + q + r > degree_) return 0.0;
    return coeffs_[term_index(p, q, r)];
  }
  double& at(int p, int q, int r) { return coeffs_[term_index(p, q, r)]; }
  std::size_t term_count() const { return coeffs_.size(); }
  const std::vector<double>& coefficients() const { return coeffs_; }

  double evaluate(const Vec3& n) const {
    double sum = 0.0;
    for_each_term([&](int p, int q, int r, double c) {
      sum += c * std::pow(n[0], p) * std::pow(n[1], q) * std::pow(n[2], r);
    });
    return sum;
  }

  template <class F>
  void for_each_term(F&& f) const {
    std::size_t i = 0;
    for (int t = 0; t <= degree_; ++t)
      for (int a = 0; a <= t; ++a)
        for (int r = 0; r <= a; ++r, ++i) f(t - a, a - r, r, coeffs_[i]);
  }

  SpherePolynomial& operator+=(const SpherePolynomial& o) {
    if (o.degree_ > degree_) {
      coeffs_.resize(o.coeffs_.size(), 0.0);
      degree_ = o.degree_;
    }
    for (std::size_t i = 0; i < o.coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  SpherePolynomial& operator*=(double s) {
    for (double& c : coeffs_) c *= s;
    return *this;
  }

 private:
  int degree_;
  std::vector<double> coeffs_;
};

/// poly * (1 + a.n)/2 for an arbitrary coefficient vector a. The tree
/// evaluator uses this with the in-plane projection of an axis under a 2d
/// prior, which is not a unit vector.
inline SpherePolynomial multiply_affine_factor(const SpherePolynomial& poly, const Vec3& a) {
  auto out = SpherePolynomial::zero(poly.degree() + 1);
  poly.for_each_term([&](int p, int q, int r, double c) {
    if (c == 0.0) return;
    const double h = 0.5 * c;
    out.at(p, q, r) += h;
    out.at(p + 1, q, r) += h * a[0];
    out.at(p, q + 1, r) += h * a[1];
    out.at(p, q, r + 1) += h * a[2];
  });
  return out;
}

/// poly * (1 + m.n)/2: one factor of the outcome probability product.
inline SpherePolynomial multiply_linear_factor(const SpherePolynomial& poly, const BlochVector& m) {
  return multiply_affine_factor(poly, m.components());
}

inline void check_prior_support(const SpherePolynomial& poly, Prior prior) {
  if (prior != Prior::Circle2D) return;
  poly.for_each_term([](int, int, int r, double c) {
    if (r != 0 && c != 0.0) throw DimensionMismatch("polynomial depends on n_z under a 2d prior");
  });
}

inline double integrate(const SpherePolynomial& poly, const MomentTable& moments) {
  check_prior_support(poly, moments.prior());
  if (poly.degree() > moments.max_degree()) throw std::out_of_range("integrate: moment table too small");
  double sum = 0.0;
  poly.for_each_term([&](int p, int q, int r, double c) { sum += c * moments(p, q, r); });
  return sum;
}

inline double integrate(const SpherePolynomial& poly, Prior prior) {
  return integrate(poly, MomentTable(prior, poly.degree()));
}

/// Unnormalized posterior mean of n given one outcome: V = integral n p(n).
struct PosteriorVector {
  Vec3 components{0.0, 0.0, 0.0};
  double magnitude = 0.0;

  static PosteriorVector from(const Vec3& v) { return {v, norm(v)}; }
};

inline PosteriorVector posterior_vector(const SpherePolynomial& poly, const MomentTable& moments) {
  check_prior_support(poly, moments.prior());
  if (poly.degree() + 1 > moments.max_degree())
    throw std::out_of_range("posterior_vector: moment table too small");
  Vec3 v{0.0, 0.0, 0.0};
  poly.for_each_term([&](int p, int q, int r, double c) {
    v[0] += c * moments(p + 1, q, r);
    v[1] += c * moments(p, q + 1, r);
    v[2] += c * moments(p, q, r + 1);
  });
  return PosteriorVector::from(v);
}

inline PosteriorVector posterior_vector(const SpherePolynomial& poly, Prior prior) {
  return posterior_vector(poly, MomentTable(prior, poly.degree() + 1));
}

}  // namespace qest

// quadrature.hpp
// Gauss-Legendre rule on [-1, 1] and the binomial outcome table used by the
// fixed-axes evaluator.

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qest::detail {

struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 2
};

/// n-point rule, exact for polynomials of degree 2n - 1. Roots of P_n by
/// Newton iteration from the Chebyshev-like initial guess.
inline GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  GaussLegendre rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  // P_n(x) and P_n'(x) by the three-term recurrence
  auto legendre = [n](double x, double& deriv) {
    double prev = 1.0, cur = x;
    for (int k = 2; k <= n; ++k) {
      const double next = ((2.0 * k - 1.0) * x * cur - (k - 1.0) * prev) / k;
      prev = cur;
      cur = next;
    }
    deriv = n * (x * cur - prev) / (x * x - 1.0);
    return cur;
  };
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double deriv = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      const double dx = legendre(x, deriv) / deriv;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre(x, deriv);
    const double w = 2.0 / ((1.0 - x * x) * deriv * deriv);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = w;
    rule.weights[hi] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

inline double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// Binomial pmf C(n,k) q^k (1-q)^(n-k) for k = 0..n, in log space.
inline void binomial_row(int n, double q, double* out) {
  if (q <= 0.0) {
    for (int k = 0; k <= n; ++k) out[k] = k == 0 ? 1.0 : 0.0;
    return;
  }
  if (q >= 1.0) {
    for (int k = 0; k <= n; ++k) out[k] = k == n ? 1.0 : 0.0;
    return;
  }
  const double lq = std::log(q);
  const double lp = std::log1p(-q);
  for (int k = 0; k <= n; ++k) out[k] = std::exp(log_choose(n, k) + k * lq + (n - k) * lp);
}

}  // namespace qest::detail

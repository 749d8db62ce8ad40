// local_search.hpp
// Unconstrained minimizers used by the tree optimizer: a Nelder-Mead
// simplex with dimension-adaptive coefficients, and a BFGS polish driven by
// central finite differences.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace qest::detail {

using Objective = std::function<double(const std::vector<double>&)>;

struct SearchResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  long evaluations = 0;
  bool converged = false;
  std::vector<double> history;  // best value after each iteration
};

struct NelderMeadOptions {
  double initial_step = 0.4;
  int max_iterations = 5000;
  double f_tolerance = 1e-12;
  double x_tolerance = 1e-9;
};

/// Nelder-Mead with the Gao-Han coefficients (reflection 1, expansion
/// 1 + 2/n, contraction 3/4 - 1/(2n), shrink 1 - 1/n), which keep the
/// method effective in tens of dimensions.
inline SearchResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  SearchResult res;
  if (n == 0) {
    res.x = x0;
    res.value = f(x0);
    res.evaluations = 1;
    res.converged = true;
    return res;
  }
  const double dn = static_cast<double>(n);
  const double alpha = 1.0, gamma = 1.0 + 2.0 / dn, rho = 0.75 - 0.5 / dn, sigma = 1.0 - 1.0 / dn;

  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += opt.initial_step;
  for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);
  res.evaluations = static_cast<long>(n + 1);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    return f(x);
  };

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    res.history.push_back(vals[best]);

    double spread = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j) spread = std::max(spread, std::abs(pts[i][j] - pts[best][j]));
    if (std::abs(vals[worst] - vals[best]) <= opt.f_tolerance && spread <= opt.x_tolerance) {
      res.converged = true;
      break;
    }
    if (std::abs(vals[worst] - vals[best]) <= opt.f_tolerance * 1e-2) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / dn;
    }
    for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + alpha * (centroid[j] - pts[worst][j]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + gamma * (xr[j] - centroid[j]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    for (std::size_t j = 0; j < n; ++j)
      xc[j] = outside ? centroid[j] + rho * (xr[j] - centroid[j]) : centroid[j] + rho * (pts[worst][j] - centroid[j]);
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[best][j] + sigma * (pts[i][j] - pts[best][j]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

struct BfgsOptions {
  int max_iterations = 2000;
  double f_tolerance = 1e-13;
  double gradient_tolerance = 1e-9;
  double fd_step = 1e-6;
};

inline void central_gradient(const Objective& f, std::vector<double>& x, double h, std::vector<double>& g,
                             long& evaluations) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  evaluations += 2 * static_cast<long>(x.size());
}

/// Quasi-Newton descent with an inverse-Hessian update and backtracking
/// (Armijo) line search. Converged when a step improves f by less than
/// f_tolerance or the gradient falls below gradient_tolerance.
inline SearchResult bfgs_fd(const Objective& f, std::vector<double> x, const BfgsOptions& opt = {}) {
  const std::size_t n = x.size();
  SearchResult res;
  res.value = f(x);
  res.evaluations = 1;
  if (n == 0) {
    res.x = x;
    res.converged = true;
    return res;
  }
  std::vector<double> h(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
  std::vector<double> g(n), g_new(n), dir(n), x_new(n), s(n), y(n), hy(n);
  central_gradient(f, x, opt.fd_step, g, res.evaluations);
  int stalls = 0;

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    res.history.push_back(res.value);
    double gnorm = 0.0;
    for (double gi : g) gnorm = std::max(gnorm, std::abs(gi));
    if (gnorm < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j) d -= h[i * n + j] * g[j];
      dir[i] = d;
    }
    double slope = std::inner_product(dir.begin(), dir.end(), g.begin(), 0.0);
    if (slope >= 0.0) {  // lost descent: restart from steepest descent
      std::fill(h.begin(), h.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        h[i * n + i] = 1.0;
        dir[i] = -g[i];
      }
      slope = -std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    }
    double step = 1.0, f_new = res.value;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * dir[i];
      f_new = f(x_new);
      ++res.evaluations;
      if (f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;  // no descent left at finite-difference resolution
      break;
    }
    const double gain = res.value - f_new;
    central_gradient(f, x_new, opt.fd_step, g_new, res.evaluations);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
    if (sy > 1e-14) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += h[i * n + j] * y[j];
        hy[i] = acc;
      }
      const double yhy = std::inner_product(y.begin(), y.end(), hy.begin(), 0.0);
      const double c1 = (sy + yhy) / (sy * sy);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          h[i * n + j] += c1 * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
    }
    x.swap(x_new);
    g.swap(g_new);
    res.value = f_new;
    stalls = gain < opt.f_tolerance ? stalls + 1 : 0;
    if (stalls >= 3) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  return res;
}

}  // namespace qest::detail

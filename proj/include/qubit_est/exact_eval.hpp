// exact_eval.hpp
// Exact average fidelity of local measurement strategies, and the
// closed-form collective-measurement bounds they are compared against.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qubit_est/bloch.hpp"
#include "qubit_est/detail/parallel.hpp"
#include "qubit_est/detail/quadrature.hpp"
#include "qubit_est/moments.hpp"
#include "qubit_est/strategy.hpp"

namespace qest {

/// A requested exact computation is beyond the configured size caps.
struct CapExceeded : std::length_error {
  using std::length_error::length_error;
};

// -- collective bounds --------------------------------------------------------

/// Best fidelity of any (collective) measurement on N equatorial copies:
/// 1/2 + 2^-(N+1) sum_i sqrt(C(N,i) C(N,i+1)), summed with log-binomials.
inline double cm_bound_2d(int copies) {
  if (copies < 1) throw std::invalid_argument("cm_bound_2d: N must be >= 1");
  // terms peak near i = N/2; walk outwards with the ratio of neighbours until they vanish
  const int n = copies;
  const int mid = (n - 1) / 2;
  const double t_mid = std::exp(0.5 * (detail::log_choose(n, mid) + detail::log_choose(n, mid + 1)) -
                                (n + 1) * std::numbers::ln2);
  double up = 0.0, down = 0.0, t = t_mid;
  for (int i = mid; i + 1 < n; ++i) {
    t *= std::sqrt(double(n - i) * (n - i - 1) / ((i + 1.0) * (i + 2.0)));
    up += t;
    if (t < 1e-18 * t_mid) break;
  }
  t = t_mid;
  for (int i = mid; i > 0; --i) {
    t *= std::sqrt(double(i) * (i + 1) / (double(n - i + 1) * (n - i)));
    down += t;
    if (t < 1e-18 * t_mid) break;
  }
  return 0.5 + t_mid + (up + down);
}

/// Best fidelity of any measurement on N copies of a fully unknown qubit.
inline double cm_bound_3d(int copies) {
  if (copies < 1) throw std::invalid_argument("cm_bound_3d: N must be >= 1");
  return (copies + 1.0) / (copies + 2.0);
}

inline double cm_bound(Prior prior, int copies) {
  return prior == Prior::Sphere3D ? cm_bound_3d(copies) : cm_bound_2d(copies);
}

// -- reports ------------------------------------------------------------------

struct OutcomeRecord {
  std::string id;
  double probability = 0.0;
  double v_magnitude = 0.0;
  BlochVector guess;
  double contribution = 0.0;  // integral of (1 + n.M) p_n(x) dn; F is half the sum
};

struct FidelityReport {
  int copies = 0;
  double fidelity = 0.0;
  double total_probability = 0.0;
  double sum_v_magnitude = 0.0;
  Prior prior = Prior::Sphere3D;
  std::string rule;
  std::string strategy;
  std::vector<OutcomeRecord> outcomes;

  double scaled_infidelity() const { return copies * (1.0 - fidelity); }
};

struct EvalOptions {
  int depth_cap = 16;
  int fixed_axes_cap_3d = 80;   // max repetitions per axis
  int fixed_axes_cap_2d = 600;
  int threads = 1;
  bool keep_outcomes = true;
};

// -- adaptive trees -----------------------------------------------------------

/// Depth-first walk over every outcome string of an adaptive tree.
///
/// The polynomial p_n(x_k) of each prefix is kept on a per-depth stack and
/// extended by one linear factor per level. The last level is never
/// expanded: its children follow from the parent's zeroth, first and second
/// moments, P' = (P +- m.V)/2 and V' = (V +- S m)/2.
class TreeEvaluator {
 public:
  TreeEvaluator(Prior prior, int depth)
      : prior_(prior), depth_(depth), moments_(prior, depth + 1), polys_(static_cast<std::size_t>(depth)) {
    if (depth < 1) throw std::invalid_argument("TreeEvaluator: depth must be >= 1");
    for (int k = 0; k < depth; ++k) polys_[static_cast<std::size_t>(k)].assign(tetra(k + 1), 0.0);
    polys_[0][0] = 1.0;
    for (int t = 0; t < depth; ++t)
      for (int a = 0; a <= t; ++a)
        for (int r = 0; r <= a; ++r) terms_.push_back({t - a, a - r, r});
  }

  Prior prior() const { return prior_; }
  int depth() const { return depth_; }

  /// Calls leaf(history, probability, V) for all 2^N outcomes.
  template <class Leaf>
  void walk(const AdaptiveTree& tree, Leaf&& leaf) {
    if (tree.depth() != depth_) throw std::invalid_argument("TreeEvaluator: tree depth mismatch");
    visit(tree, History{}, leaf);
  }

  /// Optimal-guess fidelity (1 + sum |V(x)|)/2.
  double fidelity(const AdaptiveTree& tree) {
    double sum = 0.0;
    walk(tree, [&](const History&, double, const Vec3& v) { sum += norm(v); });
    return 0.5 * (1.0 + sum);
  }

 private:
  struct Term {
    int p, q, r;
  };

  Vec3 axis(const BlochVector& m) const {
    Vec3 a = m.components();
    if (prior_ == Prior::Circle2D) a[2] = 0.0;  // n_z vanishes on the equator
    return a;
  }

  template <class Leaf>
  void visit(const AdaptiveTree& tree, const History& h, Leaf& leaf) {
    const int k = h.length;
    const std::vector<double>& poly = polys_[static_cast<std::size_t>(k)];
    const Vec3 a = axis(tree.direction(h));
    const std::size_t count = tetra(k + 1);

    if (k == depth_ - 1) {
      double prob = 0.0;
      Vec3 v{0.0, 0.0, 0.0};
      double s[3][3] = {};
      for (std::size_t i = 0; i < count; ++i) {
        const double c = poly[i];
        if (c == 0.0) continue;
        const auto [p, q, r] = terms_[i];
        prob += c * moments_(p, q, r);
        v[0] += c * moments_(p + 1, q, r);
        v[1] += c * moments_(p, q + 1, r);
        v[2] += c * moments_(p, q, r + 1);
        s[0][0] += c * moments_(p + 2, q, r);
        s[1][1] += c * moments_(p, q + 2, r);
        s[2][2] += c * moments_(p, q, r + 2);
        s[0][1] += c * moments_(p + 1, q + 1, r);
        s[0][2] += c * moments_(p + 1, q, r + 1);
        s[1][2] += c * moments_(p, q + 1, r + 1);
      }
      s[1][0] = s[0][1];
      s[2][0] = s[0][2];
      s[2][1] = s[1][2];
      const Vec3 sm{s[0][0] * a[0] + s[0][1] * a[1] + s[0][2] * a[2], s[1][0] * a[0] + s[1][1] * a[1] + s[1][2] * a[2],
                    s[2][0] * a[0] + s[2][1] * a[1] + s[2][2] * a[2]};
      const double mv = dot(a, v);
      leaf(h.then(0), 0.5 * (prob + mv), scaled(v + sm, 0.5));
      leaf(h.then(1), 0.5 * (prob - mv), scaled(v - sm, 0.5));
      return;
    }

    std::vector<double>& child = polys_[static_cast<std::size_t>(k + 1)];
    for (int outcome = 0; outcome < 2; ++outcome) {
      const double sign = outcome == 0 ? 0.5 : -0.5;
      std::fill(child.begin(), child.end(), 0.0);
      for (std::size_t i = 0; i < count; ++i) {
        const double c = poly[i];
        if (c == 0.0) continue;
        const auto [p, q, r] = terms_[i];
        child[i] += 0.5 * c;
        const double cs = sign * c;
        child[term_index(p + 1, q, r)] += cs * a[0];
        child[term_index(p, q + 1, r)] += cs * a[1];
        child[term_index(p, q, r + 1)] += cs * a[2];
      }
      visit(tree, h.then(outcome), leaf);
    }
  }

  Prior prior_;
  int depth_;
  MomentTable moments_;
  std::vector<std::vector<double>> polys_;
  std::vector<Term> terms_;
};

/// Guess as a function of the full outcome string and its posterior vector.
using GuessFunction = std::function<BlochVector(const History&, const PosteriorVector&)>;

inline BlochVector default_tiebreak(Prior prior) { return prior == Prior::Sphere3D ? kAxisZ : kAxisX; }

inline GuessFunction optimal_guess_rule(Prior prior) {
  const BlochVector tie = default_tiebreak(prior);
  return [tie](const History&, const PosteriorVector& v) { return optimal_guess(v, tie); };
}

/// Tomographic guess applied to the bit strings of plan.to_tree().
inline GuessFunction tomographic_tree_rule(const FixedAxesPlan& plan) {
  return [plan](const History& h, const PosteriorVector&) {
    return tomographic_guess(plan.frequencies(h), plan.axes()).direction;
  };
}

inline void check_tree_fits(const AdaptiveTree& tree, Prior prior, const EvalOptions& opts) {
  if (tree.depth() > opts.depth_cap)
    throw CapExceeded("adaptive tree depth " + std::to_string(tree.depth()) + " exceeds the exact-evaluation cap " +
                      std::to_string(opts.depth_cap));
  (void)prior;
}

/// Exact fidelity of an adaptive tree with an arbitrary guess rule:
/// F = sum_x (P(x) + V(x).M(x))/2.
inline FidelityReport eval_adaptive_tree(const AdaptiveTree& tree, Prior prior, const GuessFunction& guess,
                                         const std::string& rule_name, const EvalOptions& opts = {}) {
  check_tree_fits(tree, prior, opts);
  FidelityReport report;
  report.copies = tree.depth();
  report.prior = prior;
  report.rule = rule_name;
  report.strategy = "adaptive_tree";
  if (opts.keep_outcomes) report.outcomes.reserve(std::size_t{1} << tree.depth());
  double contrib = 0.0;
  TreeEvaluator eval(prior, tree.depth());
  eval.walk(tree, [&](const History& h, double prob, const Vec3& v) {
    const PosteriorVector pv = PosteriorVector::from(v);
    const BlochVector m = guess(h, pv);
    const double c = prob + dot(v, m.components());
    report.total_probability += prob;
    report.sum_v_magnitude += pv.magnitude;
    contrib += c;
    if (opts.keep_outcomes) report.outcomes.push_back({h.str(), prob, pv.magnitude, m, c});
  });
  report.fidelity = 0.5 * contrib;
  return report;
}

inline FidelityReport eval_adaptive_tree(const AdaptiveTree& tree, Prior prior, const EvalOptions& opts = {}) {
  auto report = eval_adaptive_tree(tree, prior, optimal_guess_rule(prior), "optimal", opts);
  // the optimal rule attains (1 + sum |V|)/2; report that form directly
  report.fidelity = 0.5 * (1.0 + report.sum_v_magnitude);
  return report;
}

// -- fixed axes ---------------------------------------------------------------

/// Outcome probabilities P(alpha) and posterior vectors V(alpha) of a
/// fixed-axes plan, indexed by the per-axis plus counts, in the plan's
/// canonical frame (axis i along coordinate i).
///
/// Each outcome probability is a product of one binomial factor per axis, so
/// integrals over the prior are done on a product grid (Gauss-Legendre in
/// n_z, equispaced in the azimuth) that is exact for the polynomial degree
/// N + 1 involved. The integrand is non-negative, so no cancellation occurs
/// at large N. Partial sums over the azimuth are shared by all n_z counts.
class FixedAxesTable {
 public:
  FixedAxesTable(const FixedAxesPlan& plan, Prior prior, int threads = 1) : prior_(prior), reps_(plan.repetitions()) {
    if (!plan.fits(prior)) throw DimensionMismatch("fixed-axes plan does not match the prior dimension");
    std::size_t total = 1;
    for (int r : reps_) total *= static_cast<std::size_t>(r + 1);
    prob_.assign(total, 0.0);
    v_.assign(total, Vec3{0.0, 0.0, 0.0});
    if (prior == Prior::Sphere3D)
      build_sphere(threads);
    else
      build_circle(threads);
  }

  Prior prior() const { return prior_; }
  const std::vector<int>& repetitions() const { return reps_; }
  std::size_t size() const { return prob_.size(); }

  std::size_t index(const std::vector<int>& plus) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < reps_.size(); ++i) idx = idx * static_cast<std::size_t>(reps_[i] + 1) + plus[i];
    return idx;
  }
  std::vector<int> counts(std::size_t idx) const {
    std::vector<int> plus(reps_.size());
    for (std::size_t i = reps_.size(); i-- > 0;) {
      plus[i] = static_cast<int>(idx % static_cast<std::size_t>(reps_[i] + 1));
      idx /= static_cast<std::size_t>(reps_[i] + 1);
    }
    return plus;
  }

  double probability(std::size_t idx) const { return prob_[idx]; }
  const Vec3& posterior(std::size_t idx) const { return v_[idx]; }

 private:
  void build_sphere(int threads) {
    const int degree = reps_[0] + reps_[1] + reps_[2] + 1;
    const int nz = degree / 2 + 1;  // 2*nz - 1 >= degree
    const int nphi = degree + 1;
    const auto gl = detail::gauss_legendre(nz);
    const std::size_t grid = static_cast<std::size_t>(nz) * nphi;
    std::vector<double> nx(grid), ny(grid);
    for (int j = 0; j < nz; ++j) {
      const double z = gl.nodes[static_cast<std::size_t>(j)];
      const double s = std::sqrt(1.0 - z * z);
      for (int l = 0; l < nphi; ++l) {
        const double phi = 2.0 * std::numbers::pi * l / nphi;
        nx[static_cast<std::size_t>(j) * nphi + l] = s * std::cos(phi);
        ny[static_cast<std::size_t>(j) * nphi + l] = s * std::sin(phi);
      }
    }
    const int rx = reps_[0], ry = reps_[1], rz = reps_[2];
    // tx[k * grid + g]: binomial weight of k plus outcomes on x at grid point g
    std::vector<double> tx(static_cast<std::size_t>(rx + 1) * grid), ty(static_cast<std::size_t>(ry + 1) * grid);
    std::vector<double> tz(static_cast<std::size_t>(rz + 1) * nz);
    std::vector<double> row(static_cast<std::size_t>(std::max({rx, ry, rz}) + 1));
    for (std::size_t g = 0; g < grid; ++g) {
      detail::binomial_row(rx, 0.5 * (1.0 + nx[g]), row.data());
      for (int k = 0; k <= rx; ++k) tx[static_cast<std::size_t>(k) * grid + g] = row[static_cast<std::size_t>(k)];
      detail::binomial_row(ry, 0.5 * (1.0 + ny[g]), row.data());
      for (int k = 0; k <= ry; ++k) ty[static_cast<std::size_t>(k) * grid + g] = row[static_cast<std::size_t>(k)];
    }
    for (int j = 0; j < nz; ++j) {
      detail::binomial_row(rz, 0.5 * (1.0 + gl.nodes[static_cast<std::size_t>(j)]), row.data());
      for (int k = 0; k <= rz; ++k)
        tz[static_cast<std::size_t>(k) * nz + j] = row[static_cast<std::size_t>(k)] * gl.weights[static_cast<std::size_t>(j)] * 0.5;
    }

    const std::size_t pairs = static_cast<std::size_t>(rx + 1) * (ry + 1);
    detail::parallel_for(pairs, threads, [&](std::size_t pair) {
      const std::size_t kx = pair / static_cast<std::size_t>(ry + 1);
      const std::size_t ky = pair % static_cast<std::size_t>(ry + 1);
      const double* ax = &tx[kx * grid];
      const double* ay = &ty[ky * grid];
      // azimuthal averages of the x/y factors times (1, n_x, n_y) per z node
      std::vector<double> r0(static_cast<std::size_t>(nz)), r1(static_cast<std::size_t>(nz)), r2(static_cast<std::size_t>(nz));
      for (int j = 0; j < nz; ++j) {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        const std::size_t base = static_cast<std::size_t>(j) * nphi;
        for (int l = 0; l < nphi; ++l) {
          const std::size_t g = base + static_cast<std::size_t>(l);
          const double w = ax[g] * ay[g];
          s0 += w;
          s1 += w * nx[g];
          s2 += w * ny[g];
        }
        r0[static_cast<std::size_t>(j)] = s0 / nphi;
        r1[static_cast<std::size_t>(j)] = s1 / nphi;
        r2[static_cast<std::size_t>(j)] = s2 / nphi;
      }
      for (int kz = 0; kz <= rz; ++kz) {
        const double* az = &tz[static_cast<std::size_t>(kz) * nz];
        double p = 0.0, vx = 0.0, vy = 0.0, vz = 0.0;
        for (int j = 0; j < nz; ++j) {
          const auto jj = static_cast<std::size_t>(j);
          p += az[j] * r0[jj];
          vx += az[j] * r1[jj];
          vy += az[j] * r2[jj];
          vz += az[j] * r0[jj] * gl.nodes[jj];
        }
        const std::size_t idx = pair * static_cast<std::size_t>(rz + 1) + static_cast<std::size_t>(kz);
        prob_[idx] = p;
        v_[idx] = {vx, vy, vz};
      }
    });
  }

  void build_circle(int threads) {
    const int degree = reps_[0] + reps_[1] + 1;
    const int nphi = degree + 1;
    std::vector<double> cx(static_cast<std::size_t>(nphi)), sy(static_cast<std::size_t>(nphi));
    for (int l = 0; l < nphi; ++l) {
      const double phi = 2.0 * std::numbers::pi * l / nphi;
      cx[static_cast<std::size_t>(l)] = std::cos(phi);
      sy[static_cast<std::size_t>(l)] = std::sin(phi);
    }
    const int rx = reps_[0], ry = reps_[1];
    std::vector<double> tx(static_cast<std::size_t>(rx + 1) * nphi), ty(static_cast<std::size_t>(ry + 1) * nphi);
    std::vector<double> row(static_cast<std::size_t>(std::max(rx, ry) + 1));
    for (int l = 0; l < nphi; ++l) {
      const auto ll = static_cast<std::size_t>(l);
      detail::binomial_row(rx, 0.5 * (1.0 + cx[ll]), row.data());
      for (int k = 0; k <= rx; ++k) tx[static_cast<std::size_t>(k) * nphi + ll] = row[static_cast<std::size_t>(k)] / nphi;
      detail::binomial_row(ry, 0.5 * (1.0 + sy[ll]), row.data());
      for (int k = 0; k <= ry; ++k) ty[static_cast<std::size_t>(k) * nphi + ll] = row[static_cast<std::size_t>(k)];
    }
    detail::parallel_for(static_cast<std::size_t>(rx + 1), threads, [&](std::size_t kx) {
      const double* ax = &tx[kx * nphi];
      for (int ky = 0; ky <= ry; ++ky) {
        const double* ay = &ty[static_cast<std::size_t>(ky) * nphi];
        double p = 0.0, vx = 0.0, vy = 0.0;
        for (int l = 0; l < nphi; ++l) {
          const double w = ax[l] * ay[l];
          p += w;
          vx += w * cx[static_cast<std::size_t>(l)];
          vy += w * sy[static_cast<std::size_t>(l)];
        }
        const std::size_t idx = kx * static_cast<std::size_t>(ry + 1) + static_cast<std::size_t>(ky);
        prob_[idx] = p;
        v_[idx] = {vx, vy, 0.0};
      }
    });
  }

  Prior prior_;
  std::vector<int> reps_;
  std::vector<double> prob_;
  std::vector<Vec3> v_;
};

inline void check_fixed_axes_caps(const FixedAxesPlan& plan, Prior prior, const EvalOptions& opts) {
  const int cap = prior == Prior::Sphere3D ? opts.fixed_axes_cap_3d : opts.fixed_axes_cap_2d;
  for (int r : plan.repetitions())
    if (r > cap)
      throw CapExceeded("fixed-axes plan with " + std::to_string(r) + " repetitions per axis exceeds the cap " +
                        std::to_string(cap) + " for the " + std::string(to_string(prior)) + " prior");
}

/// Plan-frame vector from canonical components (component i along axis i).
inline Vec3 to_plan_frame(const FixedAxesPlan& plan, const Vec3& canonical) {
  Vec3 out{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < plan.axes().size(); ++i) out = out + scaled(plan.axes()[i].components(), canonical[i]);
  return out;
}

/// Exact fidelity of a fixed-axes plan, enumerating frequency tuples rather
/// than bit strings.
inline FidelityReport eval_fixed_axes(const FixedAxesPlan& plan, GuessRule rule, Prior prior,
                                      const EvalOptions& opts = {}) {
  if (!plan.fits(prior)) throw DimensionMismatch("fixed-axes plan does not match the prior dimension");
  check_fixed_axes_caps(plan, prior, opts);
  const FixedAxesTable table(plan, prior, opts.threads);

  FidelityReport report;
  report.copies = plan.copies();
  report.prior = prior;
  report.rule = std::string(to_string(rule));
  report.strategy = "fixed_axes";
  if (opts.keep_outcomes) report.outcomes.reserve(table.size());

  const std::size_t axes = plan.axes().size();
  double contrib = 0.0;
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    const double prob = table.probability(idx);
    const Vec3& v = table.posterior(idx);
    const double vmag = norm(v);
    Vec3 guess{0.0, 0.0, 0.0};
    if (rule == GuessRule::Optimal) {
      if (vmag > kZeroPosterior)
        guess = scaled(v, 1.0 / vmag);
      else
        guess[0] = 1.0;
    } else {
      const auto plus = table.counts(idx);
      const Guess g = tomographic_guess(FrequencyRecord(plus, plan.repetitions()));
      guess = g.direction.components();
    }
    const double c = prob + dot(v, guess);
    report.total_probability += prob;
    report.sum_v_magnitude += vmag;
    contrib += c;
    if (opts.keep_outcomes) {
      const auto plus = table.counts(idx);
      std::string id;
      for (std::size_t i = 0; i < axes; ++i) id += (i ? "," : "") + std::to_string(plus[i]);
      report.outcomes.push_back({id, prob, vmag, BlochVector(to_plan_frame(plan, guess)), c});
    }
  }
  report.fidelity = rule == GuessRule::Optimal ? 0.5 * (1.0 + report.sum_v_magnitude) : 0.5 * contrib;
  return report;
}

/// Fidelity of the balanced canonical plan on `copies` copies.
inline double fixed_axes_fidelity(Prior prior, int copies, GuessRule rule, int threads = 1) {
  EvalOptions opts;
  opts.keep_outcomes = false;
  opts.threads = threads;
  opts.fixed_axes_cap_2d = opts.fixed_axes_cap_3d = 1 << 20;
  return eval_fixed_axes(FixedAxesPlan::for_copies(prior, copies), rule, prior, opts).fidelity;
}

// -- bound ordering -----------------------------------------------------------

struct LocalFidelity {
  Prior prior;
  int copies;
  double fidelity;
  std::string label;
};

struct BoundOrderingReport {
  struct Row {
    int copies;
    double cm_2d;
    double cm_3d;
    bool ordered;
  };
  struct LocalCheck {
    LocalFidelity local;
    double bound;
    bool within;
  };
  std::vector<Row> rows;
  std::vector<LocalCheck> locals;
  bool all_ok = true;
};

/// Checks F_CM(2d) > F_CM(3d) for N = 1..n_max and that every supplied local
/// fidelity respects the matching bound up to 1e-9.
inline BoundOrderingReport verify_bound_ordering(int n_max, const std::vector<LocalFidelity>& locals = {}) {
  if (n_max < 1) throw std::invalid_argument("verify_bound_ordering: N_max must be >= 1");
  BoundOrderingReport rep;
  for (int n = 1; n <= n_max; ++n) {
    const double b2 = cm_bound_2d(n), b3 = cm_bound_3d(n);
    rep.rows.push_back({n, b2, b3, b2 > b3});
    rep.all_ok = rep.all_ok && b2 > b3;
  }
  for (const auto& l : locals) {
    const double b = cm_bound(l.prior, l.copies);
    const bool ok = l.fidelity <= b + 1e-9;
    rep.locals.push_back({l, b, ok});
    rep.all_ok = rep.all_ok && ok;
  }
  return rep;
}

}  // namespace qest

// optimizer.hpp
// Numerical search for the best adaptive local-measurement tree on N
// copies, plus diagnostics of the structure of the optimum.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qubit_est/bloch.hpp"
#include "qubit_est/detail/local_search.hpp"
#include "qubit_est/detail/parallel.hpp"
#include "qubit_est/exact_eval.hpp"
#include "qubit_est/strategy.hpp"

namespace qest {

inline constexpr int kMaxOptimizeDepth = 8;

struct OptimizationConfig {
  int restarts = 20;
  int max_iterations = 4000;  // per local-search phase
  double tolerance = 1e-12;   // on F
  bool gauge_fixing = true;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  }
};

struct RestartSummary {
  int restart = 0;
  bool heuristic_start = false;
  double fidelity = 0.0;
  long evaluations = 0;
  bool converged = false;
};

struct OptimizationResult {
  AdaptiveTree tree;
  FidelityReport report;
  bool converged = false;
  int best_restart = 0;
  std::uint64_t seed = 0;
  long evaluations = 0;
  std::vector<RestartSummary> restarts;
  std::vector<double> history;  // best F per iteration of the winning restart
};

/// Angle parameterization of a tree. Under gauge fixing the root is pinned
/// (+z on the sphere, +x on the equator) and, on the sphere, m0("0") is held
/// in the x-z half-plane x >= 0; rotations about the prior's symmetry axes
/// cannot change F, so nothing is lost. Equatorial trees keep every node in
/// the plane and use one azimuth per node.
class TreeParameterization {
 public:
  TreeParameterization(int depth, Prior prior, bool gauge_fixing)
      : depth_(depth), prior_(prior), gauge_(gauge_fixing) {}

  std::size_t size() const {
    const std::size_t nodes = (std::size_t{1} << depth_) - 1;
    if (prior_ == Prior::Circle2D) return nodes - (gauge_ ? 1 : 0);
    if (!gauge_) return 2 * nodes;
    return 2 * nodes - 2 - (depth_ >= 2 ? 1 : 0);
  }

  AdaptiveTree to_tree(const std::vector<double>& x) const {
    AdaptiveTree tree(depth_);
    std::size_t p = 0;
    for (std::size_t i = 0; i < tree.node_count(); ++i) {
      if (prior_ == Prior::Circle2D) {
        const double phi = (gauge_ && i == 0) ? 0.0 : x[p++];
        tree.set_node(i, BlochVector::planar(std::cos(phi), std::sin(phi)));
        continue;
      }
      if (gauge_ && i == 0) {
        tree.set_node(i, kAxisZ);
      } else if (gauge_ && i == 1) {
        tree.set_node(i, BlochVector::from_angles(x[p++], 0.0));
      } else {
        const double polar = x[p++];
        const double azimuth = x[p++];
        tree.set_node(i, BlochVector::from_angles(polar, azimuth));
      }
    }
    return tree;
  }

  /// Inverse of to_tree. With gauge fixing the tree is first rotated into
  /// the gauge; the rotation preserves F under the isotropic prior.
  std::vector<double> from_tree(const AdaptiveTree& in) const {
    const AdaptiveTree tree = gauge_ ? gauge_rotated(in) : in;
    std::vector<double> x;
    x.reserve(size());
    for (std::size_t i = 0; i < tree.node_count(); ++i) {
      const Vec3& v = tree.node(i).components();
      if (prior_ == Prior::Circle2D) {
        if (!(gauge_ && i == 0)) x.push_back(std::atan2(v[1], v[0]));
        continue;
      }
      if (gauge_ && i == 0) continue;
      const double polar = std::acos(std::clamp(v[2], -1.0, 1.0));
      if (gauge_ && i == 1) {
        x.push_back(polar);
        continue;
      }
      x.push_back(polar);
      x.push_back(std::atan2(v[1], v[0]));
    }
    return x;
  }

  AdaptiveTree gauge_rotated(const AdaptiveTree& tree) const {
    AdaptiveTree out(tree.depth());
    if (prior_ == Prior::Circle2D) {
      const double phi0 = std::atan2(tree.node(0).y(), tree.node(0).x());
      const double c = std::cos(phi0), s = std::sin(phi0);
      for (std::size_t i = 0; i < tree.node_count(); ++i) {
        const BlochVector& v = tree.node(i);
        out.set_node(i, BlochVector::planar(c * v.x() + s * v.y(), -s * v.x() + c * v.y()));
      }
      return out;
    }
    const Vec3 e3 = tree.node(0).components();
    Vec3 e1{0.0, 0.0, 0.0};
    if (tree.node_count() > 1) e1 = tree.node(1).components() - scaled(e3, dot(tree.node(1).components(), e3));
    if (norm(e1) < 1e-9) e1 = orthonormal_completion(tree.node(0)).first.components();
    e1 = scaled(e1, 1.0 / norm(e1));
    const Vec3 e2 = cross(e3, e1);
    for (std::size_t i = 0; i < tree.node_count(); ++i) {
      const Vec3& v = tree.node(i).components();
      out.set_node(i, BlochVector(dot(v, e1), dot(v, e2), dot(v, e3)));
    }
    return out;
  }

 private:
  int depth_;
  Prior prior_;
  bool gauge_;
};

namespace detail {

inline BlochVector random_direction(Prior prior, Rng& rng) { return sample_prior(prior, rng); }

/// Random unit vector orthogonal to `s` (any random vector when s ~ 0).
inline BlochVector random_orthogonal(const Vec3& s, Prior prior, Rng& rng) {
  const double len = norm(s);
  if (prior == Prior::Circle2D) {
    if (len < 1e-9) return random_direction(prior, rng);
    const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
    return BlochVector::planar(-sign * s[1], sign * s[0]);
  }
  for (;;) {
    const Vec3 r = random_direction(prior, rng).components();
    if (len < 1e-9) return BlochVector(r);
    const Vec3 u = scaled(s, 1.0 / len);
    const Vec3 perp = r - scaled(u, dot(r, u));
    if (norm(perp) > 1e-3) return BlochVector(perp);
  }
}

/// Each measurement probes the plane orthogonal to the running sum of the
/// outcome vectors seen so far, with a random orientation inside it.
inline AdaptiveTree orthogonal_heuristic_tree(int depth, Prior prior, Rng& rng) {
  AdaptiveTree tree(depth);
  for (std::size_t i = 0; i < tree.node_count(); ++i) {
    const History h = AdaptiveTree::node_history(i);
    Vec3 sum{0.0, 0.0, 0.0};
    for (int k = 1; k <= h.length; ++k) sum = sum + tree.outcome_vector(h, k).components();
    tree.set_node(i, random_orthogonal(sum, prior, rng));
  }
  return tree;
}

inline AdaptiveTree random_tree(int depth, Prior prior, Rng& rng) {
  AdaptiveTree tree(depth);
  for (std::size_t i = 0; i < tree.node_count(); ++i) tree.set_node(i, random_direction(prior, rng));
  return tree;
}

}  // namespace detail

/// Best tree over multi-start local searches: a Nelder-Mead simplex on -F
/// followed by a finite-difference BFGS polish. Even restarts start from
/// the orthogonal-probing heuristic, odd ones from random directions.
inline OptimizationResult optimize_tree(int copies, Prior prior, const OptimizationConfig& cfg = {}) {
  cfg.validate();
  if (copies < 1) throw std::invalid_argument("optimize_tree: N must be >= 1");
  if (copies > kMaxOptimizeDepth)
    throw CapExceeded("optimize_tree: N = " + std::to_string(copies) + " exceeds the cap " +
                      std::to_string(kMaxOptimizeDepth));

  const TreeParameterization param(copies, prior, cfg.gauge_fixing);
  struct Run {
    std::vector<double> x;
    RestartSummary summary;
    std::vector<double> history;
  };
  std::vector<Run> runs(static_cast<std::size_t>(cfg.restarts));

  detail::parallel_for(runs.size(), cfg.threads, [&](std::size_t r) {
    Rng rng = Rng(cfg.seed).split(r);
    TreeEvaluator eval(prior, copies);
    const detail::Objective objective = [&](const std::vector<double>& x) { return -eval.fidelity(param.to_tree(x)); };

    const bool heuristic = r % 2 == 0;
    const AdaptiveTree start =
        heuristic ? detail::orthogonal_heuristic_tree(copies, prior, rng) : detail::random_tree(copies, prior, rng);

    detail::NelderMeadOptions nm;
    nm.max_iterations = cfg.max_iterations;
    nm.f_tolerance = cfg.tolerance;
    auto simplex = detail::nelder_mead(objective, param.from_tree(start), nm);

    // |V(x)| is not differentiable where it vanishes; leave such points to the simplex
    double min_v = std::numeric_limits<double>::infinity();
    eval.walk(param.to_tree(simplex.x), [&](const History&, double, const Vec3& v) { min_v = std::min(min_v, norm(v)); });
    detail::SearchResult polish;
    polish.x = simplex.x;
    polish.value = simplex.value;
    if (min_v >= 1e-6) {
      detail::BfgsOptions bo;
      bo.max_iterations = cfg.max_iterations;
      bo.f_tolerance = cfg.tolerance;
      polish = detail::bfgs_fd(objective, simplex.x, bo);
    }

    Run& run = runs[r];
    const bool better = polish.value <= simplex.value;
    run.x = better ? polish.x : simplex.x;
    run.history = simplex.history;
    run.history.insert(run.history.end(), polish.history.begin(), polish.history.end());
    for (double& h : run.history) h = -h;
    run.summary = {static_cast<int>(r), heuristic, -std::min(polish.value, simplex.value),
                   simplex.evaluations + polish.evaluations, simplex.converged || polish.converged};
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].summary.fidelity > runs[best].summary.fidelity) best = r;  // ties keep the lowest restart

  OptimizationResult out{param.to_tree(runs[best].x), {}, runs[best].summary.converged, static_cast<int>(best),
                         cfg.seed, 0, {}, runs[best].history};
  for (const auto& run : runs) {
    out.restarts.push_back(run.summary);
    out.evaluations += run.summary.evaluations;
  }
  out.report = eval_adaptive_tree(out.tree, prior);
  out.report.strategy = "optimized_tree";
  return out;
}

/// Optimal guess V(x)/|V(x)| for one full outcome string of `tree`.
inline BlochVector optimal_guess_vector(const AdaptiveTree& tree, const History& outcome, Prior prior = Prior::Sphere3D) {
  if (outcome.length != tree.depth()) throw std::invalid_argument("outcome length must equal the tree depth");
  // build p_n(x) factor by factor and read off V
  SpherePolynomial poly;
  for (int k = 1; k <= tree.depth(); ++k) {
    Vec3 a = tree.outcome_vector(outcome, k).components();
    if (prior == Prior::Circle2D) a[2] = 0.0;
    poly = multiply_affine_factor(poly, a);
  }
  return optimal_guess(posterior_vector(poly, prior), default_tiebreak(prior));
}

// -- structure diagnostics ----------------------------------------------------

struct NodeStructure {
  std::string history;
  int depth = 0;                // 1-based index of the measurement at this node
  double angle_to_guess = 0.0;  // degrees between m0 and the prefix's optimal guess
  bool guess_defined = false;   // false at the root and where V(prefix) = 0
};

struct DepthStructure {
  int depth = 0;
  double max_pairwise_angle = 0.0;  // degrees, directions compared up to sign
  double mean_angle_to_guess = 0.0;
  double max_deviation_from_orthogonal = 0.0;  // max |90 - angle_to_guess|
};

struct StructureReport {
  std::vector<NodeStructure> nodes;
  std::vector<DepthStructure> depths;
  double fidelity = 0.0;
  double best_fixed_fidelity = 0.0;  // best history-independent tree built from one root-to-leaf path
  double communication_gain = 0.0;   // fidelity - best_fixed_fidelity
  bool history_dependent = false;
};

namespace detail {

inline double axis_angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(std::abs(dot(a, b)) / (norm(a) * norm(b)), 0.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace detail

/// Per-depth geometry of a tree: the angle of every measurement to the
/// guess one would make from the outcomes so far, and whether classical
/// communication is actually used.
///
/// Raw same-depth angles overstate history dependence, because subtrees can
/// often be rotated about earlier axes without changing F. The flag instead
/// compares F with the history-independent trees that reuse the directions
/// along a single root-to-leaf path at every node of each depth; the tree is
/// history dependent when none of them comes within `gain_tol`.
inline StructureReport structure_report(const AdaptiveTree& tree, Prior prior = Prior::Sphere3D,
                                        double gain_tol = 1e-6) {
  StructureReport rep;
  for (std::size_t i = 0; i < tree.node_count(); ++i) {
    const History h = AdaptiveTree::node_history(i);
    NodeStructure ns;
    ns.history = h.str();
    ns.depth = h.length + 1;
    if (h.length > 0) {
      SpherePolynomial poly;
      for (int k = 1; k <= h.length; ++k) {
        Vec3 a = tree.outcome_vector(h, k).components();
        if (prior == Prior::Circle2D) a[2] = 0.0;
        poly = multiply_affine_factor(poly, a);
      }
      const PosteriorVector v = posterior_vector(poly, prior);
      if (v.magnitude > kZeroPosterior) {
        ns.guess_defined = true;
        const double c = std::clamp(dot(tree.node(i).components(), v.components) / v.magnitude, -1.0, 1.0);
        ns.angle_to_guess = std::acos(c) * 180.0 / std::numbers::pi;
      }
    }
    rep.nodes.push_back(ns);
  }

  for (int k = 0; k < tree.depth(); ++k) {
    DepthStructure ds;
    ds.depth = k + 1;
    const std::size_t lo = (std::size_t{1} << k) - 1, hi = (std::size_t{2} << k) - 1;
    int guesses = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = i + 1; j < hi; ++j)
        ds.max_pairwise_angle =
            std::max(ds.max_pairwise_angle, detail::axis_angle_deg(tree.node(i).components(), tree.node(j).components()));
      if (rep.nodes[i].guess_defined) {
        ds.mean_angle_to_guess += rep.nodes[i].angle_to_guess;
        ds.max_deviation_from_orthogonal =
            std::max(ds.max_deviation_from_orthogonal, std::abs(90.0 - rep.nodes[i].angle_to_guess));
        ++guesses;
      }
    }
    if (guesses > 0) ds.mean_angle_to_guess /= guesses;
    rep.depths.push_back(ds);
  }

  TreeEvaluator eval(prior, tree.depth());
  rep.fidelity = eval.fidelity(tree);
  const std::uint32_t paths = 1u << (tree.depth() - 1);
  for (std::uint32_t leaf = 0; leaf < paths; ++leaf) {
    AdaptiveTree fixed(tree.depth());
    for (int k = 0; k < tree.depth(); ++k) {
      const BlochVector& m = tree.direction({leaf & ((1u << k) - 1u), k});
      for (std::uint32_t b = 0; b < (1u << k); ++b) fixed.set_direction({b, k}, m);
    }
    rep.best_fixed_fidelity = std::max(rep.best_fixed_fidelity, eval.fidelity(fixed));
  }
  rep.communication_gain = rep.fidelity - rep.best_fixed_fidelity;
  rep.history_dependent = rep.communication_gain > gain_tol;
  return rep;
}

}  // namespace qest

// strategy.hpp
// Measurement plans (adaptive outcome trees, fixed orthogonal axes, the
// two-stage asymptotic scheme) and the guess rules applied to their data.

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qubit_est/bloch.hpp"
#include "qubit_est/moments.hpp"

namespace qest {

struct InvalidPlan : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Outcome history i_k ... i_1 packed into an integer: bit (j-1) holds the
/// outcome of the j-th measurement.
struct History {
  std::uint32_t bits = 0;
  int length = 0;

  int outcome(int step) const { return static_cast<int>((bits >> (step - 1)) & 1u); }
  History then(int outcome) const {
    return {bits | (static_cast<std::uint32_t>(outcome & 1) << length), length + 1};
  }
  bool operator==(const History&) const = default;

  /// Little-endian string: the first measurement is the rightmost character.
  std::string str() const {
    std::string s(static_cast<std::size_t>(length), '0');
    for (int k = 1; k <= length; ++k) s[static_cast<std::size_t>(length - k)] = outcome(k) ? '1' : '0';
    return s;
  }
  static History parse(const std::string& s) {
    if (s.size() > 31) throw std::invalid_argument("history too long: " + s);
    History h;
    h.length = static_cast<int>(s.size());
    for (int k = 1; k <= h.length; ++k) {
      const char c = s[static_cast<std::size_t>(h.length - k)];
      if (c != '0' && c != '1') throw std::invalid_argument("history must be a bit string: '" + s + "'");
      if (c == '1') h.bits |= 1u << (k - 1);
    }
    return h;
  }
};

/// Full binary tree of von Neumann measurements. Each node, addressed by the
/// outcome history that leads to it, stores only its outcome-0 direction
/// m0; outcome 1 is the projector onto -m0, so the antipodal constraint on
/// sibling outcome vectors holds by construction.
class AdaptiveTree {
 public:
  static constexpr int kMaxDepth = 24;

  explicit AdaptiveTree(int depth, const BlochVector& fill = kAxisZ) : depth_(depth) {
    if (depth < 1 || depth > kMaxDepth)
      throw InvalidPlan("adaptive tree depth must lie in [1, " + std::to_string(kMaxDepth) + "]");
    nodes_.assign((std::size_t{1} << depth) - 1, fill);
  }

  int depth() const { return depth_; }
  std::size_t node_count() const { return nodes_.size(); }

  static std::size_t node_index(const History& h) { return ((std::size_t{1} << h.length) - 1) + h.bits; }
  static History node_history(std::size_t index) {
    int len = 0;
    while (((std::size_t{2} << len) - 1) <= index) ++len;
    return {static_cast<std::uint32_t>(index - ((std::size_t{1} << len) - 1)), len};
  }

  const BlochVector& direction(const History& h) const {
    if (h.length < 0 || h.length >= depth_) throw std::out_of_range("history length must be below the tree depth");
    return nodes_[node_index(h)];
  }
  void set_direction(const History& h, const BlochVector& m) {
    if (h.length < 0 || h.length >= depth_) throw std::out_of_range("history length must be below the tree depth");
    nodes_[node_index(h)] = m;
  }

  const BlochVector& node(std::size_t index) const { return nodes_[index]; }
  void set_node(std::size_t index, const BlochVector& m) { nodes_[index] = m; }
  const std::vector<BlochVector>& nodes() const { return nodes_; }

  /// Direction of the k-th outcome vector m(x_k) = (-1)^{i_k} m0(x_{k-1}).
  BlochVector outcome_vector(const History& full, int k) const {
    const History prefix{full.bits & ((1u << (k - 1)) - 1u), k - 1};
    const BlochVector& m0 = direction(prefix);
    return full.outcome(k) ? -m0 : m0;
  }

  /// True when every level measures one projector pair regardless of
  /// history (m0 and -m0 differ only by outcome labels).
  bool history_independent(double tol = 1e-12) const {
    for (int k = 0; k < depth_; ++k) {
      const Vec3& first = nodes_[(std::size_t{1} << k) - 1].components();
      for (std::size_t i = (std::size_t{1} << k) - 1; i < (std::size_t{2} << k) - 1; ++i) {
        const Vec3& c = nodes_[i].components();
        if (std::min(norm(c - first), norm(c + first)) > tol) return false;
      }
    }
    return true;
  }

 private:
  int depth_;
  std::vector<BlochVector> nodes_;
};

/// m0(x_{k-1}) for the next measurement after `history`.
inline const BlochVector& tree_direction(const AdaptiveTree& tree, const History& history) {
  if (history.length >= tree.depth())
    throw std::out_of_range("tree_direction: history length " + std::to_string(history.length) +
                            " is not below depth " + std::to_string(tree.depth()));
  return tree.direction(history);
}

/// Per-axis plus-outcome counts of a fixed-axes run.
struct FrequencyRecord {
  std::vector<int> plus_counts;
  std::vector<int> repetitions;

  FrequencyRecord(std::vector<int> plus, std::vector<int> reps)
      : plus_counts(std::move(plus)), repetitions(std::move(reps)) {
    if (plus_counts.size() != repetitions.size()) throw std::invalid_argument("FrequencyRecord: size mismatch");
    for (std::size_t i = 0; i < plus_counts.size(); ++i)
      if (repetitions[i] < 1 || plus_counts[i] < 0 || plus_counts[i] > repetitions[i])
        throw std::invalid_argument("FrequencyRecord: counts must lie in [0, repetitions]");
  }

  std::size_t axes() const { return plus_counts.size(); }
  double alpha(std::size_t i) const { return static_cast<double>(plus_counts[i]) / repetitions[i]; }
};

/// Measurements along 2 (equatorial prior) or 3 (sphere prior) mutually
/// orthogonal axes. Copies are laid out in blocks, axis by axis.
class FixedAxesPlan {
 public:
  FixedAxesPlan(std::vector<BlochVector> axes, std::vector<int> repetitions)
      : axes_(std::move(axes)), reps_(std::move(repetitions)) {
    if (axes_.size() != 2 && axes_.size() != 3) throw InvalidPlan("fixed-axes plan needs 2 or 3 axes");
    if (reps_.size() != axes_.size()) throw InvalidPlan("one repetition count per axis is required");
    for (int r : reps_)
      if (r < 1) throw InvalidPlan("every axis needs at least one repetition");
    for (std::size_t i = 0; i < axes_.size(); ++i)
      for (std::size_t j = i + 1; j < axes_.size(); ++j)
        if (std::abs(axes_[i].dot(axes_[j])) > kUnitTolerance) throw InvalidPlan("plan axes are not orthogonal");
  }

  /// Canonical x, y(, z) axes with `per_axis` copies each.
  static FixedAxesPlan standard(Prior prior, int per_axis) {
    std::vector<BlochVector> axes{kAxisX, kAxisY};
    if (prior == Prior::Sphere3D) axes.push_back(kAxisZ);
    return FixedAxesPlan(std::move(axes), std::vector<int>(static_cast<std::size_t>(dimension(prior)), per_axis));
  }

  /// Equal split of `copies` over the canonical axes; copies that do not
  /// divide evenly are rejected.
  static FixedAxesPlan for_copies(Prior prior, int copies) {
    const int d = dimension(prior);
    if (copies < d || copies % d != 0)
      throw InvalidPlan(std::to_string(copies) + " copies cannot be split evenly over " + std::to_string(d) +
                        " axes");
    return standard(prior, copies / d);
  }

  /// Split as evenly as possible, earlier axes taking the remainder. Only
  /// used for the first stage of the two-stage scheme.
  static FixedAxesPlan spread(Prior prior, int copies) {
    const int d = dimension(prior);
    if (copies < d) throw InvalidPlan("fewer copies than axes");
    std::vector<int> reps(static_cast<std::size_t>(d), copies / d);
    for (int i = 0; i < copies % d; ++i) ++reps[static_cast<std::size_t>(i)];
    std::vector<BlochVector> axes{kAxisX, kAxisY};
    if (d == 3) axes.push_back(kAxisZ);
    return FixedAxesPlan(std::move(axes), std::move(reps));
  }

  const std::vector<BlochVector>& axes() const { return axes_; }
  const std::vector<int>& repetitions() const { return reps_; }
  int copies() const { return std::accumulate(reps_.begin(), reps_.end(), 0); }
  bool balanced() const {
    for (int r : reps_)
      if (r != reps_.front()) return false;
    return true;
  }
  bool fits(Prior prior) const {
    if (static_cast<int>(axes_.size()) != dimension(prior)) return false;
    for (const auto& a : axes_)
      if (!fits_prior(a, prior)) return false;
    return true;
  }

  /// Axis index measured by copy k (1-based).
  std::size_t axis_of_copy(int k) const {
    int seen = 0;
    for (std::size_t i = 0; i < reps_.size(); ++i) {
      seen += reps_[i];
      if (k <= seen) return i;
    }
    throw std::out_of_range("copy index beyond plan");
  }

  /// The same plan as a history-independent tree.
  AdaptiveTree to_tree() const {
    AdaptiveTree tree(copies());
    for (int k = 1; k <= copies(); ++k) {
      const BlochVector& axis = axes_[axis_of_copy(k)];
      for (std::uint32_t b = 0; b < (1u << (k - 1)); ++b) tree.set_direction({b, k - 1}, axis);
    }
    return tree;
  }

  /// Plus-outcome counts of a full bit-string outcome of to_tree().
  FrequencyRecord frequencies(const History& outcome) const {
    std::vector<int> plus(reps_.size(), 0);
    for (int k = 1; k <= outcome.length; ++k)
      if (outcome.outcome(k) == 0) ++plus[axis_of_copy(k)];
    return FrequencyRecord(std::move(plus), reps_);
  }

 private:
  std::vector<BlochVector> axes_;
  std::vector<int> reps_;
};

enum class GuessRule { Optimal, Tomographic };

inline std::string_view to_string(GuessRule g) { return g == GuessRule::Optimal ? "optimal" : "tomographic"; }
inline GuessRule parse_guess_rule(std::string_view s) {
  if (s == "optimal" || s == "og") return GuessRule::Optimal;
  if (s == "tomographic" || s == "t") return GuessRule::Tomographic;
  throw std::invalid_argument("unknown guess rule '" + std::string(s) + "'");
}

struct Guess {
  BlochVector direction;
  bool tie_break = false;  // the data carried no direction; `direction` is the fallback
};

/// Tomographic estimate: components proportional to 2 alpha_i - 1 along each
/// plan axis. When every alpha_i is 1/2 the first plan axis is returned and
/// flagged.
inline Guess tomographic_guess(const FrequencyRecord& freqs, const std::vector<BlochVector>& axes) {
  if (freqs.axes() != axes.size()) throw std::invalid_argument("tomographic_guess: axis count mismatch");
  Vec3 v{0.0, 0.0, 0.0};
  double sq = 0.0;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    // 2 alpha - 1 computed from integers so that alpha = 1/2 cancels exactly
    const double r = static_cast<double>(2 * freqs.plus_counts[i] - freqs.repetitions[i]) / freqs.repetitions[i];
    v = v + scaled(axes[i].components(), r);
    sq += r * r;
  }
  if (sq == 0.0) return {axes.front(), true};
  return {BlochVector(v), false};
}

inline Guess tomographic_guess(const FrequencyRecord& freqs) {
  std::vector<BlochVector> axes{kAxisX, kAxisY, kAxisZ};
  axes.resize(freqs.axes());
  return tomographic_guess(freqs, axes);
}

inline constexpr double kZeroPosterior = 1e-12;

/// V/|V|, or `tiebreak` when |V| vanishes (every guess then scores alike).
inline BlochVector optimal_guess(const PosteriorVector& v, const BlochVector& tiebreak = kAxisZ) {
  if (!(v.magnitude > kZeroPosterior)) return tiebreak;
  return BlochVector(v.components);
}

/// Rotate M0 towards the direction (cos tau, sin tau) of the in-plane
/// frequency imbalance by omega = lambda * |imbalance|.
inline BlochVector two_stage_guess(const BlochVector& m0, const BlochVector& u, const BlochVector& v,
                                   double alpha_u, double alpha_v, double lambda) {
  constexpr double tol = 1e-9;
  if (std::abs(m0.dot(u)) > tol || std::abs(m0.dot(v)) > tol || std::abs(u.dot(v)) > tol)
    throw std::invalid_argument("two_stage_guess: {M0, u, v} is not orthonormal");
  if (norm(cross(m0.components(), u.components()) - v.components()) > tol)
    throw std::invalid_argument("two_stage_guess: {M0, u, v} is not right-handed");
  const double ru = 2.0 * alpha_u - 1.0;
  const double rv = 2.0 * alpha_v - 1.0;
  const double omega = lambda * std::hypot(ru, rv);
  const double tau = (ru == 0.0 && rv == 0.0) ? 0.0 : std::atan2(rv, ru);
  const double s = std::sin(omega);
  const Vec3 dir = scaled(m0.components(), std::cos(omega)) +
                   scaled(scaled(u.components(), std::cos(tau)) + scaled(v.components(), std::sin(tau)), s);
  return BlochVector(dir);
}

/// Orthonormal completion {u, v} of m0 with u x v = m0. Starts from the
/// coordinate axis least aligned with m0, so it is stable under small moves
/// of m0 away from the axis-switch boundaries.
inline std::pair<BlochVector, BlochVector> orthonormal_completion(const BlochVector& m0) {
  const Vec3& m = m0.components();
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(m[i]) < std::abs(m[best])) best = i;
  Vec3 e{0.0, 0.0, 0.0};
  e[best] = 1.0;
  const BlochVector u(e - scaled(m, dot(e, m)));
  const BlochVector v(cross(m, u.components()));
  return {u, v};
}

/// N copies split into a first stage of N0 = round(N^beta) fixed-axes
/// measurements (optimal guess) and N - N0 measurements in the plane
/// orthogonal to the first-stage guess.
struct TwoStagePlan {
  int copies;
  int first_stage;
  double beta;
  double lambda;

  static TwoStagePlan make(int copies, double beta, double lambda) {
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidPlan("beta must lie in (0, 1)");
    const int n0 = static_cast<int>(std::lround(std::pow(static_cast<double>(copies), beta)));
    TwoStagePlan plan{copies, n0, beta, lambda};
    plan.validate();
    return plan;
  }

  int second_stage() const { return copies - first_stage; }
  int per_plane_axis() const { return second_stage() / 2; }

  void validate() const {
    if (first_stage < 3) throw InvalidPlan("first stage needs at least 3 copies (one per axis)");
    if (!(first_stage < copies)) throw InvalidPlan("first stage must use fewer copies than the total");
    if (second_stage() % 2 != 0)
      throw InvalidPlan("second stage needs an even number of copies (N - N0 = " + std::to_string(second_stage()) +
                        ")");
    if (!(lambda >= 0.0 && lambda <= 1.5)) throw InvalidPlan("lambda must lie in [0, 1.5]");
  }
};

}  // namespace qest

// monte_carlo.hpp
// Sampled estimation runs: draw a state from the prior, simulate every
// measurement outcome, apply the strategy's guess and score it.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qubit_est/bloch.hpp"
#include "qubit_est/detail/parallel.hpp"
#include "qubit_est/exact_eval.hpp"
#include "qubit_est/strategy.hpp"

namespace qest {

/// One runnable strategy: given the true state, produce a guess using the
/// supplied random stream for every outcome draw.
class SimStrategy {
 public:
  using Trial = std::function<BlochVector(const BlochVector& state, Rng& rng)>;

  SimStrategy(std::string scheme, std::string descriptor, int copies, Prior prior, Trial trial,
              std::optional<double> exact = std::nullopt)
      : scheme_(std::move(scheme)),
        descriptor_(std::move(descriptor)),
        copies_(copies),
        prior_(prior),
        trial_(std::move(trial)),
        exact_(exact) {}

  const std::string& scheme() const { return scheme_; }
  const std::string& descriptor() const { return descriptor_; }
  int copies() const { return copies_; }
  Prior prior() const { return prior_; }
  std::optional<double> exact_fidelity() const { return exact_; }
  BlochVector run(const BlochVector& state, Rng& rng) const { return trial_(state, rng); }

  /// FNV-1a of the descriptor, printed as 16 hex digits.
  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : descriptor_) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
  }

 private:
  std::string scheme_;
  std::string descriptor_;
  int copies_;
  Prior prior_;
  Trial trial_;
  std::optional<double> exact_;
};

namespace detail {

inline int count_plus(const BlochVector& state, const BlochVector& axis, int reps, Rng& rng) {
  const double p = outcome_probability(state, axis, 0);
  int plus = 0;
  for (int i = 0; i < reps; ++i) plus += rng.bernoulli(p) ? 1 : 0;
  return plus;
}

inline std::string vec_str(const Vec3& v) {
  std::ostringstream os;
  os << std::setprecision(17) << '[' << v[0] << ',' << v[1] << ',' << v[2] << ']';
  return os.str();
}

}  // namespace detail

/// Adaptive tree followed outcome by outcome, with the optimal guess of
/// each leaf precomputed exactly.
inline SimStrategy tree_strategy(const AdaptiveTree& tree, Prior prior, const EvalOptions& opts = {}) {
  const FidelityReport report = eval_adaptive_tree(tree, prior, opts);
  std::vector<BlochVector> guesses(std::size_t{1} << tree.depth());
  for (const auto& o : report.outcomes) guesses[History::parse(o.id).bits] = o.guess;
  std::string desc = "tree:" + std::string(to_string(prior)) + ":" + std::to_string(tree.depth());
  for (const auto& n : tree.nodes()) desc += detail::vec_str(n.components());
  return SimStrategy(
      "tree", desc, tree.depth(), prior,
      [tree, guesses = std::move(guesses)](const BlochVector& state, Rng& rng) {
        History h;
        while (h.length < tree.depth()) {
          const double p0 = outcome_probability(state, tree.direction(h), 0);
          h = h.then(rng.bernoulli(p0) ? 0 : 1);
        }
        return guesses[h.bits];
      },
      report.fidelity);
}

/// Fixed-axes plan with the tomographic guess or the exact optimal guess of
/// every frequency tuple.
inline SimStrategy fixed_axes_strategy(const FixedAxesPlan& plan, GuessRule rule, Prior prior,
                                       const EvalOptions& opts = {}) {
  EvalOptions quiet = opts;
  quiet.keep_outcomes = true;
  const FidelityReport report = eval_fixed_axes(plan, rule, prior, quiet);
  std::vector<BlochVector> guesses;
  guesses.reserve(report.outcomes.size());
  for (const auto& o : report.outcomes) guesses.push_back(o.guess);
  std::string desc = "fixed:" + std::string(to_string(prior)) + ":" + std::string(to_string(rule));
  for (std::size_t i = 0; i < plan.axes().size(); ++i)
    desc += detail::vec_str(plan.axes()[i].components()) + "x" + std::to_string(plan.repetitions()[i]);
  const std::string scheme = std::string(to_string(prior)) + (rule == GuessRule::Optimal ? "-og" : "-t");
  return SimStrategy(
      scheme, desc, plan.copies(), prior,
      [plan, guesses = std::move(guesses)](const BlochVector& state, Rng& rng) {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < plan.axes().size(); ++i) {
          const int reps = plan.repetitions()[i];
          idx = idx * static_cast<std::size_t>(reps + 1) +
                static_cast<std::size_t>(detail::count_plus(state, plan.axes()[i], reps, rng));
        }
        return guesses[idx];
      },
      report.fidelity);
}

/// Ignores the data and always answers `guess`; scores 1/2 on average.
inline SimStrategy constant_guess_strategy(const BlochVector& guess, int copies, Prior prior) {
  return SimStrategy("constant", "constant:" + detail::vec_str(guess.components()), copies, prior,
                     [guess](const BlochVector&, Rng&) { return guess; }, 0.5);
}

/// Stage one: fixed-axes optimal guess M0 from N0 copies (copies spread as
/// evenly as possible over x, y, z). Stage two: (N - N0)/2 copies along each
/// of u, v orthogonal to M0, then the rotated guess of two_stage_guess.
inline SimStrategy two_stage_strategy(const TwoStagePlan& plan) {
  plan.validate();
  const FixedAxesPlan first = FixedAxesPlan::spread(Prior::Sphere3D, plan.first_stage);
  EvalOptions opts;
  const FidelityReport report = eval_fixed_axes(first, GuessRule::Optimal, Prior::Sphere3D, opts);
  struct Stage1 {
    BlochVector m0, u, v;
  };
  std::vector<Stage1> table;
  table.reserve(report.outcomes.size());
  for (const auto& o : report.outcomes) {
    const auto [u, v] = orthonormal_completion(o.guess);
    table.push_back({o.guess, u, v});
  }
  std::ostringstream desc;
  desc << std::setprecision(17) << "two-stage:N=" << plan.copies << ":N0=" << plan.first_stage
       << ":beta=" << plan.beta << ":lambda=" << plan.lambda;
  return SimStrategy("two-stage", desc.str(), plan.copies, Prior::Sphere3D,
                     [plan, first, table = std::move(table)](const BlochVector& state, Rng& rng) {
                       std::size_t idx = 0;
                       for (std::size_t i = 0; i < 3; ++i) {
                         const int reps = first.repetitions()[i];
                         idx = idx * static_cast<std::size_t>(reps + 1) +
                               static_cast<std::size_t>(detail::count_plus(state, first.axes()[i], reps, rng));
                       }
                       const Stage1& s = table[idx];
                       const int per = plan.per_plane_axis();
                       const double au = static_cast<double>(detail::count_plus(state, s.u, per, rng)) / per;
                       const double av = static_cast<double>(detail::count_plus(state, s.v, per, rng)) / per;
                       return two_stage_guess(s.m0, s.u, s.v, au, av, plan.lambda);
                     });
}

/// Exact fidelity of the first stage alone, i.e. of the two-stage scheme at
/// lambda = 0.
inline double two_stage_first_stage_fidelity(const TwoStagePlan& plan) {
  EvalOptions opts;
  opts.keep_outcomes = false;
  return eval_fixed_axes(FixedAxesPlan::spread(Prior::Sphere3D, plan.first_stage), GuessRule::Optimal,
                         Prior::Sphere3D, opts)
      .fidelity;
}

/// Minimizer in lambda of (1-l)^2 (1-F0) + l^2 (1 - 4(1-F0))/(N - N0).
inline double analytic_optimal_lambda(double first_stage_fidelity, int copies, int first_stage) {
  const double a = 1.0 - first_stage_fidelity;
  const double b = (1.0 - 4.0 * a) / (copies - first_stage);
  return a / (a + b);
}

// -- simulation ---------------------------------------------------------------

struct SimulationResult {
  long trials = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  std::uint64_t seed = 0;
  int copies = 0;
  std::string scheme;
  std::string descriptor;
  std::string strategy_hash;

  double scaled_infidelity() const { return copies * (1.0 - mean); }
};

inline constexpr long kTrialsPerStream = 1 << 14;

/// Mean fidelity over `trials` independent runs. Trials are cut into fixed
/// streams of kTrialsPerStream, each with its own derived generator, and
/// the per-stream moments are merged in stream order, so the result is
/// bitwise reproducible for a given seed at any thread count.
inline SimulationResult simulate(const SimStrategy& strategy, long trials, std::uint64_t seed, int threads = 1) {
  if (trials < 1) throw std::invalid_argument("simulate: trials must be >= 1");
  const long streams = (trials + kTrialsPerStream - 1) / kTrialsPerStream;
  struct Moments {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::vector<Moments> parts(static_cast<std::size_t>(streams));
  const Rng root(seed);
  detail::parallel_for(parts.size(), threads, [&](std::size_t s) {
    Rng rng = root.split(s);
    const long begin = static_cast<long>(s) * kTrialsPerStream;
    const long count = std::min(kTrialsPerStream, trials - begin);
    Moments m;
    for (long t = 0; t < count; ++t) {
      const BlochVector state = sample_prior(strategy.prior(), rng);
      const double f = fidelity_overlap(state, strategy.run(state, rng));
      ++m.n;
      const double d = f - m.mean;
      m.mean += d / static_cast<double>(m.n);
      m.m2 += d * (f - m.mean);
    }
    parts[s] = m;
  });
  Moments total;
  for (const auto& p : parts) {
    if (p.n == 0) continue;
    const long n = total.n + p.n;
    const double d = p.mean - total.mean;
    total.mean += d * static_cast<double>(p.n) / static_cast<double>(n);
    total.m2 += p.m2 + d * d * static_cast<double>(total.n) * static_cast<double>(p.n) / static_cast<double>(n);
    total.n = n;
  }
  SimulationResult res;
  res.trials = trials;
  res.mean = total.mean;
  const double var = trials > 1 ? total.m2 / static_cast<double>(trials - 1) : 0.0;
  res.standard_error = std::sqrt(var / static_cast<double>(trials));
  res.seed = seed;
  res.copies = strategy.copies();
  res.scheme = strategy.scheme();
  res.descriptor = strategy.descriptor();
  res.strategy_hash = strategy.hash();
  return res;
}

inline SimulationResult simulate_two_stage(const TwoStagePlan& plan, long trials, std::uint64_t seed, int threads = 1) {
  return simulate(two_stage_strategy(plan), trials, seed, threads);
}

struct ExactComparison {
  SimulationResult simulated;
  double exact = 0.0;
  double z = 0.0;
  bool consistent = false;  // |z| <= threshold
};

inline ExactComparison compare_against(const SimStrategy& strategy, double exact, long trials, std::uint64_t seed,
                                       int threads = 1, double threshold = 4.0) {
  ExactComparison c;
  c.simulated = simulate(strategy, trials, seed, threads);
  c.exact = exact;
  c.z = c.simulated.standard_error > 0.0 ? (c.simulated.mean - exact) / c.simulated.standard_error
                                         : (c.simulated.mean == exact ? 0.0 : INFINITY);
  c.consistent = std::abs(c.z) <= threshold;
  return c;
}

inline ExactComparison compare_exact(const SimStrategy& strategy, long trials, std::uint64_t seed, int threads = 1) {
  if (!strategy.exact_fidelity()) throw std::invalid_argument("compare_exact: strategy has no exact fidelity");
  return compare_against(strategy, *strategy.exact_fidelity(), trials, seed, threads);
}

// -- ledger -------------------------------------------------------------------

inline constexpr const char* kLedgerHeader = "strategy_hash,scheme,N,trials,seed,mean,stderr";

/// Appends one row per run; writes the header when the file is new.
inline void append_ledger(const std::filesystem::path& path, const SimulationResult& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open ledger " + path.string());
  if (fresh) out << kLedgerHeader << '\n';
  out << r.strategy_hash << ',' << r.scheme << ',' << r.copies << ',' << r.trials << ',' << r.seed << ','
      << std::setprecision(17) << r.mean << ',' << r.standard_error << '\n';
}

}  // namespace qest

// io.hpp
// JSON strategy files (the interchange format between optimize, eval and
// simulate) and report writers.

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "qubit_est/exact_eval.hpp"
#include "qubit_est/monte_carlo.hpp"
#include "qubit_est/optimizer.hpp"
#include "qubit_est/strategy.hpp"

namespace qest {

using json = nlohmann::ordered_json;

struct StrategyFormatError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TreeSpec {
  AdaptiveTree tree;
  std::optional<Prior> prior;
};

struct FixedAxesSpec {
  FixedAxesPlan plan;
  GuessRule guess = GuessRule::Optimal;
  std::optional<Prior> prior;
};

struct ConstantSpec {
  BlochVector guess;
  int copies = 1;
  std::optional<Prior> prior;
};

using StrategySpec = std::variant<TreeSpec, FixedAxesSpec, TwoStagePlan, ConstantSpec>;

inline int spec_copies(const StrategySpec& s) {
  return std::visit(
      [](const auto& v) -> int {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TreeSpec>) return v.tree.depth();
        else if constexpr (std::is_same_v<T, FixedAxesSpec>) return v.plan.copies();
        else if constexpr (std::is_same_v<T, TwoStagePlan>) return v.copies;
        else return v.copies;
      },
      s);
}

inline std::optional<Prior> spec_prior(const StrategySpec& s) {
  return std::visit(
      [](const auto& v) -> std::optional<Prior> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TwoStagePlan>) return Prior::Sphere3D;
        else return v.prior;
      },
      s);
}

// -- writing ------------------------------------------------------------------

inline json vec_json(const BlochVector& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json tree_json(const AdaptiveTree& tree, std::optional<Prior> prior = std::nullopt) {
  json j{{"kind", "adaptive_tree"}, {"depth", tree.depth()}};
  if (prior) j["prior"] = std::string(to_string(*prior));
  json nodes = json::array();
  for (std::size_t i = 0; i < tree.node_count(); ++i) {
    const History h = AdaptiveTree::node_history(i);
    nodes.push_back({{"prefix", h.str()}, {"dir", vec_json(tree.node(i))}});
  }
  j["nodes"] = std::move(nodes);
  return j;
}

inline json to_json(const StrategySpec& spec) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TreeSpec>) {
          return tree_json(v.tree, v.prior);
        } else if constexpr (std::is_same_v<T, FixedAxesSpec>) {
          json j{{"kind", "fixed_axes"}, {"depth", v.plan.copies()}, {"guess", std::string(to_string(v.guess))}};
          if (v.prior) j["prior"] = std::string(to_string(*v.prior));
          json axes = json::array();
          for (const auto& a : v.plan.axes()) axes.push_back(vec_json(a));
          j["axes"] = std::move(axes);
          j["repetitions"] = v.plan.repetitions();
          return j;
        } else if constexpr (std::is_same_v<T, TwoStagePlan>) {
          return json{{"kind", "two_stage"}, {"depth", v.copies}, {"first_stage", v.first_stage},
                      {"beta", v.beta},      {"lambda", v.lambda}, {"prior", "3d"}};
        } else {
          json j{{"kind", "constant_guess"}, {"depth", v.copies}, {"guess_dir", vec_json(v.guess)}};
          if (v.prior) j["prior"] = std::string(to_string(*v.prior));
          return j;
        }
      },
      spec);
}

// -- reading ------------------------------------------------------------------

namespace detail {

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw StrategyFormatError(std::string("strategy: missing field '") + key + "'");
  return j.at(key);
}

inline int require_int(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number_integer()) throw StrategyFormatError(std::string("strategy: '") + key + "' must be an integer");
  return v.get<int>();
}

inline BlochVector parse_vec(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3)
    throw StrategyFormatError("strategy: " + where + " must be an array of 3 numbers");
  Vec3 c{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw StrategyFormatError("strategy: " + where + " must be an array of 3 numbers");
    c[i] = v[i].get<double>();
  }
  try {
    return BlochVector(c);
  } catch (const ZeroVectorError&) {
    throw StrategyFormatError("strategy: " + where + " is the zero vector");
  }
}

inline std::optional<Prior> parse_optional_prior(const json& j) {
  if (!j.contains("prior")) return std::nullopt;
  if (!j["prior"].is_string()) throw StrategyFormatError("strategy: 'prior' must be \"2d\" or \"3d\"");
  return parse_prior(j["prior"].get<std::string>());
}

}  // namespace detail

/// Parses a strategy document. Tree nodes must cover every prefix shorter
/// than the depth exactly once.
inline StrategySpec strategy_from_json(const json& j) {
  using detail::require;
  const json& kind_j = require(j, "kind");
  if (!kind_j.is_string()) throw StrategyFormatError("strategy: 'kind' must be a string");
  const std::string kind = kind_j.get<std::string>();
  const int depth = detail::require_int(j, "depth");
  if (depth < 1) throw StrategyFormatError("strategy: depth must be >= 1");
  const auto prior = detail::parse_optional_prior(j);

  if (kind == "adaptive_tree") {
    if (depth > AdaptiveTree::kMaxDepth)
      throw CapExceeded("strategy: tree depth " + std::to_string(depth) + " exceeds " +
                        std::to_string(AdaptiveTree::kMaxDepth));
    const json& nodes = require(j, "nodes");
    if (!nodes.is_array()) throw StrategyFormatError("strategy: 'nodes' must be an array");
    AdaptiveTree tree(depth);
    std::vector<bool> seen(tree.node_count(), false);
    for (const json& n : nodes) {
      const json& prefix = require(n, "prefix");
      if (!prefix.is_string()) throw StrategyFormatError("strategy: node prefix must be a string");
      History h;
      try {
        h = History::parse(prefix.get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw StrategyFormatError(std::string("strategy: ") + e.what());
      }
      if (h.length >= depth) throw StrategyFormatError("strategy: prefix '" + h.str() + "' is too long for the depth");
      const std::size_t idx = AdaptiveTree::node_index(h);
      if (seen[idx]) throw StrategyFormatError("strategy: duplicate prefix '" + h.str() + "'");
      seen[idx] = true;
      tree.set_direction(h, detail::parse_vec(require(n, "dir"), "dir of prefix '" + h.str() + "'"));
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i])
        throw StrategyFormatError("strategy: missing node for prefix '" + AdaptiveTree::node_history(i).str() + "'");
    return TreeSpec{std::move(tree), prior};
  }
  if (kind == "fixed_axes") {
    const json& axes_j = require(j, "axes");
    const json& reps_j = require(j, "repetitions");
    if (!axes_j.is_array() || !reps_j.is_array()) throw StrategyFormatError("strategy: axes/repetitions must be arrays");
    std::vector<BlochVector> axes;
    for (std::size_t i = 0; i < axes_j.size(); ++i) axes.push_back(detail::parse_vec(axes_j[i], "axis"));
    std::vector<int> reps;
    for (const json& r : reps_j) {
      if (!r.is_number_integer()) throw StrategyFormatError("strategy: repetitions must be integers");
      reps.push_back(r.get<int>());
    }
    FixedAxesPlan plan(std::move(axes), std::move(reps));
    if (plan.copies() != depth) throw StrategyFormatError("strategy: repetitions do not add up to the depth");
    GuessRule guess = GuessRule::Optimal;
    if (j.contains("guess")) guess = parse_guess_rule(j["guess"].get<std::string>());
    return FixedAxesSpec{std::move(plan), guess, prior};
  }
  if (kind == "two_stage") {
    const json& beta = require(j, "beta");
    const json& lambda = require(j, "lambda");
    if (!beta.is_number() || !lambda.is_number()) throw StrategyFormatError("strategy: beta/lambda must be numbers");
    TwoStagePlan plan = TwoStagePlan::make(depth, beta.get<double>(), lambda.get<double>());
    if (j.contains("first_stage") && detail::require_int(j, "first_stage") != plan.first_stage)
      throw StrategyFormatError("strategy: first_stage disagrees with round(N^beta)");
    return plan;
  }
  if (kind == "constant_guess") {
    return ConstantSpec{detail::parse_vec(require(j, "guess_dir"), "guess_dir"), depth, prior};
  }
  throw StrategyFormatError("strategy: unknown kind '" + kind + "'");
}

inline StrategySpec parse_strategy(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw StrategyFormatError(std::string("malformed JSON: ") + e.what());
  }
  return strategy_from_json(j);
}

inline StrategySpec load_strategy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open strategy file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_strategy(ss.str());
}

inline void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setw(2) << j << '\n';
}

// -- reports ------------------------------------------------------------------

inline json to_json(const FidelityReport& r, bool with_outcomes = true) {
  json j{{"N", r.copies},
         {"prior", std::string(to_string(r.prior))},
         {"rule", r.rule},
         {"strategy", r.strategy},
         {"fidelity", r.fidelity},
         {"scaled_infidelity", r.scaled_infidelity()},
         {"total_probability", r.total_probability},
         {"sum_v_magnitude", r.sum_v_magnitude}};
  if (with_outcomes) {
    json rows = json::array();
    for (const auto& o : r.outcomes)
      rows.push_back({{"id", o.id}, {"probability", o.probability}, {"v", o.v_magnitude}, {"guess", vec_json(o.guess)}});
    j["outcomes"] = std::move(rows);
  }
  return j;
}

inline void write_report_csv(std::ostream& out, const FidelityReport& r) {
  out << std::setprecision(17) << "outcome,probability,v_magnitude,guess_x,guess_y,guess_z\n";
  for (const auto& o : r.outcomes)
    out << o.id << ',' << o.probability << ',' << o.v_magnitude << ',' << o.guess.x() << ',' << o.guess.y() << ','
        << o.guess.z() << '\n';
}

/// Sidecar written next to an optimized tree.
inline json optimization_metadata(const OptimizationResult& r, const OptimizationConfig& cfg, Prior prior) {
  json restarts = json::array();
  for (const auto& s : r.restarts)
    restarts.push_back({{"restart", s.restart},
                        {"start", s.heuristic_start ? "orthogonal" : "random"},
                        {"fidelity", s.fidelity},
                        {"evaluations", s.evaluations},
                        {"converged", s.converged}});
  return json{{"N", r.tree.depth()},
              {"prior", std::string(to_string(prior))},
              {"seed", r.seed},
              {"restarts", cfg.restarts},
              {"gauge_fixing", cfg.gauge_fixing},
              {"tolerance", cfg.tolerance},
              {"fidelity", r.report.fidelity},
              {"converged", r.converged},
              {"best_restart", r.best_restart},
              {"evaluations", r.evaluations},
              {"iterations", r.history.size()},
              {"f_history", r.history},
              {"restart_summary", std::move(restarts)}};
}

inline json to_json(const SimulationResult& r) {
  return json{{"scheme", r.scheme},         {"N", r.copies},
              {"trials", r.trials},         {"seed", r.seed},
              {"mean", r.mean},             {"stderr", r.standard_error},
              {"scaled_infidelity", r.scaled_infidelity()}, {"strategy_hash", r.strategy_hash}};
}

}  // namespace qest

// qest: command-line front end for the qubit estimation library.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qubit_est/asympt_fit.hpp"
#include "qubit_est/io.hpp"

namespace {

using namespace qest;

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kCap = 3, kNoConvergence = 4 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Common {
  int threads = 0;
  std::string format = "csv";
  std::string output;
};

std::vector<int> parse_range(const std::string& text) {
  std::vector<int> out;
  auto to_int = [&](std::string_view s) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw UsageError("bad N range '" + text + "'");
    return v;
  };
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_int(part));
      continue;
    }
    std::string hi = part.substr(dots + 2);
    int step = 1;
    if (const auto colon = hi.find(':'); colon != std::string::npos) {
      step = to_int(std::string_view(hi).substr(colon + 1));
      hi = hi.substr(0, colon);
    }
    const int a = to_int(std::string_view(part).substr(0, dots)), b = to_int(hi);
    if (step < 1 || b < a) throw UsageError("bad N range '" + text + "'");
    for (int n = a; n <= b; n += step) out.push_back(n);
  }
  if (out.empty()) throw UsageError("empty N range");
  for (int n : out)
    if (n < 1) throw UsageError("N must be >= 1 in range '" + text + "'");
  return out;
}

long parse_trials(const std::string& text) {
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw UsageError("");
  } catch (const std::exception&) {
    throw UsageError("bad trial count '" + text + "'");
  }
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e15) throw UsageError("bad trial count '" + text + "'");
  return static_cast<long>(v);
}

std::uint64_t resolve_seed(const std::string& text) {
  if (!text.empty()) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) throw UsageError("bad seed '" + text + "'");
    return v;
  }
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::cerr << "auto seed: " << seed << '\n';
  return seed;
}

// Writes to --output when given, stdout otherwise.
template <class F>
void emit(const Common& c, F&& body) {
  if (c.output.empty()) {
    std::cout << std::setprecision(12);
    body(std::cout);
    return;
  }
  std::ofstream out(c.output);
  if (!out) throw std::runtime_error("cannot write " + c.output);
  out << std::setprecision(12);
  body(out);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--threads", c.threads, "worker threads (default: machine parallelism)")->check(CLI::NonNegativeNumber);
  app->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("-o,--output", c.output, "output path (default stdout)");
}

// -- bounds -------------------------------------------------------------------

int cmd_bounds(const Common& c, const std::string& prior_s, const std::string& range) {
  const Prior prior = parse_prior(prior_s);
  const auto ns = parse_range(range);
  emit(c, [&](std::ostream& out) {
    if (c.format == "json") {
      json rows = json::array();
      for (int n : ns) {
        const double f = cm_bound(prior, n);
        rows.push_back({{"N", n}, {"fidelity", f}, {"scaled_infidelity", n * (1.0 - f)}});
      }
      out << std::setw(2) << json{{"prior", std::string(to_string(prior))}, {"bounds", rows}} << '\n';
      return;
    }
    out << "N,fidelity,scaled_infidelity\n";
    for (int n : ns) {
      const double f = cm_bound(prior, n);
      out << n << ',' << std::fixed << std::setprecision(6) << f << ',' << n * (1.0 - f) << std::defaultfloat
          << std::setprecision(12) << '\n';
    }
  });
  return kOk;
}

// -- eval ---------------------------------------------------------------------

Prior choose_prior(const std::string& flag, std::optional<Prior> from_file) {
  if (!flag.empty()) {
    const Prior p = parse_prior(flag);
    if (from_file && *from_file != p) throw UsageError("--prior disagrees with the prior recorded in the strategy file");
    return p;
  }
  return from_file.value_or(Prior::Sphere3D);
}

int cmd_eval(const Common& c, const std::string& path, const std::string& prior_s, const std::string& guess_s,
             int depth_cap) {
  const StrategySpec spec = load_strategy(path);
  const Prior prior = choose_prior(prior_s, spec_prior(spec));
  EvalOptions opts;
  opts.threads = c.threads;
  opts.depth_cap = depth_cap;

  FidelityReport report;
  std::optional<double> bitstring;
  if (const auto* t = std::get_if<TreeSpec>(&spec)) {
    if (!guess_s.empty() && parse_guess_rule(guess_s) != GuessRule::Optimal)
      throw UsageError("adaptive trees are evaluated with the optimal guess");
    report = eval_adaptive_tree(t->tree, prior, opts);
  } else if (const auto* f = std::get_if<FixedAxesSpec>(&spec)) {
    const GuessRule rule = guess_s.empty() ? f->guess : parse_guess_rule(guess_s);
    report = eval_fixed_axes(f->plan, rule, prior, opts);
    if (f->plan.copies() <= 10) {
      const AdaptiveTree tree = f->plan.to_tree();
      bitstring = rule == GuessRule::Optimal
                      ? eval_adaptive_tree(tree, prior, opts).fidelity
                      : eval_adaptive_tree(tree, prior, tomographic_tree_rule(f->plan), "tomographic", opts).fidelity;
    }
  } else if (const auto* k = std::get_if<ConstantSpec>(&spec)) {
    report.copies = k->copies;
    report.prior = prior;
    report.rule = "constant";
    report.strategy = "constant_guess";
    report.fidelity = 0.5;
    report.total_probability = 1.0;
  } else {
    throw CapExceeded("two-stage strategies have no exact evaluator; use `qest simulate`");
  }

  emit(c, [&](std::ostream& out) {
    if (c.format == "json") {
      json j = to_json(report);
      if (bitstring) j["bitstring_fidelity"] = *bitstring;
      out << std::setw(2) << j << '\n';
      return;
    }
    out << "# N=" << report.copies << " prior=" << to_string(report.prior) << " rule=" << report.rule
        << " fidelity=" << std::setprecision(12) << report.fidelity << " scaled_infidelity=" << report.scaled_infidelity()
        << " total_probability=" << report.total_probability;
    if (bitstring) out << " bitstring_fidelity=" << *bitstring;
    out << '\n';
    write_report_csv(out, report);
  });
  if (!c.output.empty())
    std::cout << std::setprecision(12) << "fidelity " << report.fidelity << "  N(1-F) " << report.scaled_infidelity()
              << '\n';
  return kOk;
}

// -- optimize -----------------------------------------------------------------

int cmd_optimize(const Common& c, int n, const std::string& prior_s, int restarts, const std::string& seed_s,
                 bool no_gauge, double tolerance, int max_iter) {
  OptimizationConfig cfg;
  cfg.restarts = restarts;
  cfg.seed = resolve_seed(seed_s);
  cfg.gauge_fixing = !no_gauge;
  cfg.tolerance = tolerance;
  cfg.max_iterations = max_iter;
  cfg.threads = c.threads;
  const Prior prior = parse_prior(prior_s);
  const OptimizationResult res = optimize_tree(n, prior, cfg);
  const StructureReport st = structure_report(res.tree, prior);

  const json tree_doc = tree_json(res.tree, prior);
  json meta = optimization_metadata(res, cfg, prior);
  meta["history_dependent"] = st.history_dependent;
  meta["communication_gain"] = st.communication_gain;
  if (!c.output.empty()) {
    save_json(c.output, tree_doc);
    std::filesystem::path side(c.output);
    side.replace_extension(".meta.json");
    save_json(side, meta);
  }
  if (c.format == "json") {
    std::cout << std::setw(2) << json{{"tree", tree_doc}, {"meta", meta}} << '\n';
  } else {
    std::cout << std::setprecision(10) << "N=" << n << " prior=" << to_string(prior) << " seed=" << cfg.seed
              << " fidelity=" << res.report.fidelity << " scaled_infidelity=" << res.report.scaled_infidelity()
              << " best_restart=" << res.best_restart << " converged=" << (res.converged ? "yes" : "no") << '\n';
    std::cout << "depth,max_pairwise_angle_deg,mean_angle_to_guess_deg\n";
    for (const auto& d : st.depths)
      std::cout << d.depth << ',' << d.max_pairwise_angle << ',' << d.mean_angle_to_guess << '\n';
    std::cout << "history_dependent=" << (st.history_dependent ? "yes" : "no")
              << " communication_gain=" << st.communication_gain << '\n';
  }
  if (!res.converged) {
    std::cerr << "optimize: best restart did not meet the convergence tolerance (result written)\n";
    return kNoConvergence;
  }
  return kOk;
}

// -- simulate -----------------------------------------------------------------

struct SimArgs {
  std::string strategy;
  bool two_stage = false;
  bool constant = false;
  int n = 0;
  double beta = 0.5;
  double lambda = 1.0;
  std::string prior;
  std::string trials = "1e6";
  std::string seed;
  std::string ledger;
  std::string guess;
};

int cmd_simulate(const Common& c, const SimArgs& a) {
  const long trials = parse_trials(a.trials);
  const std::uint64_t seed = resolve_seed(a.seed);
  if (static_cast<int>(!a.strategy.empty()) + a.two_stage + a.constant != 1)
    throw UsageError("choose exactly one of --strategy, --two-stage, --constant");

  std::optional<SimStrategy> strat;
  if (a.two_stage) {
    if (a.n < 1) throw UsageError("--two-stage needs --n");
    strat = two_stage_strategy(TwoStagePlan::make(a.n, a.beta, a.lambda));
  } else if (a.constant) {
    if (a.n < 1) throw UsageError("--constant needs --n");
    const Prior prior = a.prior.empty() ? Prior::Sphere3D : parse_prior(a.prior);
    strat = constant_guess_strategy(default_tiebreak(prior), a.n, prior);
  } else {
    const StrategySpec spec = load_strategy(a.strategy);
    const Prior prior = choose_prior(a.prior, spec_prior(spec));
    EvalOptions opts;
    opts.threads = c.threads;
    opts.depth_cap = AdaptiveTree::kMaxDepth;
    if (const auto* t = std::get_if<TreeSpec>(&spec)) {
      strat = tree_strategy(t->tree, prior, opts);
    } else if (const auto* f = std::get_if<FixedAxesSpec>(&spec)) {
      strat = fixed_axes_strategy(f->plan, a.guess.empty() ? f->guess : parse_guess_rule(a.guess), prior, opts);
    } else if (const auto* k = std::get_if<ConstantSpec>(&spec)) {
      strat = constant_guess_strategy(k->guess, k->copies, prior);
    } else {
      strat = two_stage_strategy(std::get<TwoStagePlan>(spec));
    }
  }

  const SimulationResult r = simulate(*strat, trials, seed, c.threads);
  if (!a.ledger.empty()) append_ledger(a.ledger, r);
  emit(c, [&](std::ostream& out) {
    json j = to_json(r);
    if (const auto ex = strat->exact_fidelity()) {
      j["exact"] = *ex;
      j["z"] = r.standard_error > 0 ? (r.mean - *ex) / r.standard_error : 0.0;
    }
    if (c.format == "json") {
      out << std::setw(2) << j << '\n';
      return;
    }
    out << "scheme,N,trials,seed,mean,stderr,scaled_infidelity,strategy_hash";
    if (j.contains("exact")) out << ",exact,z";
    out << '\n'
        << r.scheme << ',' << r.copies << ',' << r.trials << ',' << r.seed << ',' << r.mean << ','
        << r.standard_error << ',' << r.scaled_infidelity() << ',' << r.strategy_hash;
    if (j.contains("exact")) out << ',' << j["exact"].get<double>() << ',' << j["z"].get<double>();
    out << '\n';
  });
  return kOk;
}

// -- series / fit / table -----------------------------------------------------

std::vector<FidelitySeries> exact_series(const std::vector<std::string>& schemes, int threads) {
  std::vector<FidelitySeries> all;
  for (const auto& s : schemes) {
    if (s == "2d-cm") all.push_back(cm_bound_series(Prior::Circle2D, default_cm_copies()));
    else if (s == "3d-cm") all.push_back(cm_bound_series(Prior::Sphere3D, default_cm_copies()));
    else if (s == "2d-og") all.push_back(fixed_axes_series(Prior::Circle2D, GuessRule::Optimal, default_copies(Prior::Circle2D), threads));
    else if (s == "2d-t") all.push_back(fixed_axes_series(Prior::Circle2D, GuessRule::Tomographic, default_copies(Prior::Circle2D), threads));
    else if (s == "3d-og") all.push_back(fixed_axes_series(Prior::Sphere3D, GuessRule::Optimal, default_copies(Prior::Sphere3D), threads));
    else if (s == "3d-t") all.push_back(fixed_axes_series(Prior::Sphere3D, GuessRule::Tomographic, default_copies(Prior::Sphere3D), threads));
    else throw UsageError("unknown exact scheme '" + s + "'");
  }
  return all;
}

const std::vector<std::string> kExactSchemes = {"2d-cm", "3d-cm", "2d-og", "2d-t", "3d-og", "3d-t"};

int cmd_series(const Common& c, std::vector<std::string> schemes) {
  if (schemes.empty()) schemes = kExactSchemes;
  const auto all = exact_series(schemes, c.threads);
  emit(c, [&](std::ostream& out) { write_series_csv(out, all); });
  return kOk;
}

std::map<std::string, FidelitySeries> load_inputs(const std::vector<std::string>& inputs, const std::string& scheme) {
  std::map<std::string, FidelitySeries> merged;
  for (const auto& path : inputs)
    for (auto& [name, s] : read_series_csv(path, scheme)) {
      if (merged.count(name)) throw UsageError("scheme '" + name + "' appears in more than one input");
      merged.emplace(name, std::move(s));
    }
  return merged;
}

json fit_json(const std::string& scheme, const FitResult& f, FitModel model) {
  json j{{"scheme", scheme}, {"model", std::string(to_string(model))}, {"c", f.c}, {"c_stderr", f.c_stderr},
         {"points", f.points}, {"min_N", f.min_copies}, {"max_N", f.max_copies}, {"residual", f.residual}};
  if (model != FitModel::Leading) {
    j["d"] = f.d;
    j["d_stderr"] = f.d_stderr;
  }
  for (const auto& r : kReferenceCoefficients)
    if (scheme == r.scheme) {
      j["reference"] = r.value;
      j["relative_deviation"] = (f.c - r.value) / r.value;
    }
  return j;
}

int cmd_fit(const Common& c, const std::vector<std::string>& inputs, const std::string& scheme,
            const std::string& model_s, int min_n) {
  const FitModel model = parse_fit_model(model_s);
  const auto series = load_inputs(inputs, scheme);
  if (series.empty()) throw UsageError(scheme.empty() ? "no series in input" : "no rows for scheme '" + scheme + "'");
  json rows = json::array();
  for (const auto& [name, s] : series) rows.push_back(fit_json(name, fit_leading_coefficient(s, model, min_n), model));
  emit(c, [&](std::ostream& out) {
    if (c.format == "json") {
      out << std::setw(2) << rows << '\n';
      return;
    }
    out << "scheme,model,c,c_stderr,d,d_stderr,points,min_N,max_N,reference,relative_deviation\n";
    for (const auto& r : rows) {
      out << r["scheme"].get<std::string>() << ',' << r["model"].get<std::string>() << ',' << r["c"].get<double>()
          << ',' << r["c_stderr"].get<double>() << ',';
      if (r.contains("d")) out << r["d"].get<double>() << ',' << r["d_stderr"].get<double>();
      else out << ',';
      out << ',' << r["points"].get<int>() << ',' << r["min_N"].get<int>() << ',' << r["max_N"].get<int>() << ',';
      if (r.contains("reference")) out << r["reference"].get<double>() << ',' << r["relative_deviation"].get<double>();
      else out << ',';
      out << '\n';
    }
  });
  return kOk;
}

int cmd_table(const Common& c, const std::vector<std::string>& inputs, const std::string& model_s, int min_n) {
  const FitModel model = parse_fit_model(model_s);
  std::map<std::string, FidelitySeries> series;
  if (inputs.empty()) {
    for (auto& s : exact_series(kExactSchemes, c.threads)) series.emplace(s.scheme, std::move(s));
  } else {
    series = load_inputs(inputs, {});
  }
  std::vector<CoefficientRow> rows;
  for (const auto& ref : kReferenceCoefficients) {
    const auto it = series.find(ref.scheme);
    if (it == series.end()) continue;
    CoefficientRow row{ref.scheme, fit_leading_coefficient(it->second, model, min_n), ref.value, ref.label, 0.0};
    row.relative_deviation = (row.fit.c - ref.value) / ref.value;
    rows.push_back(row);
  }
  if (rows.empty()) throw UsageError("no series with a reference coefficient in the input");
  emit(c, [&](std::ostream& out) {
    if (c.format == "json") {
      json j = json::array();
      for (const auto& r : rows) {
        json f = fit_json(r.scheme, r.fit, model);
        f["reference_label"] = r.reference_label;
        j.push_back(std::move(f));
      }
      out << std::setw(2) << j << '\n';
      return;
    }
    out << "scheme,c,c_stderr,reference,reference_label,relative_deviation,points,min_N,max_N\n";
    for (const auto& r : rows)
      out << r.scheme << ',' << r.fit.c << ',' << r.fit.c_stderr << ',' << r.reference << ',' << r.reference_label
          << ',' << r.relative_deviation << ',' << r.fit.points << ',' << r.fit.min_copies << ',' << r.fit.max_copies
          << '\n';
  });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact evaluation, optimization and simulation of local qubit estimation strategies"};
  app.require_subcommand(1);
  Common common;

  auto* bounds = app.add_subcommand("bounds", "collective-measurement bounds F_CM and N(1-F_CM)");
  std::string b_prior = "3d", b_range;
  bounds->add_option("--prior", b_prior)->check(CLI::IsMember({"2d", "3d"}));
  bounds->add_option("--n", b_range, "N, a..b, a..b:step or comma list")->required();
  add_common(bounds, common);

  auto* eval = app.add_subcommand("eval", "exact fidelity of a strategy file");
  std::string e_path, e_prior, e_guess;
  int e_depth_cap = 16;
  eval->add_option("--strategy", e_path)->required();
  eval->add_option("--prior", e_prior)->check(CLI::IsMember({"2d", "3d"}));
  eval->add_option("--guess", e_guess)->check(CLI::IsMember({"optimal", "tomographic"}));
  eval->add_option("--depth-cap", e_depth_cap, "largest tree depth evaluated exactly")
      ->check(CLI::Range(1, AdaptiveTree::kMaxDepth));
  add_common(eval, common);

  auto* opt = app.add_subcommand("optimize", "search for the best adaptive tree");
  int o_n = 0, o_restarts = 20, o_iter = 4000;
  std::string o_prior = "3d", o_seed;
  bool o_no_gauge = false;
  double o_tol = 1e-12;
  opt->add_option("--n", o_n)->required()->check(CLI::PositiveNumber);
  opt->add_option("--prior", o_prior)->check(CLI::IsMember({"2d", "3d"}));
  opt->add_option("--restarts", o_restarts)->check(CLI::PositiveNumber);
  opt->add_option("--seed", o_seed);
  opt->add_flag("--no-gauge", o_no_gauge, "optimize every angle, no gauge fixing");
  opt->add_option("--tolerance", o_tol)->check(CLI::PositiveNumber);
  opt->add_option("--max-iter", o_iter)->check(CLI::PositiveNumber);
  add_common(opt, common);

  auto* sim = app.add_subcommand("simulate", "Monte Carlo estimate of a strategy's fidelity");
  SimArgs s;
  sim->add_option("--strategy", s.strategy, "strategy file");
  sim->add_flag("--two-stage", s.two_stage);
  sim->add_flag("--constant", s.constant, "data-independent guess (scores 1/2)");
  sim->add_option("--n", s.n)->check(CLI::PositiveNumber);
  sim->add_option("--beta", s.beta);
  sim->add_option("--lambda", s.lambda);
  sim->add_option("--prior", s.prior)->check(CLI::IsMember({"2d", "3d"}));
  sim->add_option("--guess", s.guess)->check(CLI::IsMember({"optimal", "tomographic"}));
  sim->add_option("--trials", s.trials, "trial count, e.g. 1e6");
  sim->add_option("--seed", s.seed);
  sim->add_option("--ledger", s.ledger, "CSV ledger to append to");
  add_common(sim, common);

  auto* series = app.add_subcommand("series", "exact fidelity series on the default N grids (CSV)");
  std::vector<std::string> sr_schemes;
  series->add_option("--scheme", sr_schemes, "2d-cm 3d-cm 2d-og 2d-t 3d-og 3d-t (default all)");
  add_common(series, common);

  auto* fit = app.add_subcommand("fit", "fit 1 - F = c/N + ... to a series or ledger");
  std::vector<std::string> f_inputs;
  std::string f_scheme, f_model = "c,d";
  int f_min = kDefaultFitMinCopies;
  fit->add_option("--input", f_inputs)->required();
  fit->add_option("--scheme", f_scheme);
  fit->add_option("--model", f_model)->check(CLI::IsMember({"c", "c,d", "c,e"}));
  fit->add_option("--min-n", f_min)->check(CLI::PositiveNumber);
  add_common(fit, common);

  auto* table = app.add_subcommand("table", "coefficient table against the analytic values");
  std::vector<std::string> t_inputs;
  std::string t_model = "c,d";
  int t_min = kDefaultFitMinCopies;
  table->add_option("--input", t_inputs, "series/ledger CSVs (default: compute exact series)");
  table->add_option("--model", t_model)->check(CLI::IsMember({"c", "c,d", "c,e"}));
  table->add_option("--min-n", t_min)->check(CLI::PositiveNumber);
  add_common(table, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*bounds) return cmd_bounds(common, b_prior, b_range);
    if (*eval) return cmd_eval(common, e_path, e_prior, e_guess, e_depth_cap);
    if (*opt) return cmd_optimize(common, o_n, o_prior, o_restarts, o_seed, o_no_gauge, o_tol, o_iter);
    if (*sim) return cmd_simulate(common, s);
    if (*series) return cmd_series(common, sr_schemes);
    if (*fit) return cmd_fit(common, f_inputs, f_scheme, f_model, f_min);
    if (*table) return cmd_table(common, t_inputs, t_model, t_min);
  } catch (const CapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n(exact evaluation is capped; `qest simulate` estimates the fidelity)\n";
    return kCap;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

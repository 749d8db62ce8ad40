// asympt_fit.hpp
// Leading 1/N coefficient of the infidelity, 1 - F ~ c/N + d/N^2, by
// weighted least squares over a fidelity series.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qubit_est/exact_eval.hpp"
#include "qubit_est/monte_carlo.hpp"

namespace qest {

struct SeriesPoint {
  int copies = 0;
  double fidelity = 0.0;
  double stderr_ = 0.0;  // 0 for exact values
};

enum class SeriesSource { Exact, Simulated };

struct FidelitySeries {
  std::string scheme;
  SeriesSource source = SeriesSource::Exact;
  std::vector<SeriesPoint> points;

  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i > 0 && points[i].copies <= points[i - 1].copies)
        throw std::invalid_argument("series '" + scheme + "': N must be strictly increasing");
      if (!(points[i].fidelity >= 0.5 && points[i].fidelity <= 1.0))
        throw std::invalid_argument("series '" + scheme + "': fidelity outside [1/2, 1]");
    }
  }
};

enum class FitModel { Leading, LeadingPlusSubleading, LeadingPlusHalfOrder };

inline FitModel parse_fit_model(std::string_view s) {
  if (s == "c") return FitModel::Leading;
  if (s == "c,d" || s == "cd") return FitModel::LeadingPlusSubleading;
  if (s == "c,e" || s == "ce") return FitModel::LeadingPlusHalfOrder;
  throw std::invalid_argument("unknown fit model '" + std::string(s) + "' (expected c, c,d or c,e)");
}

inline std::string_view to_string(FitModel m) {
  switch (m) {
    case FitModel::Leading: return "c";
    case FitModel::LeadingPlusSubleading: return "c,d";
    default: return "c,e";
  }
}

struct FitResult {
  double c = 0.0;
  double d = std::numeric_limits<double>::quiet_NaN();
  double c_stderr = 0.0;
  double d_stderr = std::numeric_limits<double>::quiet_NaN();
  double residual = 0.0;  // weighted sum of squared residuals
  int points = 0;
  int min_copies = 0;
  int max_copies = 0;
};

inline constexpr int kDefaultFitMinCopies = 40;

/// Weighted least squares of (1 - F) on x = 1/N and a second regressor
/// (x^2 for c,d; x^1.5 for c,e, where d is the N^-3/2 coefficient). Weights are
/// 1/stderr^2 when every point carries an error, otherwise uniform.
/// Coefficient errors use the residual-scaled covariance, so rescaling all
/// stderr by a common factor changes nothing.
inline FitResult fit_leading_coefficient(const FidelitySeries& series, FitModel model,
                                         int min_copies = kDefaultFitMinCopies) {
  series.validate();
  std::vector<SeriesPoint> pts;
  for (const auto& p : series.points)
    if (p.copies >= min_copies) pts.push_back(p);
  if (pts.size() < 4)
    throw std::invalid_argument("fit needs at least 4 points with N >= " + std::to_string(min_copies) + " (series '" +
                                series.scheme + "' has " + std::to_string(pts.size()) + ")");
  bool weighted = true;
  for (const auto& p : pts) {
    if (!(p.fidelity < 1.0)) throw std::invalid_argument("fit: fidelity must be < 1 at every point");
    weighted = weighted && p.stderr_ > 0.0;
  }

  const int k = model == FitModel::Leading ? 1 : 2;
  const auto second = [model](int n) {
    return model == FitModel::LeadingPlusHalfOrder ? std::pow(n, -1.5) : 1.0 / (static_cast<double>(n) * n);
  };
  double a11 = 0.0, a12 = 0.0, a22 = 0.0, b1 = 0.0, b2 = 0.0;
  for (const auto& p : pts) {
    const double w = weighted ? 1.0 / (p.stderr_ * p.stderr_) : 1.0;
    const double x = 1.0 / p.copies, x2 = second(p.copies), y = 1.0 - p.fidelity;
    a11 += w * x * x;
    a12 += w * x * x2;
    a22 += w * x2 * x2;
    b1 += w * x * y;
    b2 += w * x2 * y;
  }
  FitResult fit;
  fit.points = static_cast<int>(pts.size());
  fit.min_copies = pts.front().copies;
  fit.max_copies = pts.back().copies;
  double inv11 = 0.0, inv22 = 0.0;
  if (k == 1) {
    if (!(a11 > 0.0)) throw std::domain_error("fit: singular design matrix");
    fit.c = b1 / a11;
    inv11 = 1.0 / a11;
  } else {
    const double det = a11 * a22 - a12 * a12;
    if (!(std::abs(det) > 1e-12 * a11 * a22)) throw std::domain_error("fit: singular design matrix (all N equal?)");
    fit.c = (a22 * b1 - a12 * b2) / det;
    fit.d = (a11 * b2 - a12 * b1) / det;
    inv11 = a22 / det;
    inv22 = a11 / det;
  }
  for (const auto& p : pts) {
    const double w = weighted ? 1.0 / (p.stderr_ * p.stderr_) : 1.0;
    const double x = 1.0 / p.copies;
    const double pred = fit.c * x + (k == 2 ? fit.d * second(p.copies) : 0.0);
    const double r = (1.0 - p.fidelity) - pred;
    fit.residual += w * r * r;
  }
  const double dof = static_cast<double>(pts.size()) - k;
  const double s2 = dof > 0 ? fit.residual / dof : 0.0;
  fit.c_stderr = std::sqrt(s2 * inv11);
  if (k == 2) fit.d_stderr = std::sqrt(s2 * inv22);
  return fit;
}

// -- series construction ------------------------------------------------------

inline FidelitySeries cm_bound_series(Prior prior, const std::vector<int>& copies) {
  FidelitySeries s{std::string(to_string(prior)) + "-cm", SeriesSource::Exact, {}};
  for (int n : copies) s.points.push_back({n, cm_bound(prior, n), 0.0});
  return s;
}

inline FidelitySeries fixed_axes_series(Prior prior, GuessRule rule, const std::vector<int>& copies, int threads = 1) {
  FidelitySeries s{std::string(to_string(prior)) + (rule == GuessRule::Optimal ? "-og" : "-t"), SeriesSource::Exact, {}};
  for (int n : copies) s.points.push_back({n, fixed_axes_fidelity(prior, n, rule, threads), 0.0});
  return s;
}

inline FidelitySeries simulated_series(const std::string& scheme, std::vector<SimulationResult> runs) {
  std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.copies < b.copies; });
  FidelitySeries s{scheme, SeriesSource::Simulated, {}};
  for (const auto& r : runs) s.points.push_back({r.copies, r.mean, r.standard_error});
  return s;
}

/// Default grids: N = 2..., 3... multiples from 40 to the exact-evaluation
/// range of each prior.
inline std::vector<int> default_copies(Prior prior, int max_copies = 0) {
  std::vector<int> out;
  if (prior == Prior::Circle2D) {
    for (int n = 40; n <= (max_copies ? max_copies : 800); n += 40) out.push_back(n);
  } else {
    for (int n = 42; n <= (max_copies ? max_copies : 180); n += 6) out.push_back(n);
  }
  return out;
}

inline std::vector<int> default_cm_copies() {
  std::vector<int> out;
  for (int n = 50; n <= 400; n += 10) out.push_back(n);
  return out;
}

// -- csv ----------------------------------------------------------------------

inline constexpr const char* kSeriesHeader = "scheme,N,fidelity,stderr,source";

inline void write_series_csv(std::ostream& out, const std::vector<FidelitySeries>& all, bool header = true) {
  if (header) out << kSeriesHeader << '\n';
  out << std::setprecision(17);
  for (const auto& s : all)
    for (const auto& p : s.points)
      out << s.scheme << ',' << p.copies << ',' << p.fidelity << ',' << p.stderr_ << ','
          << (s.source == SeriesSource::Exact ? "exact" : "simulated") << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// Reads series rows (kSeriesHeader) or Monte Carlo ledger rows
/// (kLedgerHeader) from a CSV file, keeping the rows of `scheme` (all rows
/// when empty). Repeated N from a ledger are merged by inverse-variance
/// weighting.
inline std::map<std::string, FidelitySeries> read_series_csv(const std::filesystem::path& path,
                                                             const std::string& scheme = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const bool ledger = line == kLedgerHeader;
  if (!ledger && line != kSeriesHeader)
    throw std::runtime_error(path.string() + ": unrecognized header '" + line + "'");

  struct Acc {
    double wsum = 0.0, wf = 0.0, f = 0.0;
    bool exact = false;
  };
  std::map<std::string, std::map<int, Acc>> acc;
  std::map<std::string, bool> simulated;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    try {
      std::string name;
      int n = 0;
      double f = 0.0, se = 0.0;
      bool sim = false;
      if (ledger) {
        if (cells.size() != 7) throw std::runtime_error("expected 7 columns");
        name = cells[1];
        n = std::stoi(cells[2]);
        f = std::stod(cells[5]);
        se = std::stod(cells[6]);
        sim = true;
      } else {
        if (cells.size() != 5) throw std::runtime_error("expected 5 columns");
        name = cells[0];
        n = std::stoi(cells[1]);
        f = std::stod(cells[2]);
        se = std::stod(cells[3]);
        sim = cells[4] == "simulated";
      }
      if (!scheme.empty() && name != scheme) continue;
      simulated[name] = simulated[name] || sim;
      Acc& a = acc[name][n];
      if (se > 0.0) {
        a.wsum += 1.0 / (se * se);
        a.wf += f / (se * se);
      } else {
        a.exact = true;
        a.f = f;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::map<std::string, FidelitySeries> out;
  for (const auto& [name, rows] : acc) {
    FidelitySeries s{name, simulated[name] ? SeriesSource::Simulated : SeriesSource::Exact, {}};
    for (const auto& [n, a] : rows) {
      if (a.exact)
        s.points.push_back({n, a.f, 0.0});
      else
        s.points.push_back({n, a.wf / a.wsum, 1.0 / std::sqrt(a.wsum)});
    }
    out.emplace(name, std::move(s));
  }
  return out;
}

// -- coefficient table --------------------------------------------------------

struct ReferenceCoefficient {
  const char* scheme;
  double value;
  const char* label;
};

/// Analytic leading coefficients c in F = 1 - c/N + ... for each scheme.
inline constexpr ReferenceCoefficient kReferenceCoefficients[] = {
    {"2d-cm", 0.25, "1/4"},       {"2d-og", 0.25, "1/4"},          {"2d-t", 0.375, "3/8"},
    {"3d-cm", 1.0, "1"},          {"3d-t", 1.2, "6/5"},            {"3d-og", 13.0 / 12.0, "13/12"},
    {"two-stage", 1.0, "1"},
};

inline double reference_coefficient(const std::string& scheme) {
  for (const auto& r : kReferenceCoefficients)
    if (scheme == r.scheme) return r.value;
  throw std::invalid_argument("no reference coefficient for scheme '" + scheme + "'");
}

struct CoefficientRow {
  std::string scheme;
  FitResult fit;
  double reference = 0.0;
  std::string reference_label;
  double relative_deviation = 0.0;
};

struct MissingSeries : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline std::vector<CoefficientRow> coefficient_table(const std::map<std::string, FidelitySeries>& series,
                                                     FitModel model = FitModel::LeadingPlusSubleading,
                                                     int min_copies = kDefaultFitMinCopies) {
  std::vector<CoefficientRow> rows;
  for (const auto& ref : kReferenceCoefficients) {
    const auto it = series.find(ref.scheme);
    if (it == series.end()) throw MissingSeries(std::string("missing series '") + ref.scheme + "'");
    CoefficientRow row;
    row.scheme = ref.scheme;
    row.fit = fit_leading_coefficient(it->second, model, min_copies);
    row.reference = ref.value;
    row.reference_label = ref.label;
    row.relative_deviation = (row.fit.c - ref.value) / ref.value;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qest

#pragma once

// Aggregation, CSV serialization and the ablation matrix.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <tuple>
#include <vector>

#include "gdo/errors.hpp"
#include "gdo/harness/experiment.hpp"
#include "gdo/theory.hpp"

namespace gdo::harness {

inline constexpr const char* kResultsHeader = "dataset,method,n_given,inter_steps,seed,target_acc,runtime_ms";
inline constexpr const char* kSummaryHeader = "dataset,method,n_given,inter_steps,n,mean_pct,sd_pct,ci95_pct,formatted,flag";
inline constexpr const char* kBoundHeader = "T,m,decay,variance,shift,bound";
inline constexpr const char* kCiMethod = "normal approximation: 1.96 * sd / sqrt(n), sample sd";

/// Shortest text that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw NumericError("cannot format value");
  return std::string(buf, end);
}

inline std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s == "-0.0" || s == "-0.0000") s.erase(0, 1);
  return s;
}

// ------------------------------------------------------------------ summary

struct SummaryRow {
  std::string dataset;
  std::string method;
  std::size_t n_given = 0;
  std::size_t inter_steps = 0;
  std::size_t n = 0;
  double mean = 0.0;  // percent
  double sd = 0.0;    // percent, sample
  double hw = 0.0;    // percent, 95% half-width
  bool single = false;

  std::string formatted() const { return fmt_fixed(mean, 1) + " ± " + fmt_fixed(hw, 1); }
};

struct Summary {
  std::vector<SummaryRow> rows;
  std::vector<std::string> warnings;
};

struct CellKey {
  std::string method;
  std::size_t n_given;
  std::size_t inter_steps;
  auto operator<=>(const CellKey&) const = default;
};

/// Per (method, n_given, inter_steps) statistics of target accuracy. Cells in
/// `expected` without rows are omitted and produce a warning.
inline Summary aggregate(const std::vector<ResultRow>& rows, const std::vector<CellKey>& expected = {}) {
  std::map<CellKey, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) groups[{r.method, r.n_given, r.inter_steps}].push_back(&r);
  Summary s;
  for (const auto& key : expected)
    if (!groups.contains(key))
      s.warnings.push_back("empty cell omitted: method=" + key.method + " n_given=" + std::to_string(key.n_given) +
                           " inter_steps=" + std::to_string(key.inter_steps));
  for (const auto& [key, members] : groups) {
    SummaryRow out;
    out.dataset = members.front()->dataset;
    out.method = key.method;
    out.n_given = key.n_given;
    out.inter_steps = key.inter_steps;
    out.n = members.size();
    for (const auto* r : members) out.mean += 100.0 * r->target_acc;
    out.mean /= static_cast<double>(out.n);
    if (out.n > 1) {
      double ss = 0.0;
      for (const auto* r : members) ss += (100.0 * r->target_acc - out.mean) * (100.0 * r->target_acc - out.mean);
      out.sd = std::sqrt(ss / static_cast<double>(out.n - 1));
      out.hw = 1.96 * out.sd / std::sqrt(static_cast<double>(out.n));
    } else {
      out.single = true;
    }
    s.rows.push_back(out);
  }
  return s;
}

inline std::vector<CellKey> expected_cells(const ExperimentConfig& cfg) {
  std::vector<CellKey> keys;
  for (const auto& m : cfg.methods)
    for (std::size_t g : cfg.n_given_grid)
      for (std::size_t is : cfg.inter_steps_grid) keys.push_back({m, g, is});
  return keys;
}

// --------------------------------------------------------------------- CSV

inline std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : rows)
    out += r.dataset + "," + r.method + "," + std::to_string(r.n_given) + "," + std::to_string(r.inter_steps) +
           "," + std::to_string(r.seed) + "," + fmt_double(r.target_acc) + "," +
           std::to_string(static_cast<long long>(std::llround(r.runtime_ms))) + "\n";
  return out;
}

/// Per-domain accuracy of the final model, one line per (row, domain).
inline std::string domain_acc_csv(const std::vector<ResultRow>& rows) {
  std::string out = "dataset,method,n_given,inter_steps,seed,domain,accuracy,fingerprint\n";
  for (const auto& r : rows)
    for (std::size_t d = 0; d < r.domain_acc.size(); ++d)
      out += r.dataset + "," + r.method + "," + std::to_string(r.n_given) + "," + std::to_string(r.inter_steps) +
             "," + std::to_string(r.seed) + "," + std::to_string(d) + "," + fmt_double(r.domain_acc[d]) + "," +
             std::to_string(r.fingerprint) + "\n";
  return out;
}

inline std::string summary_csv(const Summary& s) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& r : s.rows)
    out += r.dataset + "," + r.method + "," + std::to_string(r.n_given) + "," + std::to_string(r.inter_steps) +
           "," + std::to_string(r.n) + "," + fmt_fixed(r.mean, 4) + "," + fmt_fixed(r.sd, 4) + "," +
           fmt_fixed(r.hw, 4) + "," + r.formatted() + "," + (r.single ? "n=1" : "") + "\n";
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError(where + ": cannot parse \"" + s + "\"");
  return v;
}

inline std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw FormatError("results CSV: unexpected header");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto c = split_csv_line(line);
    const std::string where = "results CSV line " + std::to_string(lineno);
    if (c.size() != 7) throw FormatError(where + ": expected 7 fields, got " + std::to_string(c.size()));
    ResultRow r;
    r.dataset = c[0];
    r.method = c[1];
    r.n_given = parse_number<std::size_t>(c[2], where);
    r.inter_steps = parse_number<std::size_t>(c[3], where);
    r.seed = parse_number<std::uint64_t>(c[4], where);
    r.target_acc = parse_number<double>(c[5], where);
    r.runtime_ms = static_cast<double>(parse_number<long long>(c[6], where));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed: " + p.string());
}

// ---------------------------------------------------------------- ablation

/// n_given rows by inter_steps columns of "mean ± hw" for one method.
struct AblationMatrix {
  std::string method;
  std::vector<std::size_t> n_given;
  std::vector<std::size_t> inter_steps;
  std::vector<std::vector<std::string>> cells;  // [n_given][inter_steps]
};

inline AblationMatrix ablation_matrix(const Summary& s, const std::string& method,
                                      const std::vector<std::size_t>& n_given,
                                      const std::vector<std::size_t>& inter_steps) {
  AblationMatrix m{method, n_given, inter_steps, {}};
  for (std::size_t g : n_given) {
    std::vector<std::string> row;
    for (std::size_t is : inter_steps) {
      std::string cell = "-";
      for (const auto& r : s.rows)
        if (r.method == method && r.n_given == g && r.inter_steps == is) cell = r.formatted();
      row.push_back(cell);
    }
    m.cells.push_back(std::move(row));
  }
  return m;
}

inline std::string ablation_csv(const AblationMatrix& m) {
  std::string out = "n_given";
  for (std::size_t is : m.inter_steps) out += ",inter_steps=" + std::to_string(is);
  out += "\n";
  for (std::size_t i = 0; i < m.n_given.size(); ++i) {
    out += std::to_string(m.n_given[i]);
    for (const auto& c : m.cells[i]) out += "," + c;
    out += "\n";
  }
  return out;
}

inline std::string ablation_markdown(const AblationMatrix& m) {
  std::string out = "| " + m.method + ": # given \\ # inter |";
  for (std::size_t is : m.inter_steps) out += " " + std::to_string(is) + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < m.inter_steps.size(); ++i) out += "---|";
  out += "\n";
  for (std::size_t i = 0; i < m.n_given.size(); ++i) {
    out += "| " + std::to_string(m.n_given[i]) + " |";
    for (const auto& c : m.cells[i]) out += " " + c + " |";
    out += "\n";
  }
  return out;
}

// ------------------------------------------------------------------ theory

inline BoundParams bound_params(const ExperimentConfig& cfg, std::size_t T) {
  BoundParams p;
  p.mu = cfg.theory.mu;
  p.sigma2 = cfg.theory.sigma2;
  p.gamma0 = cfg.gdo.lr.gamma0;
  p.epsilon = cfg.gdo.lr.epsilon;
  p.m = cfg.gdo.m;
  p.T = T;
  p.delta = cfg.theory.delta;
  p.err0 = cfg.theory.err0;
  p.c = cfg.theory.c;
  return p;
}

/// Bound and its three terms for T = 1..t_max.
inline std::string bound_csv(const ExperimentConfig& cfg) {
  std::string out = std::string(kBoundHeader) + "\n";
  for (std::size_t T = 1; T <= cfg.theory.t_max; ++T) {
    BoundParams p = bound_params(cfg, T);
    BoundTerms b = error_bound_terms(p);
    out += std::to_string(T) + "," + std::to_string(p.m) + "," + fmt_double(b.decay) + "," +
           fmt_double(b.variance) + "," + fmt_double(b.shift) + "," + fmt_double(b.total) + "\n";
  }
  return out;
}

inline std::string lyapunov_csv(const LyapunovTrace& trace) {
  std::string out = "index,t,k,err,theta_drift_sq,v\n";
  for (std::size_t i = 0; i < trace.entries.size(); ++i) {
    const auto& e = trace.entries[i];
    out += std::to_string(i) + "," + std::to_string(e.t) + "," + std::to_string(e.k) + "," + fmt_double(e.err) +
           "," + fmt_double(e.theta_drift_sq) + "," + fmt_double(e.v) + "\n";
  }
  return out;
}

inline std::string drift_report_csv(const DriftReport& r, std::size_t window) {
  return "length,window,first_window_mean,last_window_mean,nonincrease_fraction,contraction_ratio\n" +
         std::to_string(r.length) + "," + std::to_string(window) + "," + fmt_double(r.first_window_mean) + "," +
         fmt_double(r.last_window_mean) + "," + fmt_double(r.nonincrease_fraction) + "," +
         fmt_double(r.contraction_ratio) + "\n";
}

}  // namespace gdo::harness

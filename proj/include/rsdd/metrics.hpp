#pragma once

// Per-iteration metrics of a run and their CSV / JSON files.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rsdd/artifact.hpp"
#include "rsdd/invariants.hpp"

namespace rsdd {

inline constexpr const char* kMetricsFormat = "rsdd.metrics.v1";

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IterationMetrics {
  int t = 0;
  double max_violation = 0.0;  // max_s sum_i g_is(x_i)
  double sum_rho = 0.0;
  double cost = 0.0;  // sum_i f_i(x_i) + M rho_i
  double cost_error_norm = 0.0;
  double lambda_consistency = 0.0;
  double mu_spread = 0.0;  // max over edges of ||mu_i - mu_j||_inf
  std::vector<double> tracking_error;

  friend bool operator==(const IterationMetrics&, const IterationMetrics&) = default;
};

struct MetricsTable {
  std::string problem_hash;
  double f_star = 0.0;
  bool absolute_error = false;  // set when f* = 0: cost_error_norm is |cost - f*|
  std::size_t n_agents = 0;
  std::vector<IterationMetrics> rows;

  friend bool operator==(const MetricsTable&, const MetricsTable&) = default;
};

/// Row t pairs the lambdas of snapshot t with the local-step outputs they produced (snapshot t+1).
inline MetricsTable compute_metrics(const RunTrace& trace, const OracleArtifact& oracle) {
  const auto& p = trace.problem;
  const auto hash = problem_hash(p);
  if (hash != oracle.problem_hash) {
    throw MetricsError("oracle result is for problem " + oracle.problem_hash + ", trace is for " + hash);
  }
  MetricsTable table;
  table.problem_hash = hash;
  table.f_star = oracle.f_star;
  table.absolute_error = oracle.f_star == 0.0;
  table.n_agents = p.size();
  const Index S = p.coupling_dim;
  const std::size_t N = p.size();

  for (int t = 0; t + 1 < static_cast<int>(trace.snapshots.size()); ++t) {
    const auto& lam = trace.snapshots[t];
    const auto& out = trace.snapshots[t + 1];
    IterationMetrics m;
    m.t = t;
    m.max_violation = coupling_violation(p, out);
    for (const auto& s : out) m.sum_rho += s.rho;
    m.cost = relaxed_cost(p, out, trace.M);
    m.cost_error_norm = std::abs(m.cost - oracle.f_star) / (table.absolute_error ? 1.0 : std::abs(oracle.f_star));
    m.lambda_consistency = lambda_consistency(lam, S);
    for (const auto& [i, j] : trace.graph.edges()) {
      if (S > 0) m.mu_spread = std::max(m.mu_spread, (out[i].mu - out[j].mu).cwiseAbs().maxCoeff());
    }
    std::vector<Vector> g(N);
    for (std::size_t i = 0; i < N; ++i) g[i] = p.agents[i].coupling(out[i].x);
    for (std::size_t i = 0; i < N; ++i) {
      Vector term = Vector::Zero(S);
      for (const auto& [j, l] : lam[i].lambda_out) term += l - lam[j].lambda_out.at(i);
      Vector others = Vector::Zero(S);
      for (std::size_t j = 0; j < N; ++j)
        if (j != i) others += g[j];
      m.tracking_error.push_back(S == 0 ? 0.0 : (term - others).cwiseAbs().maxCoeff());
    }
    table.rows.push_back(std::move(m));
  }
  return table;
}

// ---------------------------------------------------------------------------
// CSV

inline std::vector<std::string> csv_header(std::size_t n_agents) {
  std::vector<std::string> h{"t", "max_violation", "sum_rho", "cost", "cost_error_norm", "lambda_consistency", "mu_spread"};
  for (std::size_t i = 1; i <= n_agents; ++i) h.push_back("tracking_error_" + std::to_string(i));
  return h;
}

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string metrics_to_csv(const MetricsTable& table) {
  std::ostringstream os;
  const auto header = csv_header(table.n_agents);
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << "\n";
  for (const auto& m : table.rows) {
    os << m.t;
    for (double v : {m.max_violation, m.sum_rho, m.cost, m.cost_error_norm, m.lambda_consistency, m.mu_spread})
      os << "," << csv_number(v);
    for (double v : m.tracking_error) os << "," << csv_number(v);
    os << "\n";
  }
  return os.str();
}

/// Rows only; the header fixes the agent count.
inline MetricsTable metrics_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("metrics csv: missing header row");
  std::vector<std::string> cols;
  {
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(c);
  }
  if (cols.size() < 7) throw ParseError("metrics csv: header has " + std::to_string(cols.size()) + " columns");
  MetricsTable table;
  table.n_agents = cols.size() - 7;
  if (cols != csv_header(table.n_agents)) throw ParseError("metrics csv: unexpected header '" + line + "'");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw ParseError("metrics csv:" + std::to_string(lineno) + ": bad number '" + c + "'");
      }
    }
    if (v.size() != cols.size()) throw ParseError("metrics csv:" + std::to_string(lineno) + ": wrong column count");
    IterationMetrics m;
    m.t = static_cast<int>(v[0]);
    m.max_violation = v[1];
    m.sum_rho = v[2];
    m.cost = v[3];
    m.cost_error_norm = v[4];
    m.lambda_consistency = v[5];
    m.mu_spread = v[6];
    m.tracking_error.assign(v.begin() + 7, v.end());
    table.rows.push_back(std::move(m));
  }
  return table;
}

// ---------------------------------------------------------------------------
// JSON

inline json metrics_to_json(const MetricsTable& table) {
  json rows = json::array();
  for (const auto& m : table.rows) {
    json te = json::array();
    for (double v : m.tracking_error) te.push_back(io::number(v));
    rows.push_back(json{{"t", m.t},
                        {"max_violation", io::number(m.max_violation)},
                        {"sum_rho", io::number(m.sum_rho)},
                        {"cost", io::number(m.cost)},
                        {"cost_error_norm", io::number(m.cost_error_norm)},
                        {"lambda_consistency", io::number(m.lambda_consistency)},
                        {"mu_spread", io::number(m.mu_spread)},
                        {"tracking_error", te}});
  }
  return json{{"format", kMetricsFormat},
              {"problem_hash", table.problem_hash},
              {"f_star", io::number(table.f_star)},
              {"absolute_error", table.absolute_error},
              {"n_agents", table.n_agents},
              {"rows", rows}};
}

inline MetricsTable metrics_from_json(const json& j) {
  io::Reader r(j, "");
  if (r.at("format").as_string() != kMetricsFormat) r.at("format").fail("expected " + std::string(kMetricsFormat));
  MetricsTable table;
  table.problem_hash = r.at("problem_hash").as_string();
  table.f_star = r.at("f_star").as_double();
  if (!r.at("absolute_error").node().is_boolean()) r.at("absolute_error").fail("expected a boolean");
  table.absolute_error = r.at("absolute_error").node().get<bool>();
  table.n_agents = static_cast<std::size_t>(r.at("n_agents").as_int());
  const auto rows = r.at("rows");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto row = rows.at(k);
    IterationMetrics m;
    m.t = static_cast<int>(row.at("t").as_int());
    m.max_violation = row.at("max_violation").as_double();
    m.sum_rho = row.at("sum_rho").as_double();
    m.cost = row.at("cost").as_double();
    m.cost_error_norm = row.at("cost_error_norm").as_double();
    m.lambda_consistency = row.at("lambda_consistency").as_double();
    m.mu_spread = row.at("mu_spread").as_double();
    m.tracking_error = row.at("tracking_error").as_doubles();
    if (m.tracking_error.size() != table.n_agents) row.at("tracking_error").fail("expected one entry per agent");
    table.rows.push_back(std::move(m));
  }
  return table;
}

enum class ArtifactFormat { csv, json };

inline void emit_run_artifact(const MetricsTable& table, const std::string& path, ArtifactFormat format) {
  io::write_file(path, format == ArtifactFormat::csv ? metrics_to_csv(table) : metrics_to_json(table).dump(1) + "\n");
}

inline MetricsTable load_run_artifact(const std::string& path) {
  const auto text = io::read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return metrics_from_json(io::parse_text(text, path));
  return metrics_from_csv(text);
}

}  // namespace rsdd

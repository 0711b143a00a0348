#pragma once

// JSON file formats for problems, microgrid configurations and QP dumps.
// Numbers are written with round-trip precision; non-finite values are
// written as the strings "inf", "-inf" and "nan".

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "rsdd/problem.hpp"
#include "rsdd/qp.hpp"

namespace rsdd {

using json = nlohmann::json;

inline constexpr const char* kProblemFormat = "rsdd.problem.v1";
inline constexpr const char* kMicrogridFormat = "rsdd.microgrid.v1";

namespace io {

inline json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline json vector(const Vector& v) {
  json out = json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back(number(v(k)));
  return out;
}

inline json matrix(const Matrix& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) out.push_back(vector(m.row(r).transpose()));
  return out;
}

/// Tracks the JSON path being read so errors can name the field.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(&node), path_(std::move(path)) {}

  const json& node() const { return *node_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& why) const { throw ParseError("field '" + path_ + "': " + why); }

  bool has(const std::string& key) const { return node_->is_object() && node_->contains(key); }

  Reader at(const std::string& key) const {
    if (!node_->is_object()) fail("expected an object");
    auto it = node_->find(key);
    if (it == node_->end()) throw ParseError("missing field '" + join(key) + "'");
    return Reader(*it, join(key));
  }

  Reader at(std::size_t i) const {
    if (!node_->is_array() || i >= node_->size()) fail("index " + std::to_string(i) + " out of range");
    return Reader((*node_)[i], path_ + "[" + std::to_string(i) + "]");
  }

  std::size_t size() const {
    if (!node_->is_array()) fail("expected an array");
    return node_->size();
  }

  double as_double() const {
    if (node_->is_number()) return node_->get<double>();
    if (node_->is_string()) {
      const auto s = node_->get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    fail("expected a number");
  }

  long long as_int() const {
    if (!node_->is_number_integer()) fail("expected an integer");
    return node_->get<long long>();
  }

  std::string as_string() const {
    if (!node_->is_string()) fail("expected a string");
    return node_->get<std::string>();
  }

  Vector as_vector(Index expected = -1) const {
    const std::size_t n = size();
    if (expected >= 0 && static_cast<Index>(n) != expected)
      fail("expected " + std::to_string(expected) + " entries, got " + std::to_string(n));
    Vector v(static_cast<Index>(n));
    for (std::size_t k = 0; k < n; ++k) v(static_cast<Index>(k)) = at(k).as_double();
    return v;
  }

  std::vector<double> as_doubles() const {
    const Vector v = as_vector();
    return {v.data(), v.data() + v.size()};
  }

  Matrix as_matrix(Index cols, Index rows = -1) const {
    const std::size_t n = size();
    if (rows >= 0 && static_cast<Index>(n) != rows)
      fail("expected " + std::to_string(rows) + " rows, got " + std::to_string(n));
    Matrix m(static_cast<Index>(n), cols);
    for (std::size_t r = 0; r < n; ++r) m.row(static_cast<Index>(r)) = at(r).as_vector(cols).transpose();
    return m;
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json* node_;
  std::string path_;
};

/// Parses text, reporting syntax errors with their line number.
inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ParseError(source + ":" + std::to_string(line) + ": syntax error: " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace io

// ---------------------------------------------------------------------------
// Problems

inline json agent_to_json(const AgentProblem& a) {
  json hinges = json::array();
  for (const auto& h : a.cost_hinges) {
    hinges.push_back({{"scale", io::number(h.scale)}, {"row", io::vector(h.row)}, {"offset", io::number(h.offset)}});
  }
  return {
      {"name", a.name},
      {"dim", a.dim},
      {"cost",
       {{"quadratic", io::matrix(a.cost_quadratic)},
        {"linear", io::vector(a.cost_linear)},
        {"constant", io::number(a.cost_constant)},
        {"hinges", hinges}}},
      {"local_set",
       {{"lower", io::vector(a.local_set.lower)},
        {"upper", io::vector(a.local_set.upper)},
        {"eq_matrix", io::matrix(a.local_set.eq_matrix)},
        {"eq_rhs", io::vector(a.local_set.eq_rhs)},
        {"ineq_matrix", io::matrix(a.local_set.ineq_matrix)},
        {"ineq_rhs", io::vector(a.local_set.ineq_rhs)}}},
      {"coupling", {{"matrix", io::matrix(a.coupling_matrix)}, {"offset", io::vector(a.coupling_offset)}}},
  };
}

inline json problem_to_json(const ConstraintCoupledProblem& p) {
  json agents = json::array();
  for (const auto& a : p.agents) agents.push_back(agent_to_json(a));
  json slater = nullptr;
  if (p.slater_point) {
    slater = json::array();
    for (const auto& x : *p.slater_point) slater.push_back(io::vector(x));
  }
  return {{"format", kProblemFormat}, {"coupling_dim", p.coupling_dim}, {"agents", agents}, {"slater_point", slater}};
}

inline AgentProblem agent_from_json(const io::Reader& r, Index S) {
  AgentProblem a;
  if (r.has("name")) a.name = r.at("name").as_string();
  a.dim = static_cast<Index>(r.at("dim").as_int());
  if (a.dim <= 0) r.at("dim").fail("must be positive");
  const Index n = a.dim;
  const auto cost = r.at("cost");
  a.cost_quadratic = cost.at("quadratic").as_matrix(n, n);
  a.cost_linear = cost.at("linear").as_vector(n);
  a.cost_constant = cost.has("constant") ? cost.at("constant").as_double() : 0.0;
  if (cost.has("hinges")) {
    const auto hs = cost.at("hinges");
    for (std::size_t k = 0; k < hs.size(); ++k) {
      const auto h = hs.at(k);
      a.cost_hinges.push_back({h.at("scale").as_double(), h.at("row").as_vector(n), h.at("offset").as_double()});
    }
  }
  const auto ls = r.at("local_set");
  a.local_set.lower = ls.at("lower").as_vector(n);
  a.local_set.upper = ls.at("upper").as_vector(n);
  a.local_set.eq_matrix = ls.has("eq_matrix") ? ls.at("eq_matrix").as_matrix(n) : Matrix(0, n);
  a.local_set.eq_rhs = ls.has("eq_rhs") ? ls.at("eq_rhs").as_vector(a.local_set.eq_matrix.rows()) : Vector(0);
  a.local_set.ineq_matrix = ls.has("ineq_matrix") ? ls.at("ineq_matrix").as_matrix(n) : Matrix(0, n);
  a.local_set.ineq_rhs =
      ls.has("ineq_rhs") ? ls.at("ineq_rhs").as_vector(a.local_set.ineq_matrix.rows()) : Vector(0);
  const auto cp = r.at("coupling");
  const auto rows = cp.at("matrix");
  if (static_cast<Index>(rows.size()) != S) {
    throw ProblemError("agent '" + r.path() + "': coupling map has " + std::to_string(rows.size()) +
                       " rows but coupling_dim is " + std::to_string(S));
  }
  a.coupling_matrix = rows.as_matrix(n);
  a.coupling_offset = cp.at("offset").as_vector(S);
  return a;
}

/// Throws ParseError for malformed content and ProblemError for shape violations.
inline ConstraintCoupledProblem problem_from_json(const json& root) {
  io::Reader r(root, "");
  ConstraintCoupledProblem p;
  p.coupling_dim = static_cast<Index>(r.at("coupling_dim").as_int());
  const auto agents = r.at("agents");
  for (std::size_t i = 0; i < agents.size(); ++i) p.agents.push_back(agent_from_json(agents.at(i), p.coupling_dim));
  if (r.has("slater_point") && !root.at("slater_point").is_null()) {
    const auto sp = r.at("slater_point");
    std::vector<Vector> pts;
    for (std::size_t i = 0; i < sp.size(); ++i) pts.push_back(sp.at(i).as_vector());
    p.slater_point = std::move(pts);
  }
  check_structure(p);
  return p;
}

inline void save_problem(const ConstraintCoupledProblem& p, const std::string& path) {
  io::write_file(path, problem_to_json(p).dump(1) + "\n");
}

inline ConstraintCoupledProblem load_problem(const std::string& path) {
  return problem_from_json(io::parse_text(io::read_file(path), path));
}

/// Stable content hash (FNV-1a over the canonical JSON) used to join traces and oracle results.
inline std::string problem_hash(const ConstraintCoupledProblem& p) {
  const std::string text = problem_to_json(p).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Microgrid configuration

inline json microgrid_to_json(const MicrogridConfig& c) {
  return {
      {"format", kMicrogridFormat},
      {"n_gen", c.n_gen},
      {"n_stor", c.n_stor},
      {"n_conl", c.n_conl},
      {"horizon", c.horizon},
      {"gen_p_min", c.gen_p_min},
      {"gen_p_max", c.gen_p_max},
      {"gen_rate_min", c.gen_rate_min},
      {"gen_rate_max", c.gen_rate_max},
      {"gen_alpha1", c.gen_alpha1},
      {"gen_alpha2", c.gen_alpha2},
      {"stor_discharge", c.stor_discharge},
      {"stor_charge", c.stor_charge},
      {"stor_q_max", c.stor_q_max},
      {"stor_q_init", c.stor_q_init},
      {"conl_desired", c.conl_desired},
      {"conl_p_min", c.conl_p_min},
      {"conl_p_max", c.conl_p_max},
      {"conl_beta", c.conl_beta},
      {"trade_capacity", c.trade_capacity},
      {"trade_price", c.trade_price},
      {"trade_fee", c.trade_fee},
      {"demand", c.demand},
      {"balance_tolerance", c.balance_tolerance},
  };
}

/// Missing keys keep the defaults of default_microgrid_config().
inline MicrogridConfig microgrid_from_json(const json& root) {
  io::Reader r(root, "");
  MicrogridConfig c = default_microgrid_config();
  auto get_int = [&](const char* key, int& field) {
    if (r.has(key)) field = static_cast<int>(r.at(key).as_int());
  };
  auto get = [&](const char* key, double& field) {
    if (r.has(key)) field = r.at(key).as_double();
  };
  get_int("n_gen", c.n_gen);
  get_int("n_stor", c.n_stor);
  get_int("n_conl", c.n_conl);
  const int old_horizon = c.horizon;
  get_int("horizon", c.horizon);
  if (c.horizon != old_horizon) {
    c.demand = default_demand_profile(c.horizon);
    c.conl_desired.assign(static_cast<std::size_t>(std::max(c.horizon, 0)) + 1, 0.4);
  }
  get("gen_p_min", c.gen_p_min);
  get("gen_p_max", c.gen_p_max);
  get("gen_rate_min", c.gen_rate_min);
  get("gen_rate_max", c.gen_rate_max);
  get("gen_alpha1", c.gen_alpha1);
  get("gen_alpha2", c.gen_alpha2);
  get("stor_discharge", c.stor_discharge);
  get("stor_charge", c.stor_charge);
  get("stor_q_max", c.stor_q_max);
  get("stor_q_init", c.stor_q_init);
  if (r.has("conl_desired")) c.conl_desired = r.at("conl_desired").as_doubles();
  get("conl_p_min", c.conl_p_min);
  get("conl_p_max", c.conl_p_max);
  get("conl_beta", c.conl_beta);
  get("trade_capacity", c.trade_capacity);
  get("trade_price", c.trade_price);
  get("trade_fee", c.trade_fee);
  if (r.has("demand")) c.demand = r.at("demand").as_doubles();
  get("balance_tolerance", c.balance_tolerance);
  validate_microgrid_config(c);
  return c;
}

inline MicrogridConfig load_microgrid_config(const std::string& path) {
  return microgrid_from_json(io::parse_text(io::read_file(path), path));
}

inline void save_microgrid_config(const MicrogridConfig& c, const std::string& path) {
  io::write_file(path, microgrid_to_json(c).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// QP dumps, for bug reports

inline json qp_to_json(const QpStandardForm& f) {
  json tags = json::array();
  for (auto t : f.in_tags) {
    switch (t) {
      case RowTag::local: tags.push_back("local"); break;
      case RowTag::coupling: tags.push_back("coupling"); break;
      case RowTag::hinge: tags.push_back("hinge"); break;
      case RowTag::elastic: tags.push_back("elastic"); break;
    }
  }
  return {{"format", "rsdd.qp.v1"},     {"Q", io::matrix(f.Q)},       {"c", io::vector(f.c)},
          {"constant", f.constant},     {"lb", io::vector(f.lb)},     {"ub", io::vector(f.ub)},
          {"A_eq", io::matrix(f.A_eq)}, {"b_eq", io::vector(f.b_eq)}, {"A_in", io::matrix(f.A_in)},
          {"b_in", io::vector(f.b_in)}, {"in_tags", tags}};
}

inline QpStandardForm qp_from_json(const json& root) {
  io::Reader r(root, "");
  QpStandardForm f;
  f.c = r.at("c").as_vector();
  const Index n = f.c.size();
  f.Q = r.at("Q").as_matrix(n, n);
  f.constant = r.at("constant").as_double();
  f.lb = r.at("lb").as_vector(n);
  f.ub = r.at("ub").as_vector(n);
  f.A_eq = r.at("A_eq").as_matrix(n);
  f.b_eq = r.at("b_eq").as_vector(f.A_eq.rows());
  f.A_in = r.at("A_in").as_matrix(n);
  f.b_in = r.at("b_in").as_vector(f.A_in.rows());
  const auto tags = r.at("in_tags");
  for (std::size_t k = 0; k < tags.size(); ++k) {
    const auto t = tags.at(k).as_string();
    if (t == "local") f.in_tags.push_back(RowTag::local);
    else if (t == "coupling") f.in_tags.push_back(RowTag::coupling);
    else if (t == "hinge") f.in_tags.push_back(RowTag::hinge);
    else if (t == "elastic") f.in_tags.push_back(RowTag::elastic);
    else tags.at(k).fail("unknown row tag '" + t + "'");
  }
  return f;
}

}  // namespace rsdd

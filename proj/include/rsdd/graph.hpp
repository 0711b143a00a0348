#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rsdd {

/// Undirected, connected communication graph on nodes 0..n-1.
class Graph {
 public:
  Graph() = default;

  /// Throws std::invalid_argument on self-loops, out-of-range nodes or a disconnected result.
  Graph(std::size_t n_nodes, std::vector<std::pair<std::size_t, std::size_t>> edges) : n_(n_nodes) {
    std::set<std::pair<std::size_t, std::size_t>> unique;
    for (auto [i, j] : edges) {
      if (i >= n_ || j >= n_) throw std::invalid_argument("edge endpoint out of range");
      if (i == j) throw std::invalid_argument("self-loop on node " + std::to_string(i));
      unique.emplace(std::min(i, j), std::max(i, j));
    }
    edges_.assign(unique.begin(), unique.end());
    neighbors_.assign(n_, {});
    for (auto [i, j] : edges_) {
      neighbors_[i].push_back(j);
      neighbors_[j].push_back(i);
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
    if (!is_connected()) throw std::invalid_argument("graph is not connected");
  }

  std::size_t size() const { return n_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_.at(i); }
  std::size_t directed_edge_count() const { return 2 * edges_.size(); }

  /// a_ij in {0, 1}
  int adjacency(std::size_t i, std::size_t j) const {
    const auto& nb = neighbors_.at(i);
    return std::binary_search(nb.begin(), nb.end(), j) ? 1 : 0;
  }

  bool is_connected() const {
    if (n_ == 0) return false;
    std::vector<bool> seen(n_, false);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!q.empty()) {
      const auto i = q.front();
      q.pop();
      for (auto j : neighbors_[i]) {
        if (!seen[j]) {
          seen[j] = true;
          ++count;
          q.push(j);
        }
      }
    }
    return count == n_;
  }

  friend bool operator==(const Graph& a, const Graph& b) { return a.n_ == b.n_ && a.edges_ == b.edges_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;  // i < j
  std::vector<std::vector<std::size_t>> neighbors_;
};

enum class TopologyKind { path, cycle, star, complete, erdos_renyi };

struct Topology {
  TopologyKind kind = TopologyKind::cycle;
  double p = 0.3;  // erdos_renyi edge probability
  std::uint64_t seed = 0;
  int max_retries = 1000;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Graph build_graph(const Topology& topo, std::size_t n) {
  if (n < 2) throw std::invalid_argument("a communication graph needs at least 2 nodes");
  std::vector<std::pair<std::size_t, std::size_t>> e;
  switch (topo.kind) {
    case TopologyKind::path:
      for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
      break;
    case TopologyKind::cycle:
      for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
      if (n > 2) e.emplace_back(n - 1, 0);
      break;
    case TopologyKind::star:
      for (std::size_t i = 1; i < n; ++i) e.emplace_back(0, i);
      break;
    case TopologyKind::complete:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
      break;
    case TopologyKind::erdos_renyi: {
      std::mt19937_64 rng(topo.seed);
      std::bernoulli_distribution coin(topo.p);
      for (int attempt = 0; attempt < topo.max_retries; ++attempt) {
        e.clear();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng)) e.emplace_back(i, j);
        try {
          return Graph(n, e);
        } catch (const std::invalid_argument&) {
        }
      }
      throw GraphError("no connected Erdos-Renyi sample after " + std::to_string(topo.max_retries) + " attempts");
    }
  }
  return Graph(n, e);
}

/// "path", "cycle", "star", "complete", "er:<p>[:<seed>]"
inline Topology parse_topology(const std::string& spec, std::uint64_t default_seed = 0) {
  Topology t;
  t.seed = default_seed;
  if (spec == "path") t.kind = TopologyKind::path;
  else if (spec == "cycle") t.kind = TopologyKind::cycle;
  else if (spec == "star") t.kind = TopologyKind::star;
  else if (spec == "complete") t.kind = TopologyKind::complete;
  else if (spec.rfind("er:", 0) == 0) {
    t.kind = TopologyKind::erdos_renyi;
    const auto rest = spec.substr(3);
    const auto colon = rest.find(':');
    t.p = std::stod(rest.substr(0, colon));
    if (colon != std::string::npos) t.seed = std::stoull(rest.substr(colon + 1));
    if (!(t.p > 0.0 && t.p <= 1.0)) throw std::invalid_argument("edge probability must lie in (0, 1]");
  } else {
    throw std::invalid_argument("unknown topology '" + spec + "'");
  }
  return t;
}

}  // namespace rsdd

#pragma once

// Undirected graph storage, ingestion, BFS and ego-network sampling.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graphmore/diffcore.hpp"
#include "graphmore/log.hpp"

namespace graphmore {

using NodeId = std::size_t;
using Edge = std::pair<NodeId, NodeId>;

/// Hop distance marking an unreachable node.
inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable undirected simple graph with optional features and labels.
class Graph {
 public:
  Graph() = default;

  /// Builds from an edge list. Self-loops are dropped, reversed and repeated
  /// edges collapsed. Node ids must be < n_nodes.
  static Graph from_edges(std::size_t n_nodes, const std::vector<Edge>& edges, std::size_t* dropped_self_loops = nullptr,
                          std::size_t* dropped_duplicates = nullptr) {
    Graph g;
    g.adj_.assign(n_nodes, {});
    std::size_t loops = 0;
    for (auto [u, v] : edges) {
      if (u >= n_nodes || v >= n_nodes) throw UsageError("Graph: node id out of range");
      if (u == v) {
        ++loops;
        continue;
      }
      g.adj_[u].push_back(v);
      g.adj_[v].push_back(u);
    }
    std::size_t before = 0, after = 0;
    for (auto& nb : g.adj_) {
      before += nb.size();
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      after += nb.size();
    }
    if (dropped_self_loops) *dropped_self_loops = loops;
    if (dropped_duplicates) *dropped_duplicates = (before - after) / 2;
    return g;
  }

  std::size_t n_nodes() const { return adj_.size(); }
  std::size_t n_edges() const {
    std::size_t s = 0;
    for (const auto& nb : adj_) s += nb.size();
    return s / 2;
  }
  std::size_t degree(NodeId u) const { return adj_[u].size(); }
  const std::vector<NodeId>& neighbors(NodeId u) const { return adj_[u]; }
  bool has_edge(NodeId u, NodeId v) const {
    const auto& nb = adj_[u];
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  /// Edges with u < v, in lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (NodeId u = 0; u < adj_.size(); ++u)
      for (NodeId v : adj_[u])
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  const std::optional<Matrix>& features() const { return features_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }

  void set_features(Matrix x) {
    if (x.rows != n_nodes()) throw UsageError("Graph: feature rows must equal node count");
    features_ = std::move(x);
  }
  void set_labels(std::vector<int> y) {
    if (y.size() != n_nodes()) throw UsageError("Graph: label count must equal node count");
    labels_ = std::move(y);
  }

  /// Same node set, with only the given edges.
  Graph with_edges(const std::vector<Edge>& edges) const {
    Graph g = from_edges(n_nodes(), edges);
    g.features_ = features_;
    g.labels_ = labels_;
    return g;
  }

 private:
  std::vector<std::vector<NodeId>> adj_;
  std::optional<Matrix> features_;
  std::optional<std::vector<int>> labels_;
};

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  return in;
}

inline bool blank_or_comment(const std::string& line) {
  auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

template <class T>
bool parse_exact(std::istringstream& ss, std::vector<T>& out) {
  T v;
  while (ss >> v) out.push_back(v);
  return ss.eof();
}

}  // namespace detail

inline std::vector<Edge> read_edge_list(const std::string& path, std::size_t* max_id = nullptr) {
  auto in = detail::open_input(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0, top = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank_or_comment(line)) continue;
    std::istringstream ss(line);
    std::vector<long long> vals;
    if (!detail::parse_exact(ss, vals) || vals.size() != 2 || vals[0] < 0 || vals[1] < 0)
      throw IngestionError(path + ":" + std::to_string(lineno) + ": expected two non-negative integers");
    edges.emplace_back(static_cast<NodeId>(vals[0]), static_cast<NodeId>(vals[1]));
    top = std::max({top, edges.back().first, edges.back().second});
    any = true;
  }
  if (max_id) *max_id = any ? top : 0;
  if (!any) throw IngestionError(path + ": no edges");
  return edges;
}

inline Matrix read_features(const std::string& path) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t lineno = 0;
  long long n = -1, d = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank_or_comment(line)) continue;
    std::istringstream ss(line);
    if (!(ss >> n >> d) || n < 0 || d <= 0)
      throw IngestionError(path + ":" + std::to_string(lineno) + ": expected header \"N d\"");
    break;
  }
  if (n < 0) throw IngestionError(path + ": missing header");
  Matrix x(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank_or_comment(line)) continue;
    if (row >= x.rows) throw IngestionError(path + ":" + std::to_string(lineno) + ": more rows than declared");
    std::istringstream ss(line);
    std::vector<double> vals;
    if (!detail::parse_exact(ss, vals))
      throw IngestionError(path + ":" + std::to_string(lineno) + ": non-numeric value");
    if (vals.size() != x.cols)
      throw IngestionError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(x.cols) +
                           " values, got " + std::to_string(vals.size()));
    std::copy(vals.begin(), vals.end(), x.row_span(row).begin());
    ++row;
  }
  if (row != x.rows) throw IngestionError(path + ": expected " + std::to_string(x.rows) + " rows, got " + std::to_string(row));
  return x;
}

inline std::vector<std::pair<NodeId, int>> read_labels(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<std::pair<NodeId, int>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank_or_comment(line)) continue;
    std::istringstream ss(line);
    std::vector<long long> vals;
    if (!detail::parse_exact(ss, vals) || vals.size() != 2 || vals[0] < 0 || vals[1] < 0)
      throw IngestionError(path + ":" + std::to_string(lineno) + ": expected \"node_id class_id\"");
    out.emplace_back(static_cast<NodeId>(vals[0]), static_cast<int>(vals[1]));
  }
  return out;
}

/// Loads a graph from an edge list plus optional feature and label files.
/// The node count is the larger of (max edge id + 1) and the feature row count.
inline Graph load_dataset(const std::string& edge_path, const std::optional<std::string>& feature_path = std::nullopt,
                          const std::optional<std::string>& label_path = std::nullopt) {
  std::size_t max_id = 0;
  auto edges = read_edge_list(edge_path, &max_id);
  std::optional<Matrix> x;
  std::size_t n = max_id + 1;
  if (feature_path) {
    x = read_features(*feature_path);
    if (x->rows < n)
      throw IngestionError(*feature_path + ": " + std::to_string(x->rows) + " feature rows but edge list references node " +
                           std::to_string(max_id));
    n = x->rows;
  }
  std::size_t loops = 0, dups = 0;
  Graph g = Graph::from_edges(n, edges, &loops, &dups);
  if (loops) log().info("{}: dropped {} self-loops", edge_path, loops);
  if (dups) log().info("{}: collapsed {} duplicate or reversed edges", edge_path, dups);
  if (x) g.set_features(std::move(*x));
  if (label_path) {
    std::vector<int> y(n, -1);
    for (auto [node, cls] : read_labels(*label_path)) {
      if (node >= n) throw IngestionError(*label_path + ": node id " + std::to_string(node) + " out of range");
      y[node] = cls;
    }
    g.set_labels(std::move(y));
  }
  return g;
}

// ---------------------------------------------------------------------------

inline std::vector<std::uint32_t> bfs_from(const Graph& g, NodeId source) {
  if (source >= g.n_nodes()) throw UsageError("bfs_from: source out of range");
  std::vector<std::uint32_t> dist(g.n_nodes(), kUnreachable);
  std::vector<NodeId> frontier{source};
  dist[source] = 0;
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const NodeId u = frontier[head];
    for (NodeId v : g.neighbors(u)) {
      if (dist[v] != kUnreachable) continue;
      dist[v] = dist[u] + 1;
      frontier.push_back(v);
    }
  }
  return dist;
}

/// BFS truncated at max_hops; returns visited nodes in discovery order.
inline std::vector<NodeId> nodes_within(const Graph& g, NodeId source, std::size_t max_hops) {
  std::vector<NodeId> order{source};
  std::vector<std::uint32_t> depth{0};
  std::vector<char> seen(g.n_nodes(), 0);
  seen[source] = 1;
  for (std::size_t head = 0; head < order.size(); ++head) {
    if (depth[head] >= max_hops) continue;
    for (NodeId v : g.neighbors(order[head])) {
      if (seen[v]) continue;
      seen[v] = 1;
      order.push_back(v);
      depth.push_back(depth[head] + 1);
    }
  }
  return order;
}

/// Component id per node, numbered by smallest member.
inline std::vector<std::size_t> connected_components(const Graph& g, std::size_t* count = nullptr) {
  std::vector<std::size_t> comp(g.n_nodes(), SIZE_MAX);
  std::size_t next = 0;
  for (NodeId s = 0; s < g.n_nodes(); ++s) {
    if (comp[s] != SIZE_MAX) continue;
    for (NodeId v : nodes_within(g, s, SIZE_MAX)) comp[v] = next;
    ++next;
  }
  if (count) *count = next;
  return comp;
}

/// k-core number of every node (Batagelj–Zaversnik bucket peeling).
inline std::vector<std::size_t> core_numbers(const Graph& g) {
  const std::size_t n = g.n_nodes();
  std::vector<std::size_t> deg(n), core(n, 0);
  std::size_t maxdeg = 0;
  for (NodeId u = 0; u < n; ++u) maxdeg = std::max(maxdeg, deg[u] = g.degree(u));
  std::vector<std::vector<NodeId>> buckets(maxdeg + 1);
  for (NodeId u = 0; u < n; ++u) buckets[deg[u]].push_back(u);
  std::vector<char> removed(n, 0);
  std::size_t k = 0;
  for (std::size_t processed = 0; processed < n;) {
    std::size_t b = 0;
    while (b <= maxdeg && buckets[b].empty()) ++b;
    NodeId u = buckets[b].back();
    buckets[b].pop_back();
    if (removed[u] || deg[u] != b) continue;
    k = std::max(k, b);
    core[u] = k;
    removed[u] = 1;
    ++processed;
    for (NodeId v : g.neighbors(u)) {
      if (removed[v] || deg[v] == 0) continue;
      --deg[v];
      buckets[deg[v]].push_back(v);
    }
  }
  return core;
}

// ---------------------------------------------------------------------------

/// Induced subgraph around a center node.
struct Subgraph {
  NodeId center = 0;
  std::size_t radius = 0;
  /// Parent ids; nodes[0] is the center.
  std::vector<NodeId> nodes;
  /// Induced edges in local ids, (a, b) with a < b.
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t size() const { return nodes.size(); }
  /// Local id of a parent node, or nullopt when absent.
  std::optional<std::size_t> local_id(NodeId parent) const {
    auto it = std::find(nodes.begin(), nodes.end(), parent);
    if (it == nodes.end()) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
  }
};

/// Samples local topology around a node. The ego sampler is the only one
/// provided; others can be plugged in through this interface.
class TopologySampler {
 public:
  virtual ~TopologySampler() = default;
  virtual Subgraph sample(const Graph& g, NodeId v, std::size_t r) const = 0;
};

/// Induced ego network: every node within r hops of the center.
class EgoSampler final : public TopologySampler {
 public:
  Subgraph sample(const Graph& g, NodeId v, std::size_t r) const override {
    if (v >= g.n_nodes()) throw UsageError("sample_ego: node out of range");
    if (r < 1) throw UsageError("sample_ego: radius must be >= 1");
    Subgraph s;
    s.center = v;
    s.radius = r;
    s.nodes = nodes_within(g, v, r);
    std::vector<std::size_t> local(g.n_nodes(), SIZE_MAX);
    for (std::size_t i = 0; i < s.nodes.size(); ++i) local[s.nodes[i]] = i;
    for (std::size_t i = 0; i < s.nodes.size(); ++i)
      for (NodeId w : g.neighbors(s.nodes[i])) {
        const std::size_t j = local[w];
        if (j != SIZE_MAX && i < j) s.edges.emplace_back(i, j);
      }
    std::sort(s.edges.begin(), s.edges.end());
    return s;
  }
};

inline Subgraph sample_ego(const Graph& g, NodeId v, std::size_t r) { return EgoSampler{}.sample(g, v, r); }

inline std::vector<Subgraph> sample_multi_resolution(const Graph& g, NodeId v, const std::vector<std::size_t>& radii,
                                                     const TopologySampler& sampler = EgoSampler{}) {
  if (radii.empty()) throw UsageError("sample_multi_resolution: empty radius set");
  if (!std::is_sorted(radii.begin(), radii.end())) throw UsageError("sample_multi_resolution: radii must be ascending");
  std::vector<Subgraph> out;
  out.reserve(radii.size());
  for (auto r : radii) out.push_back(sampler.sample(g, v, r));
  return out;
}

}  // namespace graphmore

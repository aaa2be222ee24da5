#pragma once

// Train/validation/test edge splits with matched negative samples.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "graphmore/graph.hpp"

namespace graphmore {

struct EdgeSplit {
  std::vector<Edge> train_pos, valid_pos, test_pos;
  std::vector<Edge> train_neg, valid_neg, test_neg;
};

inline std::uint64_t pair_key(NodeId u, NodeId v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
}

/// Draws `count` distinct non-edges of g (u < v) that are not in `exclude`.
/// Falls back to enumeration when the graph is dense.
inline std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, std::mt19937_64& rng,
                                          std::set<std::uint64_t>& exclude) {
  const std::size_t n = g.n_nodes();
  const std::size_t all_pairs = n * (n - 1) / 2;
  const std::size_t non_edges = all_pairs - g.n_edges();
  if (count + exclude.size() > non_edges)
    throw UsageError("split_edges: graph too dense to supply " + std::to_string(count) + " negative links");
  std::vector<Edge> out;
  out.reserve(count);
  if (2 * (count + exclude.size()) > non_edges) {
    std::vector<Edge> pool;
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v)
        if (!g.has_edge(u, v) && !exclude.count(pair_key(u, v))) pool.emplace_back(u, v);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(count);
    for (auto e : pool) exclude.insert(pair_key(e.first, e.second));
    return pool;
  }
  std::uniform_int_distribution<NodeId> pick(0, n - 1);
  while (out.size() < count) {
    NodeId u = pick(rng), v = pick(rng);
    if (u == v || g.has_edge(u, v)) continue;
    if (u > v) std::swap(u, v);
    if (!exclude.insert(pair_key(u, v)).second) continue;
    out.emplace_back(u, v);
  }
  return out;
}

/// Shuffles the edges and cuts them by `ratios` (train, valid, test). Valid
/// and test sizes are rounded; train takes the rest. Each split gets as many
/// negatives as positives; negatives are disjoint across splits.
inline EdgeSplit split_edges(const Graph& g, std::array<double, 3> ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("split_edges: ratios must sum to 1");
  for (double r : ratios)
    if (r < 0.0) throw UsageError("split_edges: ratios must be non-negative");
  std::mt19937_64 rng(seed);
  auto edges = g.edges();
  std::shuffle(edges.begin(), edges.end(), rng);
  const std::size_t m = edges.size();
  const auto n_valid = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(m)));
  const auto n_test = std::min(m - n_valid, static_cast<std::size_t>(std::llround(ratios[2] * static_cast<double>(m))));
  EdgeSplit s;
  s.valid_pos.assign(edges.begin(), edges.begin() + n_valid);
  s.test_pos.assign(edges.begin() + n_valid, edges.begin() + n_valid + n_test);
  s.train_pos.assign(edges.begin() + n_valid + n_test, edges.end());
  std::set<std::uint64_t> used;
  s.train_neg = sample_non_edges(g, s.train_pos.size(), rng, used);
  s.valid_neg = sample_non_edges(g, s.valid_pos.size(), rng, used);
  s.test_neg = sample_non_edges(g, s.test_pos.size(), rng, used);
  return s;
}

}  // namespace graphmore

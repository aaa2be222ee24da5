#pragma once

// Discrete sectional curvature of geodesic triangles (m; b, c) from the
// parallelogram law on shortest-path distances.

#include <cstdint>
#include <random>
#include <unordered_map>
#include <vector>

#include "graphmore/graph.hpp"

namespace graphmore {

/// Memoised single-source BFS rows. Evicts everything when the entry budget
/// is exceeded.
class BfsCache {
 public:
  explicit BfsCache(const Graph& g, std::size_t max_entries = std::size_t{1} << 26) : g_(g), max_entries_(max_entries) {}

  const std::vector<std::uint32_t>& row(NodeId s) {
    auto it = rows_.find(s);
    if (it != rows_.end()) return it->second;
    if ((rows_.size() + 1) * g_.n_nodes() > max_entries_) rows_.clear();
    return rows_.emplace(s, bfs_from(g_, s)).first->second;
  }

 private:
  const Graph& g_;
  std::size_t max_entries_;
  std::unordered_map<NodeId, std::vector<std::uint32_t>> rows_;
};

namespace detail {

inline double sectional_curvature_rows(const std::vector<std::uint32_t>& dm, const std::vector<std::uint32_t>& db,
                                       const std::vector<std::uint32_t>& dc, NodeId b, NodeId /*c*/) {
  const double gbc = dc[b];
  double sum = 0.0;
  std::size_t members = 0;
  for (std::size_t a = 0; a < dm.size(); ++a) {
    if (dm[a] == kUnreachable) continue;
    const double am = dm[a], ab = db[a], ac = dc[a];
    sum += am * am + gbc * gbc / 4.0 - (ab * ab + ac * ac) / 2.0;
    ++members;
  }
  return sum / static_cast<double>(members);
}

inline void require_triangle(const Graph& g, NodeId m, NodeId b, NodeId c) {
  if (m >= g.n_nodes() || b >= g.n_nodes() || c >= g.n_nodes()) throw UsageError("sectional_curvature: node out of range");
  if (b == c) throw UsageError("sectional_curvature: b and c must be distinct");
  if (!g.has_edge(m, b) || !g.has_edge(m, c)) throw UsageError("sectional_curvature: b and c must be neighbours of m");
}

}  // namespace detail

/// Mean over nodes a in the component of m of
///   g(a,m)^2 + g(b,c)^2 / 4 - (g(a,b)^2 + g(a,c)^2) / 2.
inline double sectional_curvature(const Graph& g, NodeId m, NodeId b, NodeId c) {
  detail::require_triangle(g, m, b, c);
  return detail::sectional_curvature_rows(bfs_from(g, m), bfs_from(g, b), bfs_from(g, c), b, c);
}

inline double sectional_curvature(BfsCache& cache, const Graph& g, NodeId m, NodeId b, NodeId c) {
  detail::require_triangle(g, m, b, c);
  // copies keep the rows alive across cache evictions
  const auto dm = cache.row(m);
  const auto db = cache.row(b);
  const auto& dc = cache.row(c);
  return detail::sectional_curvature_rows(dm, db, dc, b, c);
}

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
};

struct CurvatureHistogram {
  std::vector<HistogramBin> bins;
  std::vector<double> values;
  double mean = 0.0;
  double fraction_negative = 0.0;
  double fraction_nonnegative = 0.0;
  double fraction_positive = 0.0;
  bool exhaustive = false;
  /// Set when no node has two neighbours, so no triangle exists.
  bool empty = true;
};

inline std::vector<HistogramBin> bin_values(const std::vector<double>& values, std::size_t n_bins) {
  std::vector<HistogramBin> bins;
  if (values.empty() || n_bins == 0) return bins;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) bins.push_back({lo + width * i, lo + width * (i + 1), 0});
  bins.back().right = hi;
  for (double v : values) {
    auto idx = static_cast<std::size_t>((v - lo) / width);
    bins[std::min(idx, n_bins - 1)].count++;
  }
  return bins;
}

/// Curvature of triangles (m; b, c) with b != c neighbours of m. Enumerates
/// every triangle when there are at most `samples` of them, otherwise draws
/// `samples` triangles uniformly over m then over the neighbour pair.
inline CurvatureHistogram curvature_histogram(const Graph& g, std::size_t samples = 10000, std::uint64_t seed = 0,
                                              std::size_t n_bins = 20) {
  CurvatureHistogram h;
  std::vector<NodeId> centers;
  std::size_t triangles = 0;
  for (NodeId m = 0; m < g.n_nodes(); ++m) {
    const std::size_t d = g.degree(m);
    if (d >= 2) {
      centers.push_back(m);
      triangles += d * (d - 1) / 2;
    }
  }
  if (centers.empty()) return h;
  h.empty = false;
  BfsCache cache(g);
  if (triangles <= samples) {
    h.exhaustive = true;
    for (NodeId m : centers) {
      const auto& nb = g.neighbors(m);
      for (std::size_t i = 0; i < nb.size(); ++i)
        for (std::size_t j = i + 1; j < nb.size(); ++j) h.values.push_back(sectional_curvature(cache, g, m, nb[i], nb[j]));
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_center(0, centers.size() - 1);
    for (std::size_t s = 0; s < samples; ++s) {
      const NodeId m = centers[pick_center(rng)];
      const auto& nb = g.neighbors(m);
      std::uniform_int_distribution<std::size_t> pick_nb(0, nb.size() - 1);
      const std::size_t i = pick_nb(rng);
      std::size_t j = pick_nb(rng);
      while (j == i) j = pick_nb(rng);
      h.values.push_back(sectional_curvature(cache, g, m, nb[i], nb[j]));
    }
  }
  double sum = 0.0;
  std::size_t neg = 0, pos = 0;
  for (double v : h.values) {
    sum += v;
    neg += v < 0.0;
    pos += v > 0.0;
  }
  const double n = static_cast<double>(h.values.size());
  h.mean = sum / n;
  h.fraction_negative = neg / n;
  h.fraction_nonnegative = 1.0 - h.fraction_negative;
  h.fraction_positive = pos / n;
  h.bins = bin_values(h.values, n_bins);
  return h;
}

}  // namespace graphmore

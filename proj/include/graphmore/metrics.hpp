#pragma once

// Ranking and classification metrics, and embedding distortion against
// shortest-path distances.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "graphmore/graph.hpp"

namespace graphmore {

class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Mann–Whitney statistic: P(score_pos > score_neg) with ties counted half.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw UsageError("auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        rank_sum += mid_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("auc: both classes must be present");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

/// Step-wise average precision. Each positive contributes the precision over
/// all items scoring at least as high as it.
inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw UsageError("average_precision: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t n_pos = 0, seen = 0, seen_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, group_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) group_pos += labels[order[j++]] == 1;
    seen += j - i;
    seen_pos += group_pos;
    sum += static_cast<double>(group_pos) * static_cast<double>(seen_pos) / static_cast<double>(seen);
    n_pos += group_pos;
    i = j;
  }
  if (n_pos == 0) throw MetricError("average_precision: no positive items");
  return sum / static_cast<double>(n_pos);
}

struct F1Scores {
  double weighted = 0.0;
  double macro = 0.0;
  double micro = 0.0;
};

/// Per-class F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0. Classes
/// are the union of true and predicted labels. Weighted uses true supports.
inline F1Scores f1_scores(std::span<const int> pred, std::span<const int> labels) {
  if (pred.size() != labels.size()) throw UsageError("f1_scores: length mismatch");
  if (pred.empty()) throw UsageError("f1_scores: empty input");
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0, support = 0;
  };
  std::map<int, Counts> per_class;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    per_class[labels[i]].support++;
    if (pred[i] == labels[i]) {
      per_class[labels[i]].tp++;
      ++correct;
    } else {
      per_class[pred[i]].fp++;
      per_class[labels[i]].fn++;
    }
  }
  F1Scores out;
  double macro_sum = 0.0, weighted_sum = 0.0;
  for (const auto& [cls, c] : per_class) {
    const double den = 2.0 * c.tp + c.fp + c.fn;
    const double f1 = den == 0.0 ? 0.0 : 2.0 * c.tp / den;
    macro_sum += f1;
    weighted_sum += f1 * static_cast<double>(c.support);
  }
  out.macro = macro_sum / static_cast<double>(per_class.size());
  out.weighted = weighted_sum / static_cast<double>(pred.size());
  out.micro = static_cast<double>(correct) / static_cast<double>(pred.size());
  return out;
}

// ---------------------------------------------------------------------------

enum class PairMode { full, sampled };

/// Squared embedding distances for a batch of pairs.
using PairDistanceFn =
    std::function<std::vector<double>(std::span<const std::size_t> first, std::span<const std::size_t> second)>;

struct DistortionResult {
  double mean = 0.0;
  /// Standard error of the mean (0 in full mode).
  double std_error = 0.0;
  /// Mean distortion over pairs with the node as source (0 when none evaluated).
  std::vector<double> per_node;
  std::size_t pairs = 0;
  /// True when the graph had more than one component with pairs.
  bool disconnected = false;
};

/// Mean of |d^2(i,j) / g(i,j)^2 - 1| over ordered pairs i != j in the same
/// component. Components are averaged separately and weighted by size.
/// Full mode enumerates every pair; sampled mode draws i uniformly over
/// nodes with a partner and j uniformly within i's component.
inline DistortionResult average_distortion(const Graph& g, const PairDistanceFn& distance_sq, PairMode mode,
                                           std::size_t sample_budget = 100000, std::uint64_t seed = 0,
                                           std::size_t threads = 1) {
  const std::size_t n = g.n_nodes();
  std::size_t n_comp = 0;
  const auto comp = connected_components(g, &n_comp);
  std::vector<std::size_t> comp_size(n_comp, 0);
  for (auto c : comp) ++comp_size[c];
  std::size_t covered = 0, comps_with_pairs = 0;
  for (auto s : comp_size)
    if (s >= 2) {
      covered += s;
      ++comps_with_pairs;
    }
  DistortionResult res;
  res.per_node.assign(n, 0.0);
  res.disconnected = comps_with_pairs > 1;
  if (covered == 0) return res;

  if (mode == PairMode::full) {
    std::vector<double> source_sum(n, 0.0);
    auto work = [&](std::size_t begin, std::size_t end) {
      std::vector<std::size_t> first, second;
      std::vector<double> hops;
      for (NodeId s = begin; s < end; ++s) {
        if (comp_size[comp[s]] < 2) continue;
        const auto d = bfs_from(g, s);
        first.clear();
        second.clear();
        hops.clear();
        for (NodeId t = 0; t < n; ++t) {
          if (t == s || d[t] == kUnreachable) continue;
          first.push_back(s);
          second.push_back(t);
          hops.push_back(d[t]);
        }
        const auto d2 = distance_sq(first, second);
        double acc = 0.0;
        for (std::size_t p = 0; p < d2.size(); ++p) acc += std::abs(d2[p] / (hops[p] * hops[p]) - 1.0);
        source_sum[s] = acc;
        res.per_node[s] = acc / static_cast<double>(d2.size());
      }
    };
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
      work(0, n);
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (n + threads - 1) / threads;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, std::min(n, t * chunk), std::min(n, (t + 1) * chunk));
      for (auto& th : pool) th.join();
    }
    // ordered reduction, independent of thread count
    std::vector<double> comp_sum(n_comp, 0.0);
    for (NodeId s = 0; s < n; ++s) comp_sum[comp[s]] += source_sum[s];
    double total = 0.0;
    for (std::size_t c = 0; c < n_comp; ++c) {
      const double sz = static_cast<double>(comp_size[c]);
      if (comp_size[c] < 2) continue;
      total += sz * comp_sum[c] / (sz * (sz - 1.0));
      res.pairs += comp_size[c] * (comp_size[c] - 1);
    }
    res.mean = total / static_cast<double>(covered);
    return res;
  }

  // sampled
  std::vector<std::vector<NodeId>> members(n_comp);
  std::vector<NodeId> sources;
  for (NodeId v = 0; v < n; ++v) {
    members[comp[v]].push_back(v);
    if (comp_size[comp[v]] >= 2) sources.push_back(v);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_source(0, sources.size() - 1);
  std::vector<std::size_t> first, second;
  for (std::size_t p = 0; p < sample_budget; ++p) {
    const NodeId i = sources[pick_source(rng)];
    const auto& m = members[comp[i]];
    std::uniform_int_distribution<std::size_t> pick(0, m.size() - 2);
    std::size_t j = pick(rng);
    if (m[j] >= i) ++j;  // members are sorted, skip i itself
    first.push_back(i);
    second.push_back(m[j]);
  }
  // BFS once per distinct source
  std::map<NodeId, std::vector<std::uint32_t>> rows;
  for (auto s : first)
    if (!rows.count(s)) rows.emplace(s, bfs_from(g, s));
  const auto d2 = distance_sq(first, second);
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> node_sum(n, 0.0);
  std::vector<std::size_t> node_count(n, 0);
  for (std::size_t p = 0; p < d2.size(); ++p) {
    const double h = rows[first[p]][second[p]];
    const double v = std::abs(d2[p] / (h * h) - 1.0);
    sum += v;
    sum_sq += v * v;
    node_sum[first[p]] += v;
    node_count[first[p]]++;
  }
  const double P = static_cast<double>(d2.size());
  res.mean = sum / P;
  const double var = P > 1.0 ? std::max(0.0, (sum_sq - P * res.mean * res.mean) / (P - 1.0)) : 0.0;
  res.std_error = std::sqrt(var / P);
  res.pairs = d2.size();
  for (NodeId v = 0; v < n; ++v)
    if (node_count[v]) res.per_node[v] = node_sum[v] / static_cast<double>(node_count[v]);
  return res;
}

}  // namespace graphmore

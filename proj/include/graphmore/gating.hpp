#pragma once

// Topology-aware gating. Each node's multi-resolution ego networks are
// encoded by a small structural GNN, mean-pooled per subgraph, concatenated
// across radii, and mapped by a two-layer perceptron to a softmax over
// experts.

#include <cstdint>
#include <random>
#include <vector>

#include "graphmore/diffcore.hpp"
#include "graphmore/experts.hpp"
#include "graphmore/graph.hpp"

namespace graphmore {

inline constexpr std::size_t kStructuralChannels = 3;

/// [degree / max(1, max degree), 1, is_center] per subgraph node.
inline Matrix structural_features(const Subgraph& s) {
  std::vector<std::size_t> deg(s.size(), 0);
  for (auto [a, b] : s.edges) {
    ++deg[a];
    ++deg[b];
  }
  std::size_t maxdeg = 1;
  for (auto d : deg) maxdeg = std::max(maxdeg, d);
  Matrix f(s.size(), kStructuralChannels);
  for (std::size_t i = 0; i < s.size(); ++i) {
    f(i, 0) = static_cast<double>(deg[i]) / static_cast<double>(maxdeg);
    f(i, 1) = 1.0;
    f(i, 2) = i == 0 ? 1.0 : 0.0;
  }
  // a lone center has degree 0 but is its own max-degree node
  if (s.size() == 1) f(0, 0) = 1.0;
  return f;
}

/// Sampled subgraphs for a set of nodes, laid out as one disjoint union per
/// radius so the encoder runs batched. Built once and reused every epoch.
struct TopologyBatch {
  struct Level {
    Matrix features;       // union rows x kStructuralChannels
    RowSets neighborhoods;  // closed neighbourhoods within each subgraph
    RowSets pools;          // rows belonging to each node's subgraph
  };
  std::vector<std::size_t> radii;
  std::vector<Level> levels;
  std::size_t n_nodes = 0;

  /// lists[v][r] is the subgraph of node v at radius index r.
  static TopologyBatch from_lists(const std::vector<std::vector<Subgraph>>& lists) {
    TopologyBatch b;
    b.n_nodes = lists.size();
    if (lists.empty()) return b;
    const std::size_t levels = lists.front().size();
    for (std::size_t r = 0; r < levels; ++r) b.radii.push_back(lists.front()[r].radius);
    b.levels.resize(levels);
    for (std::size_t r = 0; r < levels; ++r) {
      std::size_t total = 0;
      for (const auto& l : lists) {
        if (l.size() != levels) throw UsageError("TopologyBatch: every node needs one subgraph per radius");
        total += l[r].size();
      }
      Level& lv = b.levels[r];
      lv.features = Matrix(total, kStructuralChannels);
      std::size_t base = 0;
      std::vector<std::size_t> members;
      for (const auto& l : lists) {
        const Subgraph& s = l[r];
        Matrix f = structural_features(s);
        std::copy(f.data.begin(), f.data.end(), lv.features.data.begin() + base * kStructuralChannels);
        std::vector<std::vector<std::size_t>> local(s.size());
        for (auto [a, c] : s.edges) {
          local[a].push_back(c);
          local[c].push_back(a);
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
          members.clear();
          members.push_back(base + i);
          for (auto j : local[i]) members.push_back(base + j);
          std::sort(members.begin(), members.end());
          lv.neighborhoods.push(members);
        }
        members.resize(s.size());
        std::iota(members.begin(), members.end(), base);
        lv.pools.push(members);
        base += s.size();
      }
    }
    return b;
  }

  static TopologyBatch sample(const Graph& g, const std::vector<std::size_t>& radii,
                              const TopologySampler& sampler = EgoSampler{}) {
    std::vector<std::vector<Subgraph>> lists;
    lists.reserve(g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) lists.push_back(sample_multi_resolution(g, v, radii, sampler));
    return from_lists(lists);
  }
};

class GatingNetwork {
 public:
  GatingNetwork() = default;

  /// The output layer starts at zero so initial weights are uniform.
  GatingNetwork(std::size_t n_radii, std::size_t d_t, std::size_t n_experts, std::uint64_t seed) : n_experts_(n_experts) {
    if (n_radii == 0 || d_t == 0 || n_experts == 0) throw UsageError("GatingNetwork: dimensions must be positive");
    std::mt19937_64 rng(seed);
    encoder_.push_back(make_linear("gating/encoder/layer_1", kStructuralChannels, d_t, rng));
    encoder_.push_back(make_linear("gating/encoder/layer_2", d_t, d_t, rng));
    hidden_ = make_linear("gating/mlp/layer_1", n_radii * d_t, d_t, rng);
    output_ = make_linear("gating/mlp/layer_2", d_t, n_experts, rng);
    output_.weight.value = Matrix(d_t, n_experts, 0.0);
  }

  std::size_t n_experts() const { return n_experts_; }

  /// Topology characterisation for every node of the batch, N x (|R| d_t).
  Var encode(Tape& t, const TopologyBatch& batch) {
    std::vector<Var> pooled;
    for (const auto& lv : batch.levels) {
      Var h = t.constant(lv.features);
      for (std::size_t l = 0; l < encoder_.size(); ++l) {
        h = encoder_[l].apply(t, ad::mean_rows(h, lv.neighborhoods));
        if (l + 1 < encoder_.size()) h = ad::relu(h);
      }
      pooled.push_back(ad::mean_rows(h, lv.pools));
    }
    return ad::concat_cols(pooled);
  }

  Var logits(Tape& t, const Var& characterization) {
    return output_.apply(t, ad::relu(hidden_.apply(t, characterization)));
  }

  /// Per-node expert weights on the simplex, N x K.
  Var gate(Tape& t, const Var& characterization) { return ad::softmax_rows(logits(t, characterization)); }

  Var forward(Tape& t, const TopologyBatch& batch) { return gate(t, encode(t, batch)); }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& l : encoder_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    for (auto* l : {&hidden_, &output_}) {
      out.push_back(&l->weight);
      out.push_back(&l->bias);
    }
    return out;
  }

  LinearLayer& output_layer() { return output_; }

 private:
  std::size_t n_experts_ = 0;
  std::vector<LinearLayer> encoder_;
  LinearLayer hidden_;
  LinearLayer output_;
};

}  // namespace graphmore

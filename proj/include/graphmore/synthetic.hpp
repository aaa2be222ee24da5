#pragma once

// Synthetic graphs with mixed topology: trees, cycles and grids joined by
// random inter-substructure edges.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "graphmore/graph.hpp"

namespace graphmore {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Complete `branching`-ary tree filled in breadth-first order up to `nodes`.
struct TreeSpec {
  std::size_t branching = 2;
  std::size_t nodes = 1;

  static TreeSpec complete(std::size_t branching, std::size_t depth) {
    std::size_t total = 0, level = 1;
    for (std::size_t d = 0; d <= depth; ++d, level *= branching) total += level;
    return {branching, total};
  }
};

struct CycleSpec {
  std::size_t length = 3;
};

struct GridSpec {
  std::size_t rows = 1;
  std::size_t cols = 1;
};

struct SyntheticSpec {
  std::vector<TreeSpec> trees;
  std::vector<CycleSpec> cycles;
  std::vector<GridSpec> grids;
  std::size_t inter_edges = 0;
  std::uint64_t seed = 0;
  std::size_t feature_dim = 32;
  /// Rounds of neighbourhood averaging applied to the random channels (0 keeps them iid).
  std::size_t feature_smoothing = 8;

  std::size_t substructure_count() const { return trees.size() + cycles.size() + grids.size(); }

  std::size_t total_nodes() const {
    std::size_t n = 0;
    for (const auto& t : trees) n += t.nodes;
    for (const auto& c : cycles) n += c.length;
    for (const auto& g : grids) n += g.rows * g.cols;
    return n;
  }

  void validate() const {
    for (const auto& t : trees) {
      if (t.branching < 1) throw SpecError("tree branching must be >= 1");
      if (t.nodes < 1) throw SpecError("tree must have at least one node");
    }
    for (const auto& c : cycles)
      if (c.length < 3) throw SpecError("cycle length must be >= 3, got " + std::to_string(c.length));
    for (const auto& g : grids)
      if (g.rows < 1 || g.cols < 1) throw SpecError("grid dimensions must be >= 1");
    if (substructure_count() == 0) throw SpecError("spec has no substructures");
    if (inter_edges > 0 && substructure_count() < 2) throw SpecError("inter-edges need at least two substructures");
    if (feature_dim < 2) throw SpecError("feature dimension must be >= 2");
  }

  /// Key-value summary written next to generated files.
  std::string manifest() const {
    std::ostringstream os;
    os << "seed " << seed << "\n";
    os << "nodes " << total_nodes() << "\n";
    for (const auto& t : trees) os << "tree branching=" << t.branching << " nodes=" << t.nodes << "\n";
    for (const auto& c : cycles) os << "cycle length=" << c.length << "\n";
    for (const auto& g : grids) os << "grid rows=" << g.rows << " cols=" << g.cols << "\n";
    os << "inter_edges " << inter_edges << "\n";
    os << "feature_dim " << feature_dim << "\n";
    os << "feature_smoothing " << feature_smoothing << "\n";
    return os.str();
  }
};

/// Per-node features: [degree / max degree, core number / max core, N(0,1) ...].
inline Matrix structural_random_features(const Graph& g, std::size_t dim, std::uint64_t seed) {
  Matrix x(g.n_nodes(), dim);
  const auto core = core_numbers(g);
  std::size_t maxdeg = 1, maxcore = 1;
  for (NodeId u = 0; u < g.n_nodes(); ++u) {
    maxdeg = std::max(maxdeg, g.degree(u));
    maxcore = std::max(maxcore, core[u]);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (NodeId u = 0; u < g.n_nodes(); ++u) {
    x(u, 0) = static_cast<double>(g.degree(u)) / static_cast<double>(maxdeg);
    x(u, 1) = static_cast<double>(core[u]) / static_cast<double>(maxcore);
    for (std::size_t c = 2; c < dim; ++c) x(u, c) = gauss(rng);
  }
  return x;
}

/// Replaces the random channels (column 2 onward) by `hops` rounds of
/// closed-neighbourhood averaging, then rescales each to unit variance.
/// Nearby nodes end up with similar rows, a cheap stand-in for
/// proximity-preserving embeddings as input features.
inline void smooth_random_channels(const Graph& g, Matrix& x, std::size_t hops) {
  if (hops == 0 || x.cols <= 2) return;
  const std::size_t n = g.n_nodes();
  Matrix next(n, x.cols);
  for (std::size_t h = 0; h < hops; ++h) {
    for (NodeId u = 0; u < n; ++u) {
      const double w = 1.0 / static_cast<double>(g.degree(u) + 1);
      for (std::size_t c = 2; c < x.cols; ++c) {
        double acc = x(u, c);
        for (NodeId v : g.neighbors(u)) acc += x(v, c);
        next(u, c) = acc * w;
      }
    }
    for (NodeId u = 0; u < n; ++u)
      for (std::size_t c = 2; c < x.cols; ++c) x(u, c) = next(u, c);
  }
  for (std::size_t c = 2; c < x.cols; ++c) {
    double mean = 0.0, sq = 0.0;
    for (NodeId u = 0; u < n; ++u) mean += x(u, c);
    mean /= static_cast<double>(n);
    for (NodeId u = 0; u < n; ++u) sq += (x(u, c) - mean) * (x(u, c) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    for (NodeId u = 0; u < n; ++u) x(u, c) = sd > 0.0 ? (x(u, c) - mean) / sd : 0.0;
  }
}

/// Deterministic for a fixed spec. Features and substructure labels
/// (0 tree, 1 cycle, 2 grid) are attached.
inline Graph generate_heterogeneous(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<Edge> edges;
  std::vector<std::size_t> owner;  // substructure index per node
  std::vector<int> kind;           // 0 tree, 1 cycle, 2 grid
  std::size_t next = 0, part = 0;
  auto claim = [&](std::size_t count, int k) {
    const std::size_t base = next;
    owner.insert(owner.end(), count, part++);
    kind.insert(kind.end(), count, k);
    next += count;
    return base;
  };
  for (const auto& t : spec.trees) {
    const std::size_t base = claim(t.nodes, 0);
    for (std::size_t i = 1; i < t.nodes; ++i) edges.emplace_back(base + (i - 1) / t.branching, base + i);
  }
  for (const auto& c : spec.cycles) {
    const std::size_t base = claim(c.length, 1);
    for (std::size_t i = 0; i < c.length; ++i) edges.emplace_back(base + i, base + (i + 1) % c.length);
  }
  for (const auto& gs : spec.grids) {
    const std::size_t base = claim(gs.rows * gs.cols, 2);
    for (std::size_t r = 0; r < gs.rows; ++r)
      for (std::size_t c = 0; c < gs.cols; ++c) {
        const std::size_t id = base + r * gs.cols + c;
        if (c + 1 < gs.cols) edges.emplace_back(id, id + 1);
        if (r + 1 < gs.rows) edges.emplace_back(id, id + gs.cols);
      }
  }
  const std::size_t n = next;

  // Maximum number of distinct cross-substructure pairs.
  std::map<std::size_t, std::size_t> part_sizes;
  for (auto p : owner) ++part_sizes[p];
  std::size_t same = 0;
  for (auto [p, s] : part_sizes) same += s * (s - 1) / 2;
  const std::size_t cross = n * (n - 1) / 2 - same;
  if (spec.inter_edges > cross) throw SpecError("more inter-edges requested than cross-substructure pairs exist");

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::set<Edge> inter;
  while (inter.size() < spec.inter_edges) {
    NodeId u = pick(rng), v = pick(rng);
    if (owner[u] == owner[v]) continue;
    if (u > v) std::swap(u, v);
    if (inter.insert({u, v}).second) edges.emplace_back(u, v);
  }
  Graph g = Graph::from_edges(n, edges);
  Matrix x = structural_random_features(g, spec.feature_dim, spec.seed ^ 0x9e3779b97f4a7c15ULL);
  smooth_random_channels(g, x, spec.feature_smoothing);
  g.set_features(std::move(x));
  g.set_labels(std::move(kind));
  return g;
}

/// Options for building a spec from node shares.
struct MixOptions {
  double tree_share = 0.0;
  double cycle_share = 0.0;
  double grid_share = 0.0;
  /// Inter-substructure edges as a fraction of the node count.
  double inter_fraction = 0.0;
  std::size_t branching = 2;
  std::size_t tree_depth = 4;
  std::size_t cycle_length = 8;
  std::size_t grid_side = 4;
};

/// Parses "tree:0.5,cycle:0.4,inter:0.1" with optional keys
/// grid, branching, tree_depth, cycle_len, grid_side.
inline MixOptions parse_mix(const std::string& text) {
  MixOptions m;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw SpecError("mix entry '" + item + "' is not key:value");
    const std::string key = item.substr(0, colon);
    const std::string val = item.substr(colon + 1);
    double x = 0.0;
    try {
      std::size_t used = 0;
      x = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw SpecError("mix value for '" + key + "' is not a number: " + val);
    }
    if (x < 0.0) throw SpecError("mix value for '" + key + "' must be non-negative");
    auto as_count = [&]() {
      if (x != std::floor(x)) throw SpecError("mix value for '" + key + "' must be an integer");
      return static_cast<std::size_t>(x);
    };
    if (key == "tree") m.tree_share = x;
    else if (key == "cycle") m.cycle_share = x;
    else if (key == "grid") m.grid_share = x;
    else if (key == "inter") m.inter_fraction = x;
    else if (key == "branching") m.branching = as_count();
    else if (key == "tree_depth") m.tree_depth = as_count();
    else if (key == "cycle_len" || key == "cycle-length") m.cycle_length = as_count();
    else if (key == "grid_side") m.grid_side = as_count();
    else throw SpecError("unknown mix key '" + key + "'");
  }
  return m;
}

/// Splits `nodes` across substructure kinds by share and tiles each budget
/// with fixed-size pieces; the last piece of each kind absorbs the remainder.
inline SyntheticSpec spec_from_mix(std::size_t nodes, const MixOptions& m, std::uint64_t seed, std::size_t feature_dim = 32) {
  if (m.branching < 1) throw SpecError("branching must be >= 1");
  if (m.cycle_length < 3) throw SpecError("cycle length must be >= 3, got " + std::to_string(m.cycle_length));
  if (m.grid_side < 1) throw SpecError("grid side must be >= 1");
  const double total = m.tree_share + m.cycle_share + m.grid_share;
  if (!(total > 0.0)) throw SpecError("mix must request at least one of tree, cycle, grid");
  if (nodes < 3) throw SpecError("need at least 3 nodes");

  SyntheticSpec spec;
  spec.seed = seed;
  spec.feature_dim = feature_dim;
  std::size_t tree_nodes = static_cast<std::size_t>(std::llround(nodes * m.tree_share / total));
  std::size_t cycle_nodes = static_cast<std::size_t>(std::llround(nodes * m.cycle_share / total));
  tree_nodes = std::min(tree_nodes, nodes);
  cycle_nodes = std::min(cycle_nodes, nodes - tree_nodes);
  std::size_t grid_nodes = nodes - tree_nodes - cycle_nodes;
  if (m.grid_share == 0.0 && grid_nodes > 0) {
    // rounding leftovers go to whichever kind was requested
    if (m.cycle_share > 0.0) cycle_nodes += grid_nodes;
    else tree_nodes += grid_nodes;
    grid_nodes = 0;
  }

  const std::size_t tree_size = TreeSpec::complete(m.branching, m.tree_depth).nodes;
  for (std::size_t left = tree_nodes; left > 0;) {
    const std::size_t take = left >= 2 * tree_size ? tree_size : left;
    spec.trees.push_back({m.branching, take});
    left -= take;
  }
  if (cycle_nodes > 0 && cycle_nodes < 3) {
    if (!spec.trees.empty()) spec.trees.back().nodes += cycle_nodes;
    else throw SpecError("cycle share too small for a 3-cycle");
    cycle_nodes = 0;
  }
  for (std::size_t left = cycle_nodes; left > 0;) {
    const std::size_t take = left >= 2 * m.cycle_length ? m.cycle_length : left;
    spec.cycles.push_back({take});
    left -= take;
  }
  const std::size_t grid_size = m.grid_side * m.grid_side;
  for (std::size_t left = grid_nodes; left > 0;) {
    if (left >= grid_size) {
      spec.grids.push_back({m.grid_side, m.grid_side});
      left -= grid_size;
    } else {
      spec.grids.push_back({1, left});
      left = 0;
    }
  }
  spec.inter_edges = static_cast<std::size_t>(std::llround(m.inter_fraction * static_cast<double>(nodes)));
  return spec;
}

}  // namespace graphmore

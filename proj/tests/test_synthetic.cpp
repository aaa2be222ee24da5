#include <gtest/gtest.h>

#include "graphmore/synthetic.hpp"
#include "support/oracles.hpp"

using namespace graphmore;

namespace {

SyntheticSpec tree_cycle_spec() {
  SyntheticSpec s;
  s.trees.push_back(TreeSpec::complete(2, 3));
  s.cycles.push_back({12});
  s.inter_edges = 4;
  s.seed = 7;
  return s;
}

}  // namespace

TEST(Generator, EdgeCountIsAnalytic) {
  const auto spec = tree_cycle_spec();
  ASSERT_EQ(spec.total_nodes(), 27u);
  Graph g = generate_heterogeneous(spec);
  EXPECT_EQ(g.n_nodes(), 27u);
  EXPECT_EQ(g.n_edges(), 14u + 12u + 4u);
}

TEST(Generator, Deterministic) {
  Graph a = generate_heterogeneous(tree_cycle_spec());
  Graph b = generate_heterogeneous(tree_cycle_spec());
  EXPECT_EQ(a.edges(), b.edges());
  EXPECT_EQ(a.features()->data, b.features()->data);
}

TEST(Generator, NoInterEdgesKeepsComponents) {
  auto spec = tree_cycle_spec();
  spec.inter_edges = 0;
  std::size_t n = 0;
  connected_components(generate_heterogeneous(spec), &n);
  EXPECT_EQ(n, 2u);
}

TEST(Generator, ShortCycleRejected) {
  SyntheticSpec s;
  s.cycles.push_back({2});
  EXPECT_THROW(generate_heterogeneous(s), SpecError);
}

TEST(Generator, FeaturesHaveStructuralChannels) {
  auto spec = tree_cycle_spec();
  spec.feature_smoothing = 0;
  Graph g = generate_heterogeneous(spec);
  const Matrix& x = *g.features();
  EXPECT_EQ(x.cols, 32u);
  double maxdeg = 0.0, maxcore = 0.0;
  for (NodeId v = 0; v < g.n_nodes(); ++v) {
    maxdeg = std::max(maxdeg, x(v, 0));
    maxcore = std::max(maxcore, x(v, 1));
  }
  EXPECT_DOUBLE_EQ(maxdeg, 1.0);
  EXPECT_DOUBLE_EQ(maxcore, 1.0);
}

TEST(Generator, SmoothingMakesNeighboursSimilar) {
  auto raw_spec = tree_cycle_spec();
  raw_spec.feature_smoothing = 0;
  Graph raw = generate_heterogeneous(raw_spec);
  Graph smooth = generate_heterogeneous(tree_cycle_spec());
  auto edge_gap = [](const Graph& g) {
    const Matrix& x = *g.features();
    double s = 0.0;
    for (auto [u, v] : g.edges())
      for (std::size_t c = 2; c < x.cols; ++c) s += (x(u, c) - x(v, c)) * (x(u, c) - x(v, c));
    return s;
  };
  EXPECT_LT(edge_gap(smooth), 0.5 * edge_gap(raw));
  // structural channels untouched
  for (NodeId v = 0; v < raw.n_nodes(); ++v) EXPECT_EQ((*raw.features())(v, 0), (*smooth.features())(v, 0));
}

TEST(Mix, ParseAndBuild) {
  auto m = parse_mix("tree:0.5,cycle:0.4,inter:0.1");
  EXPECT_DOUBLE_EQ(m.tree_share, 0.5);
  EXPECT_DOUBLE_EQ(m.inter_fraction, 0.1);
  auto spec = spec_from_mix(400, m, 7);
  EXPECT_EQ(spec.total_nodes(), 400u);
  EXPECT_EQ(spec.inter_edges, 40u);
  EXPECT_NO_THROW(generate_heterogeneous(spec));
}

TEST(Mix, Errors) {
  EXPECT_THROW(parse_mix("tree"), SpecError);
  EXPECT_THROW(parse_mix("tree:abc"), SpecError);
  EXPECT_THROW(parse_mix("blob:0.1"), SpecError);
  EXPECT_THROW(spec_from_mix(100, parse_mix("cycle:1,cycle-length:2"), 0), SpecError);
  EXPECT_THROW(spec_from_mix(100, parse_mix("inter:0.1"), 0), SpecError);
}

TEST(Mix, ManifestMentionsSeed) {
  auto spec = spec_from_mix(100, parse_mix("tree:1"), 42);
  EXPECT_NE(spec.manifest().find("seed 42"), std::string::npos);
}

#include <gtest/gtest.h>

#include "graphmore/curvature.hpp"
#include "graphmore/synthetic.hpp"
#include "support/oracles.hpp"

using namespace graphmore;

TEST(Sectional, TriangleIsQuarter) {
  Graph k3 = oracle::cycle(3);
  EXPECT_DOUBLE_EQ(sectional_curvature(k3, 0, 1, 2), 0.25);
  EXPECT_DOUBLE_EQ(sectional_curvature(k3, 2, 0, 1), 0.25);
}

TEST(Sectional, ThreeLeafStarIsMinusHalf) {
  Graph s = oracle::star(3);
  EXPECT_DOUBLE_EQ(sectional_curvature(s, 0, 1, 2), -0.5);
}

TEST(Sectional, RejectsNonNeighbours) {
  Graph p = oracle::path(4);
  EXPECT_THROW(sectional_curvature(p, 1, 0, 3), UsageError);
  EXPECT_THROW(sectional_curvature(p, 1, 0, 0), UsageError);
}

TEST(Sectional, MatchesOracleOnTreeExactly) {
  // 20-node balanced binary tree, heap layout
  std::vector<Edge> e;
  for (NodeId i = 1; i < 20; ++i) e.emplace_back((i - 1) / 2, i);
  Graph t = Graph::from_edges(20, e);
  auto fw = oracle::floyd_warshall(t);
  const double v = sectional_curvature(t, 1, 3, 4);
  EXPECT_LT(v, 0.0);
  EXPECT_EQ(v, oracle::sectional_curvature(fw, 1, 3, 4));
}

TEST(Sectional, MatchesOracleOnRandomGraphsExactly) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    Graph g = oracle::random_graph(30, 0.1, seed + 100);
    auto fw = oracle::floyd_warshall(g);
    BfsCache cache(g);
    for (NodeId m = 0; m < g.n_nodes(); ++m) {
      const auto& nb = g.neighbors(m);
      for (std::size_t i = 0; i < nb.size(); ++i)
        for (std::size_t j = i + 1; j < nb.size(); ++j) {
          const double ref = oracle::sectional_curvature(fw, m, nb[i], nb[j]);
          ASSERT_EQ(sectional_curvature(g, m, nb[i], nb[j]), ref);
          ASSERT_EQ(sectional_curvature(cache, g, m, nb[i], nb[j]), ref);
        }
    }
  }
}

TEST(Histogram, CycleIsNonnegative) {
  auto h = curvature_histogram(oracle::cycle(20));
  ASSERT_FALSE(h.empty);
  EXPECT_TRUE(h.exhaustive);
  for (double v : h.values) EXPECT_GE(v, 0.0);
  EXPECT_DOUBLE_EQ(h.fraction_nonnegative, 1.0);
}

TEST(Histogram, BinaryTreeMeanNegative) {
  auto h = curvature_histogram(oracle::binary_tree(5));
  EXPECT_LT(h.mean, 0.0);
  EXPECT_GT(h.fraction_negative, 0.5);
}

TEST(Histogram, MixedHasBothSigns) {
  SyntheticSpec spec;
  spec.trees.push_back(TreeSpec::complete(2, 3));
  spec.cycles.push_back({12});
  spec.inter_edges = 4;
  spec.seed = 7;
  auto h = curvature_histogram(generate_heterogeneous(spec));
  EXPECT_GT(h.fraction_negative, 0.0);
  EXPECT_GT(h.fraction_nonnegative, 0.0);
}

TEST(Histogram, NoTrianglesIsFlaggedEmpty) {
  auto h = curvature_histogram(Graph::from_edges(4, {{0, 1}, {2, 3}}));
  EXPECT_TRUE(h.empty);
  EXPECT_TRUE(h.values.empty());
}

TEST(Histogram, SampledModeIsSeeded) {
  Graph g = oracle::random_graph(60, 0.2, 5);
  auto a = curvature_histogram(g, 50, 3);
  auto b = curvature_histogram(g, 50, 3);
  EXPECT_FALSE(a.exhaustive);
  EXPECT_EQ(a.values.size(), 50u);
  EXPECT_EQ(a.values, b.values);
}

TEST(Histogram, BinsCoverAllValues) {
  auto bins = bin_values({-1.0, 0.0, 0.5, 2.0}, 4);
  std::size_t total = 0;
  for (auto& b : bins) total += b.count;
  EXPECT_EQ(total, 4u);
  EXPECT_DOUBLE_EQ(bins.front().left, -1.0);
  EXPECT_DOUBLE_EQ(bins.back().right, 2.0);
}

#include <gtest/gtest.h>

#include <random>

#include "graphmore/metrics.hpp"
#include "support/oracles.hpp"

using namespace graphmore;

TEST(Auc, Examples) {
  std::vector<double> s{0.9, 0.8, 0.3};
  std::vector<int> y{1, 0, 1};
  EXPECT_DOUBLE_EQ(auc(s, y), 0.5);
  std::vector<double> perfect{0.9, 0.8, 0.1, 0.0};
  std::vector<int> py{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(auc(perfect, py), 1.0);
  std::vector<double> tied(4, 0.3);
  EXPECT_DOUBLE_EQ(auc(tied, py), 0.5);
}

TEST(Auc, SingleClassThrows) {
  std::vector<double> s{0.1, 0.2};
  std::vector<int> y{1, 1};
  EXPECT_THROW(auc(s, y), MetricError);
}

TEST(Auc, RandomScoresNearHalf) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(10000);
  std::vector<int> y(10000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    y[i] = static_cast<int>(i % 2);
  }
  EXPECT_NEAR(auc(s, y), 0.5, 0.02);
}

TEST(AveragePrecision, Examples) {
  std::vector<double> s{0.9, 0.8, 0.3};
  std::vector<int> y{1, 0, 1};
  EXPECT_DOUBLE_EQ(average_precision(s, y), 5.0 / 6.0);
  std::vector<double> one{0.4};
  std::vector<int> oy{1};
  EXPECT_DOUBLE_EQ(average_precision(one, oy), 1.0);
}

class RankOracle : public ::testing::TestWithParam<int> {};

TEST_P(RankOracle, MatchesBruteForce) {
  std::mt19937_64 rng(GetParam());
  std::uniform_int_distribution<int> len(2, 1000), coarse(0, 20), bit(0, 1);
  const int n = len(rng);
  std::vector<double> s(n);
  std::vector<int> y(n);
  // coarse scores so ties occur
  for (int i = 0; i < n; ++i) {
    s[i] = coarse(rng) / 20.0;
    y[i] = bit(rng);
  }
  y[0] = 1;
  y[1] = 0;
  EXPECT_NEAR(auc(s, y), oracle::auc(s, y), 1e-12);
  // AP is tie-order dependent; compare on distinct scores
  for (int i = 0; i < n; ++i) s[i] += i * 1e-9;
  EXPECT_NEAR(average_precision(s, y), oracle::average_precision(s, y), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Seeds, RankOracle, ::testing::Range(0, 25));

TEST(F1, Examples) {
  std::vector<int> p{0, 0, 1, 1}, y{0, 1, 1, 1};
  auto f = f1_scores(p, y);
  EXPECT_NEAR(f.macro, 11.0 / 15.0, 1e-12);
  EXPECT_NEAR(f.weighted, (2.0 / 3.0 + 3 * 0.8) / 4.0, 1e-12);
  EXPECT_NEAR(f.micro, 0.75, 1e-12);
  auto perfect = f1_scores(y, y);
  EXPECT_DOUBLE_EQ(perfect.macro, 1.0);
  EXPECT_DOUBLE_EQ(perfect.weighted, 1.0);
}

TEST(F1, BalancedOneClassWrong) {
  std::vector<int> p{0, 0, 0, 0}, y{0, 0, 1, 1};
  auto f = f1_scores(p, y);
  EXPECT_NEAR(f.macro, f.weighted, 1e-12);
}

namespace {

std::vector<std::vector<std::uint32_t>> hops(const Graph& g) { return oracle::floyd_warshall(g); }

PairDistanceFn scaled(const std::vector<std::vector<std::uint32_t>>& d, double factor) {
  return [&d, factor](std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double h = factor * d[a[i]][b[i]];
      out[i] = h * h;
    }
    return out;
  };
}

}  // namespace

TEST(Distortion, IdentityAndDoubling) {
  Graph g = oracle::random_graph(25, 0.2, 3);
  auto d = hops(g);
  EXPECT_NEAR(average_distortion(g, scaled(d, 1.0), PairMode::full).mean, 0.0, 1e-15);
  EXPECT_NEAR(average_distortion(g, scaled(d, 2.0), PairMode::full).mean, 3.0, 1e-12);
}

TEST(Distortion, SampledWithinThreeStandardErrors) {
  Graph g = oracle::random_graph(30, 0.15, 8);
  auto d = hops(g);
  std::mt19937_64 rng(1);
  std::vector<double> noise(900);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& v : noise) v = u(rng);
  PairDistanceFn fn = [&](std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double h = d[a[i]][b[i]] * noise[std::min(a[i], b[i]) * 30 + std::max(a[i], b[i])];
      out[i] = h * h;
    }
    return out;
  };
  auto full = average_distortion(g, fn, PairMode::full);
  auto sampled = average_distortion(g, fn, PairMode::sampled, 20000, 4);
  ASSERT_GT(sampled.std_error, 0.0);
  EXPECT_LE(std::abs(full.mean - sampled.mean), 3.0 * sampled.std_error);
}

TEST(Distortion, PermutationInvariant) {
  Graph g = oracle::random_graph(20, 0.2, 9);
  std::vector<NodeId> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(2);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::pair<NodeId, NodeId>> e2;
  for (auto [u, v] : g.edges()) e2.emplace_back(perm[u], perm[v]);
  Graph h = Graph::from_edges(20, e2);
  auto dg = hops(g), dh = hops(h);
  // distance depends only on the pair's identity in g
  auto fn_g = [&](std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1.0 + 0.3 * (a[i] + b[i]) + dg[a[i]][b[i]];
    return out;
  };
  std::vector<NodeId> inv(20);
  for (NodeId i = 0; i < 20; ++i) inv[perm[i]] = i;
  auto fn_h = [&](std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1.0 + 0.3 * (inv[a[i]] + inv[b[i]]) + dh[a[i]][b[i]];
    return out;
  };
  EXPECT_NEAR(average_distortion(g, fn_g, PairMode::full).mean, average_distortion(h, fn_h, PairMode::full).mean,
              1e-12);
}

TEST(Distortion, DisconnectedFlag) {
  Graph g = Graph::from_edges(4, {{0, 1}, {2, 3}});
  auto d = hops(g);
  auto r = average_distortion(g, scaled(d, 1.0), PairMode::full);
  EXPECT_TRUE(r.disconnected);
  EXPECT_EQ(r.pairs, 4u);
}

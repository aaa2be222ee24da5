#include <gtest/gtest.h>

#include <cmath>

#include "graphmore/mixture.hpp"

using namespace graphmore;

TEST(Align, UniformStaysUniform) {
  std::vector<double> w(5, 0.2);
  auto a = mixture::align_weights(w, w);
  for (double v : a) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Align, OneHotIsNotPreserved) {
  std::vector<double> w{1, 0, 0, 0, 0};
  auto a = mixture::align_weights(w, w);
  const double z = std::exp(1.0) + 4.0;
  EXPECT_NEAR(a[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(a[0], 0.4046, 1e-4);
  EXPECT_NEAR(a[1], 0.1488, 1e-4);
}

TEST(Align, Symmetric) {
  std::vector<double> u{0.1, 0.6, 0.3}, v{0.5, 0.2, 0.3};
  EXPECT_EQ(mixture::align_weights(u, v), mixture::align_weights(v, u));
}

TEST(Align, TemperatureSharpens) {
  std::vector<double> u{0.8, 0.1, 0.1};
  auto soft = mixture::align_weights(u, u, 1.0);
  auto sharp = mixture::align_weights(u, u, 0.1);
  EXPECT_GT(sharp[0], soft[0]);
}

TEST(Combine, Arithmetic) {
  EXPECT_DOUBLE_EQ(mixture::combine_distances(std::vector<double>{0.25, 0.75}, std::vector<double>{1.0, 4.0}), 3.25);
  EXPECT_DOUBLE_EQ(mixture::combine_distances(std::vector<double>{0, 1, 0}, std::vector<double>{7, 9, 11}), 9.0);
}

TEST(Decoder, Examples) {
  FermiDirac fd;
  EXPECT_DOUBLE_EQ(mixture::edge_probability(2.0, fd), 0.5);
  EXPECT_LT(mixture::edge_probability(1e3, fd), 1e-300 + 1e-12);
  EXPECT_NEAR(mixture::edge_probability(0.0, fd), 1.0 / (std::exp(-2.0) + 1.0), 1e-15);
  EXPECT_NEAR(mixture::edge_probability(0.0, fd), 0.8808, 1e-4);
}

TEST(Mix, SingleExpertFullWeightIsIdentity) {
  Tape t;
  Matrix z(2, 2, std::vector<double>{0.1, 0.2, -0.3, 0.05});
  Var out = t.constant(z);
  auto seg = mixture::mix_embeddings({out}, {t.constant(-1.0)}, t.constant(Matrix(2, 1, 1.0)));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(seg[0].value().data[i], z.data[i], 1e-14);
}

TEST(Mix, EuclideanIsPlainScaling) {
  Tape t;
  Matrix z(1, 2, std::vector<double>{1.5, -2.0});
  auto seg = mixture::mix_embeddings({t.constant(z)}, {t.constant(0.0)}, t.constant(Matrix(1, 1, 0.3)));
  EXPECT_NEAR(seg[0].value().data[0], 0.45, 1e-15);
  EXPECT_NEAR(seg[0].value().data[1], -0.6, 1e-15);
}

TEST(Mix, HyperbolicHalfWeight) {
  Tape t;
  auto seg = mixture::mix_embeddings({t.constant(Matrix::row({std::tanh(0.5), 0.0}))}, {t.constant(-1.0)},
                                     t.constant(Matrix(1, 1, 0.5)));
  EXPECT_NEAR(seg[0].value().data[0], std::tanh(0.25), 1e-12);
  EXPECT_NEAR(seg[0].value().data[0], 0.2449, 1e-4);
}

TEST(PairDistance, OneHotSelectsExpert) {
  Tape t;
  Var z0 = t.constant(Matrix(2, 2, std::vector<double>{0, 0, 0.3, 0.4}));
  Var z1 = t.constant(Matrix(2, 2, std::vector<double>{0, 0, 0.1, 0.0}));
  std::vector<std::size_t> f{0}, s{1};
  Var a = t.constant(Matrix::row({0.0, 1.0}));
  Var d2 = mixture::pairwise_distance_sq({z0, z1}, {t.constant(0.0), t.constant(-1.0)}, a, f, s);
  const double d = manifold::dist(std::vector<double>{0, 0}, std::vector<double>{0.1, 0}, ManifoldSpace{-1.0});
  EXPECT_NEAR(d2.item(), d * d, 1e-14);
}

TEST(PairDistance, CoincidentIsZero) {
  Tape t;
  Var z = t.constant(Matrix(2, 2, std::vector<double>{0.2, 0.1, 0.2, 0.1}));
  std::vector<std::size_t> f{0}, s{1};
  Var a = t.constant(Matrix::row({0.5, 0.5}));
  Var d2 = mixture::pairwise_distance_sq({z, z}, {t.constant(-1.0), t.constant(1.0)}, a, f, s);
  EXPECT_NEAR(d2.item(), 0.0, 1e-15);
}

TEST(Snapshot, MatchesTape) {
  Tape t;
  Matrix z0(3, 2, std::vector<double>{0.1, 0.2, -0.3, 0.1, 0.0, 0.4});
  Matrix z1(3, 2, std::vector<double>{0.5, 0.2, -0.1, 0.3, 0.2, -0.4});
  Matrix w(3, 2, std::vector<double>{0.7, 0.3, 0.4, 0.6, 0.5, 0.5});
  std::vector<std::size_t> f{0, 1}, s{1, 2};
  Var wv = t.constant(w);
  Var d2 = mixture::pairwise_distance_sq({t.constant(z0), t.constant(z1)}, {t.constant(-1.0), t.constant(1.0)},
                                         mixture::align_weights(wv, f, s), f, s);
  mixture::EmbeddingSnapshot snap{{z0, z1}, {{-1.0}, {1.0}}, w, 1.0};
  for (std::size_t p = 0; p < 2; ++p) EXPECT_NEAR(d2.value().data[p], snap.distance_sq(f[p], s[p]), 1e-12);
}

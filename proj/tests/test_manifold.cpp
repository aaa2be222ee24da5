#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "graphmore/manifold.hpp"

using namespace graphmore;
using namespace graphmore::manifold;

namespace {

const std::vector<double> kCurvatures{-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0};
constexpr int kCases = 1000;

std::vector<double> random_direction(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(d);
  for (auto& x : v) x = n(rng);
  const double s = norm(v);
  for (auto& x : v) x /= s;
  return v;
}

// Tangent vector with norm drawn so that exp0 stays well inside the domain.
std::vector<double> random_tangent(std::mt19937_64& rng, std::size_t d, double kappa) {
  double max_t = 4.0;
  if (kappa < 0.0) max_t = 2.0 / std::sqrt(-kappa);
  if (kappa > 0.0) max_t = 0.9 * ManifoldSpace{kappa}.max_tangent_norm();
  std::uniform_real_distribution<double> u(0.0, max_t);
  auto v = random_direction(rng, d);
  const double t = u(rng);
  for (auto& x : v) x *= t;
  return v;
}

std::vector<double> random_point(std::mt19937_64& rng, std::size_t d, double kappa) {
  return exp0(random_tangent(rng, d, kappa), ManifoldSpace{kappa});
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
  return diff / std::max(1.0, norm(b));
}

}  // namespace

TEST(Mobius, EuclideanLimit) {
  auto r = mobius_add(std::vector<double>{0.1, 0.2}, std::vector<double>{0.3, -0.1}, ManifoldSpace{0.0});
  EXPECT_NEAR(r[0], 0.4, 1e-15);
  EXPECT_NEAR(r[1], 0.1, 1e-15);
}

TEST(Mobius, CollinearHyperbolicAddition) {
  // relativistic velocity addition (a + b) / (1 + ab)
  auto r = mobius_add(std::vector<double>{0.5, 0.0}, std::vector<double>{0.5, 0.0}, ManifoldSpace{-1.0});
  EXPECT_NEAR(r[0], (0.5 + 0.5) / (1.0 + 0.25), 1e-15);
  EXPECT_EQ(r[1], 0.0);
}

TEST(Mobius, SingularThrows) {
  // for kappa = 1 the denominator is (1 - <x,y>)^2 on a line; y = x / |x|^2 zeroes it
  std::vector<double> x{1.0, 0.0}, y{1.0, 0.0};
  EXPECT_THROW(mobius_add(x, y, ManifoldSpace{1.0}), NumericalDomainError);
}

TEST(Mobius, IdentityAndInverse) {
  std::mt19937_64 rng(11);
  for (double k : kCurvatures) {
    const ManifoldSpace s{k};
    for (int i = 0; i < kCases; ++i) {
      auto x = random_point(rng, 4, k);
      std::vector<double> zero(4, 0.0), negx = x;
      for (auto& v : negx) v = -v;
      auto a = mobius_add(zero, x, s);
      auto b = mobius_add(negx, x, s);
      for (std::size_t j = 0; j < 4; ++j) {
        ASSERT_NEAR(a[j], x[j], 1e-12) << "kappa " << k;
        ASSERT_NEAR(b[j], 0.0, 1e-12) << "kappa " << k;
      }
    }
  }
}

TEST(ExpLog, Examples) {
  auto e = exp0(std::vector<double>{1.0, 2.0}, ManifoldSpace{0.0});
  EXPECT_DOUBLE_EQ(e[0], 1.0);
  EXPECT_DOUBLE_EQ(e[1], 2.0);
  auto h = exp0(std::vector<double>{0.5, 0.0}, ManifoldSpace{-1.0});
  EXPECT_NEAR(h[0], std::tanh(0.5), 1e-15);
  EXPECT_NEAR(h[0], 0.4621, 1e-4);
  auto z = exp0(std::vector<double>{0.0, 0.0}, ManifoldSpace{3.0});
  EXPECT_EQ(z[0], 0.0);
  auto l = log0(std::vector<double>{0.4621, 0.0}, ManifoldSpace{-1.0});
  EXPECT_NEAR(l[0], 0.5, 1e-4);
}

TEST(ExpLog, RoundTripProperty) {
  std::mt19937_64 rng(12);
  for (double k : kCurvatures) {
    const ManifoldSpace s{k};
    double worst = 0.0;
    for (int i = 0; i < kCases; ++i) {
      auto v = random_tangent(rng, 5, k);
      worst = std::max(worst, max_rel(log0(exp0(v, s), s), v));
    }
    EXPECT_LE(worst, 1e-9) << "kappa " << k;
  }
}

TEST(ExpLog, SphericalTangentClamp) {
  const ManifoldSpace s{1.0};
  auto y = exp0(std::vector<double>{10.0, 0.0}, s);
  EXPECT_TRUE(std::isfinite(y[0]));
  EXPECT_NEAR(y[0], std::tan(0.99 * std::numbers::pi / 2.0), 1e-9);
}

TEST(Distance, Examples) {
  EXPECT_NEAR(dist(std::vector<double>{0, 0}, std::vector<double>{0.5, 0}, ManifoldSpace{-1.0}), 2.0 * std::atanh(0.5),
              1e-14);
  EXPECT_NEAR(dist(std::vector<double>{0, 0}, std::vector<double>{0.5, 0}, ManifoldSpace{-1.0}), 1.09861, 1e-5);
  EXPECT_DOUBLE_EQ(dist(std::vector<double>{0, 0}, std::vector<double>{3, 4}, ManifoldSpace{0.0}), 10.0);
}

TEST(Distance, SelfDistanceZero) {
  std::mt19937_64 rng(13);
  for (double k : kCurvatures)
    for (int i = 0; i < 100; ++i) {
      auto x = random_point(rng, 3, k);
      EXPECT_NEAR(dist(x, x, ManifoldSpace{k}), 0.0, 1e-12);
    }
}

TEST(Distance, SymmetryAndTriangleInequality) {
  std::mt19937_64 rng(14);
  for (double k : kCurvatures) {
    const ManifoldSpace s{k};
    for (int i = 0; i < kCases; ++i) {
      auto x = random_point(rng, 3, k), y = random_point(rng, 3, k), z = random_point(rng, 3, k);
      const double xy = dist(x, y, s), yz = dist(y, z, s), xz = dist(x, z, s);
      ASSERT_NEAR(xy, dist(y, x, s), 1e-9 * std::max(1.0, xy));
      ASSERT_LE(xz, xy + yz + 1e-9) << "kappa " << k;
    }
  }
}

TEST(Distance, ContinuityAtZeroCurvature) {
  std::mt19937_64 rng(15);
  for (int i = 0; i < kCases; ++i) {
    auto x = random_point(rng, 3, 0.0), y = random_point(rng, 3, 0.0);
    for (auto& v : x) v *= 0.25;
    for (auto& v : y) v *= 0.25;
    const double d0 = dist(x, y, ManifoldSpace{0.0});
    for (double k : {-1e-7, 1e-7}) ASSERT_NEAR(dist(x, y, ManifoldSpace{k}), d0, 1e-4);
    for (double k : {-1e-7, 1e-7}) {
      auto e = exp0(x, ManifoldSpace{k});
      ASSERT_LE(max_rel(e, x), 1e-4);
    }
  }
}

TEST(Distance, TapeMatchesLiteralMobius) {
  std::mt19937_64 rng(16);
  for (double k : kCurvatures) {
    Tape t;
    Matrix z(20, 3);
    for (std::size_t r = 0; r < 20; ++r) {
      auto p = random_point(rng, 3, k);
      std::copy(p.begin(), p.end(), z.row_span(r).begin());
    }
    std::vector<std::size_t> a, b;
    for (std::size_t r = 0; r + 1 < 20; ++r) {
      a.push_back(r);
      b.push_back(r + 1);
    }
    Var zv = t.constant(z);
    Var d2 = tape::dist_sq_pairs(zv, a, b, t.constant(k));
    for (std::size_t p = 0; p < a.size(); ++p) {
      const double ref = dist(z.row_span(a[p]), z.row_span(b[p]), ManifoldSpace{k});
      EXPECT_NEAR(d2.value().data[p], ref * ref, 1e-9 * std::max(1.0, ref * ref)) << "kappa " << k;
    }
  }
}

TEST(KappaScale, Examples) {
  std::mt19937_64 rng(17);
  for (double k : kCurvatures) {
    auto x = random_point(rng, 3, k);
    auto same = kappa_scale(1.0, x, ManifoldSpace{k});
    EXPECT_LE(max_rel(same, x), 1e-12);
    auto zero = kappa_scale(0.0, x, ManifoldSpace{k});
    EXPECT_LE(norm(zero), 1e-15);
  }
  auto h = kappa_scale(0.5, std::vector<double>{std::tanh(0.5), 0.0}, ManifoldSpace{-1.0});
  EXPECT_NEAR(h[0], std::tanh(0.25), 1e-12);
  EXPECT_NEAR(h[0], 0.2449, 1e-4);
}

TEST(Project, Examples) {
  auto a = project_to_domain(std::vector<double>{2.0, 0.0}, ManifoldSpace{-1.0});
  EXPECT_NEAR(a[0], 1.0 - 1e-5, 1e-15);
  auto b = project_to_domain(std::vector<double>{2.0, 0.0}, ManifoldSpace{0.0});
  EXPECT_EQ(b[0], 2.0);
  auto c = project_to_domain(std::vector<double>{0.3, 0.0}, ManifoldSpace{-1.0});
  EXPECT_EQ(c[0], 0.3);
}

TEST(Project, LogNearBoundaryIsFinite) {
  auto l = log0(std::vector<double>{1.0, 0.0}, ManifoldSpace{-1.0});
  EXPECT_TRUE(std::isfinite(l[0]));
}

TEST(Domain, HyperbolicExpStaysInBall) {
  std::mt19937_64 rng(18);
  for (double k : {-3.0, -1.0, -0.5}) {
    for (int i = 0; i < 200; ++i) {
      auto v = random_direction(rng, 4);
      for (auto& x : v) x *= 50.0;
      EXPECT_LE(norm(exp0(v, ManifoldSpace{k})), ManifoldSpace{k}.max_norm() + 1e-15);
    }
  }
}

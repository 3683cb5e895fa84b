#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "porobeam/sampling.hpp"

namespace pb = porobeam;
namespace ps = porobeam::sampling;
using ps::Domain2D;
using ps::Method;

TEST(RadicalInverse, Base2FirstValues) {
  EXPECT_DOUBLE_EQ(ps::radical_inverse(1, 2), 0.5);
  EXPECT_DOUBLE_EQ(ps::radical_inverse(2, 2), 0.25);
  EXPECT_DOUBLE_EQ(ps::radical_inverse(3, 2), 0.75);
}

TEST(Grid, FourPointsOnUnitSquare) {
  ps::PointSet set = ps::generate(Method::grid, 4, {0, 1, 0, 1}, 0);
  ASSERT_EQ(set.size(), 4u);
  std::set<std::pair<double, double>> got;
  for (auto& p : set.points) got.insert({p[0], p[1]});
  std::set<std::pair<double, double>> want{{0.25, 0.25}, {0.25, 0.75}, {0.75, 0.25}, {0.75, 0.75}};
  EXPECT_EQ(got, want);
}

TEST(Grid, AspectAwareFactorization) {
  // 4:1 domain, n = 400 -> 40 x 10
  ps::PointSet set = ps::generate(Method::grid, 400, {0, 8, 0, 2}, 0);
  EXPECT_EQ(set.size(), 400u);
  std::set<double> xs, zs;
  for (auto& p : set.points) {
    xs.insert(p[0]);
    zs.insert(p[1]);
  }
  EXPECT_EQ(xs.size(), 40u);
  EXPECT_EQ(zs.size(), 10u);
}

TEST(Lhs, OnePointPerBin) {
  const std::size_t n = 100;
  ps::PointSet set = ps::generate(Method::lhs, n, {0, 1, 0, 1}, 99);
  ASSERT_EQ(set.size(), n);
  std::vector<int> binx(n, 0), binz(n, 0);
  for (auto& p : set.points) {
    binx[static_cast<std::size_t>(p[0] * n)]++;
    binz[static_cast<std::size_t>(p[1] * n)]++;
  }
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_EQ(binx[k], 1);
    EXPECT_EQ(binz[k], 1);
  }
}

TEST(Sobol, FirstPointsOfTheBase2Sequence) {
  ps::PointSet set = ps::generate(Method::sobol, 3, {0, 1, 0, 1}, 0);
  ASSERT_EQ(set.size(), 3u);
  EXPECT_DOUBLE_EQ(set.points[0][0], 0.5);
  EXPECT_DOUBLE_EQ(set.points[0][1], 0.5);
  EXPECT_DOUBLE_EQ(set.points[1][0], 0.75);
  EXPECT_DOUBLE_EQ(set.points[1][1], 0.25);
  EXPECT_DOUBLE_EQ(set.points[2][0], 0.25);
  EXPECT_DOUBLE_EQ(set.points[2][1], 0.75);
}

TEST(Generate, DeterminismAndSeedHandling) {
  const Domain2D dom{0, 8, -1, 1};
  for (Method m : {Method::grid, Method::quadrature, Method::halton, Method::hammersley,
                   Method::sobol}) {
    ps::PointSet a = ps::generate(m, 200, dom, 1);
    ps::PointSet b = ps::generate(m, 200, dom, 12345);  // deterministic methods ignore the seed
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a.points[i][0], b.points[i][0]);
      EXPECT_EQ(a.points[i][1], b.points[i][1]);
    }
  }
  ps::PointSet l1 = ps::generate(Method::lhs, 200, dom, 7);
  ps::PointSet l2 = ps::generate(Method::lhs, 200, dom, 7);
  ps::PointSet l3 = ps::generate(Method::lhs, 200, dom, 8);
  EXPECT_EQ(l1.points, l2.points);
  EXPECT_NE(l1.points, l3.points);
}

TEST(Generate, PointsStrictlyInsideDomain) {
  const Domain2D dom{0, 8, -1, 1};
  for (Method m : {Method::grid, Method::quadrature, Method::lhs, Method::halton,
                   Method::hammersley, Method::sobol}) {
    ps::PointSet set = ps::generate(m, 237, dom, 3);
    for (auto& p : set.points) {
      EXPECT_GT(p[0], dom.x0);
      EXPECT_LT(p[0], dom.x1);
      EXPECT_GT(p[1], dom.z0);
      EXPECT_LT(p[1], dom.z1);
    }
  }
}

TEST(Generate, QuadrantCoverage) {
  const Domain2D dom{0, 8, -1, 1};
  const std::size_t n = 400;
  for (Method m : {Method::grid, Method::quadrature, Method::lhs, Method::halton,
                   Method::hammersley, Method::sobol}) {
    ps::PointSet set = ps::generate(m, n, dom, 5);
    std::array<std::size_t, 4> quad{0, 0, 0, 0};
    const double mx = 0.5 * (dom.x0 + dom.x1), mz = 0.5 * (dom.z0 + dom.z1);
    for (auto& p : set.points) quad[(p[0] > mx ? 1 : 0) + (p[1] > mz ? 2 : 0)]++;
    for (std::size_t q : quad) EXPECT_GE(q, set.size() / 8) << ps::to_string(m);
  }
}

TEST(GaussLegendre, LowOrderClosedForms) {
  auto [x1, w1] = ps::gauss_legendre_1d(1);
  EXPECT_DOUBLE_EQ(x1[0], 0.0);
  EXPECT_DOUBLE_EQ(w1[0], 2.0);

  auto [x2, w2] = ps::gauss_legendre_1d(2);
  EXPECT_NEAR(x2[0], -1.0 / std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(x2[1], 1.0 / std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(w2[0], 1.0, 1e-14);
  EXPECT_NEAR(w2[1], 1.0, 1e-14);

  // degree-7 exactness at n = 4: integral of x^6 over [-1,1] is 2/7
  auto [x4, w4] = ps::gauss_legendre_1d(4);
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) s += w4[i] * std::pow(x4[i], 6);
  EXPECT_NEAR(s, 2.0 / 7.0, 1e-14);

  for (std::size_t n : {3u, 8u, 17u, 64u}) {
    auto [x, w] = ps::gauss_legendre_1d(n);
    double sum = 0.0;
    for (double v : w) sum += v;
    EXPECT_NEAR(sum, 2.0, 1e-13);
  }
  EXPECT_THROW(ps::gauss_legendre_1d(0), pb::Error);
  EXPECT_THROW(ps::gauss_legendre_1d(65), pb::Error);
}

TEST(TensorQuadrature, BasicsAndExactness) {
  ps::PointSet one = ps::tensor_quadrature({0, 1, 0, 1}, 1, 1, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one.points[0][0], 0.5);
  EXPECT_DOUBLE_EQ(one.points[0][1], 0.5);
  EXPECT_DOUBLE_EQ(one.weights[0], 1.0);

  // weights sum to the domain area
  const Domain2D dom{0, 8, -1, 1};
  for (std::size_t n : {1u, 2u, 4u}) {
    ps::PointSet q = ps::tensor_quadrature(dom, 3, 2, n);
    double sum = 0.0;
    for (double w : q.weights) sum += w;
    EXPECT_NEAR(sum, dom.area(), 1e-12 * dom.area());
  }

  // integral of x z over the unit square = 1/4
  ps::PointSet q = ps::tensor_quadrature({0, 1, 0, 1}, 2, 2, 2);
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * q.points[i][0] * q.points[i][1];
  EXPECT_NEAR(s, 0.25, 1e-14);
}

TEST(TensorQuadrature, PolynomialExactnessToDegree2nMinus1) {
  pb::Rng rng(41);
  const Domain2D dom{-0.5, 1.5, 0.25, 2.0};
  for (std::size_t n : {2u, 3u, 4u}) {
    const std::size_t deg = 2 * n - 1;
    std::vector<double> cx(deg + 1), cz(deg + 1);
    for (auto& c : cx) c = rng.uniform(-1, 1);
    for (auto& c : cz) c = rng.uniform(-1, 1);
    auto poly = [&](double t, const std::vector<double>& c) {
      double acc = 0.0, p = 1.0;
      for (double ck : c) {
        acc += ck * p;
        p *= t;
      }
      return acc;
    };
    auto antideriv_integral = [&](const std::vector<double>& c, double a, double b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k)
        acc += c[k] / static_cast<double>(k + 1) *
               (std::pow(b, static_cast<double>(k + 1)) - std::pow(a, static_cast<double>(k + 1)));
      return acc;
    };
    const double exact = antideriv_integral(cx, dom.x0, dom.x1) * antideriv_integral(cz, dom.z0, dom.z1);
    ps::PointSet q = ps::tensor_quadrature(dom, 3, 2, n);
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      s += q.weights[i] * poly(q.points[i][0], cx) * poly(q.points[i][1], cz);
    EXPECT_NEAR(s, exact, 1e-13 * std::max(1.0, std::abs(exact)));
  }
}

TEST(Generate, QuadratureSetCarriesWeightsSummingToArea) {
  const Domain2D dom{0, 8, 0, 2};
  ps::PointSet set = ps::generate(Method::quadrature, 400, dom, 0);
  ASSERT_FALSE(set.weights.empty());
  double sum = 0.0;
  for (double w : set.weights) sum += w;
  EXPECT_NEAR(sum, dom.area(), 1e-12 * dom.area());
  // 4x4 points per cell, cells chosen near n/16 with the aspect rule
  EXPECT_EQ(set.size() % 16, 0u);
  EXPECT_NEAR(static_cast<double>(set.size()), 400.0, 96.0);
}

TEST(Generate, Validation) {
  EXPECT_THROW(ps::generate(Method::grid, 0, {0, 1, 0, 1}, 0), pb::Error);
  EXPECT_THROW(ps::generate(Method::grid, 5, {1, 1, 0, 1}, 0), pb::Error);
}

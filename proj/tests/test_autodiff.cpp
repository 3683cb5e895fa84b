#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "porobeam/graph.hpp"

namespace pb = porobeam;
using pb::Shape;
using pb::Tensor;
using pb::ad::Graph;
using pb::ad::NodeId;
using pb::testing::gradcheck_max_rel;
using pb::testing::random_tensor;

TEST(Evaluate, Basics) {
  Graph g;
  NodeId x = g.input(Shape{});
  NodeId y = g.input(Shape{});
  NodeId xy = g.mul(x, y);
  g.bind(x, Tensor::scalar(3.0));
  g.bind(y, Tensor::scalar(4.0));
  g.evaluate({xy});
  EXPECT_DOUBLE_EQ(g.value(xy)[0], 12.0);

  NodeId v = g.input(Shape{5});
  NodeId s = g.sum(v);
  g.bind(v, Tensor::zeros(Shape{5}));
  g.evaluate({s});
  EXPECT_DOUBLE_EQ(g.value(s)[0], 0.0);

  NodeId sw = g.swish(x);
  g.bind(x, Tensor::scalar(0.0));
  g.evaluate({sw});
  EXPECT_DOUBLE_EQ(g.value(sw)[0], 0.0);
}

TEST(Evaluate, Errors) {
  Graph g;
  NodeId x = g.input(Shape{3});
  NodeId y = g.input(Shape{4});
  EXPECT_THROW(g.add(x, y), pb::Error);
  NodeId s = g.sum(x);
  EXPECT_THROW(g.evaluate({s}), pb::Error);  // unbound input
}

TEST(Evaluate, DeterministicReplay) {
  Graph g;
  NodeId x = g.input(Shape{16});
  NodeId y = g.sum(g.mul(g.tanh_(x), g.exp_(g.affine(x, 0.3, -0.1))));
  pb::Rng rng(7);
  Tensor t = random_tensor(Shape{16}, rng);
  g.bind(x, t);
  g.evaluate({y});
  const double v1 = g.value(y)[0];
  g.bind(x, t);
  g.evaluate({y});
  const double v2 = g.value(y)[0];
  EXPECT_EQ(v1, v2);  // bit-identical
}

TEST(Gradient, Basics) {
  Graph g;
  NodeId x = g.input(Shape{});
  NodeId y = g.square(x);
  g.bind(x, Tensor::scalar(3.0));
  const NodeId wrt[] = {x};
  auto grad = g.gradient(y, wrt);
  EXPECT_NEAR(grad[0][0], 6.0, 1e-14);

  // swish'(0) = sigmoid(0) + 0 * sigmoid'(0) = 0.5
  Graph g2;
  NodeId u = g2.input(Shape{});
  NodeId sw = g2.swish(u);
  g2.bind(u, Tensor::scalar(0.0));
  const NodeId wrt2[] = {u};
  auto gradsw = g2.gradient(sw, wrt2);
  EXPECT_NEAR(gradsw[0][0], 0.5, 1e-15);

  // constant target: zero gradient
  Graph g3;
  NodeId p = g3.input(Shape{2});
  NodeId c = g3.constant(5.0);
  const NodeId wrt3[] = {p};
  auto gradc = g3.backward(c, wrt3);
  g3.evaluate(gradc);
  EXPECT_EQ(g3.value(gradc[0]).size(), 2u);
  EXPECT_DOUBLE_EQ(g3.value(gradc[0])[0], 0.0);
  EXPECT_DOUBLE_EQ(g3.value(gradc[0])[1], 0.0);
}

TEST(Gradient, NonScalarTargetThrows) {
  Graph g;
  NodeId x = g.input(Shape{3});
  NodeId y = g.mul(x, x);
  const NodeId wrt[] = {x};
  EXPECT_THROW(g.backward(y, wrt), pb::Error);
}

TEST(Gradient, Linearity) {
  // gradient(a*f + b*g) == a*gradient(f) + b*gradient(g) to 1e-12
  pb::Rng rng(11);
  Tensor t = random_tensor(Shape{6}, rng);
  const double a = 1.7, b = -0.6;

  auto build = [](Graph& g, NodeId x) {
    NodeId f = g.sum(g.mul(g.tanh_(x), x));
    NodeId h = g.sum(g.exp_(g.affine(x, 0.5, 0.0)));
    return std::make_pair(f, h);
  };
  Graph g;
  NodeId x = g.input(Shape{6});
  auto [f, h] = build(g, x);
  NodeId combo = g.add(g.affine(f, a, 0.0), g.affine(h, b, 0.0));
  g.bind(x, t);
  const NodeId wrt[] = {x};
  auto gf = g.gradient(f, wrt);
  auto gh = g.gradient(h, wrt);
  auto gc = g.gradient(combo, wrt);
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_NEAR(gc[0][i], a * gf[0][i] + b * gh[0][i], 1e-12);
}

TEST(Gradient, ElementwisePrimitives) {
  pb::Rng rng(3);
  Graph g;
  NodeId x = g.input(Shape{4, 3});
  NodeId y = g.input(Shape{4, 3});
  // chain through add/sub/mul/affine/tanh/sigmoid/exp/erf/gelu
  NodeId e =
      g.mul(g.erf_(x), g.add(g.tanh_(y), g.sigmoid(g.sub(x, g.affine(y, 0.7, 0.1)))));
  NodeId e2 = g.add(e, g.gelu(g.mul(x, y)));
  NodeId loss = g.sum(g.exp_(g.affine(e2, 0.3, 0.0)));
  g.bind(x, random_tensor(Shape{4, 3}, rng));
  g.bind(y, random_tensor(Shape{4, 3}, rng));
  const NodeId wrt[] = {x, y};
  EXPECT_LE(gradcheck_max_rel(g, loss, wrt), 1e-6);
}

TEST(Gradient, PositivePrimitives) {
  pb::Rng rng(5);
  Graph g;
  NodeId x = g.input(Shape{10});
  NodeId loss = g.sum(g.mul(g.sqrt_(x), g.recip(g.affine(x, 1.0, 0.5))));
  g.bind(x, random_tensor(Shape{10}, rng, 0.5, 2.0));
  const NodeId wrt[] = {x};
  EXPECT_LE(gradcheck_max_rel(g, loss, wrt), 1e-6);
}

TEST(Gradient, MatMulAllTransposeFlags) {
  pb::Rng rng(9);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      Graph g;
      Shape sa = ta ? Shape{4, 3} : Shape{3, 4};
      Shape sb = tb ? Shape{5, 4} : Shape{4, 5};
      NodeId a = g.input(sa);
      NodeId b = g.input(sb);
      NodeId loss = g.sum(g.square(g.matmul(a, b, ta, tb)));
      g.bind(a, random_tensor(sa, rng));
      g.bind(b, random_tensor(sb, rng));
      const NodeId wrt[] = {a, b};
      EXPECT_LE(gradcheck_max_rel(g, loss, wrt), 1e-6) << "ta=" << ta << " tb=" << tb;
    }
}

TEST(Gradient, StructureOps) {
  pb::Rng rng(13);
  Graph g;
  NodeId a = g.input(Shape{6, 4});
  NodeId v = g.input(Shape{4});
  NodeId w = g.input(Shape{6});
  NodeId s = g.input(Shape{});
  NodeId t1 = g.add(a, g.expand_rows(v, 6));
  NodeId t2 = g.add(t1, g.expand_cols(w, 4));
  NodeId t3 = g.add(t2, g.scalar_expand(s, Shape{6, 4}));
  NodeId c0 = g.slice_col(t3, 1);
  NodeId t4 = g.add(t3, g.col_expand(c0, 3, 4));
  NodeId red = g.add(g.sum(g.reduce_rows(t4)), g.sum(g.reduce_cols(t4)));
  NodeId loss = g.add(red, g.sum(g.square(g.reshape(t4, Shape{24}))));
  g.bind(a, random_tensor(Shape{6, 4}, rng));
  g.bind(v, random_tensor(Shape{4}, rng));
  g.bind(w, random_tensor(Shape{6}, rng));
  g.bind(s, random_tensor(Shape{}, rng));
  const NodeId wrt[] = {a, v, w, s};
  EXPECT_LE(gradcheck_max_rel(g, loss, wrt), 1e-6);
}

TEST(InputDerivative, Polynomial) {
  // f(x,z) = x^2 z : d2f/dxdz at (1,1) = 2
  auto build = [](Graph& g, NodeId xz) {
    NodeId x = g.slice_col(xz, 0);
    NodeId z = g.slice_col(xz, 1);
    return g.sum(g.mul(g.square(x), z));
  };
  EXPECT_NEAR(pb::ad::input_derivative(build, 1.0, 1.0, 1, 1), 2.0, 1e-12);
  EXPECT_NEAR(pb::ad::input_derivative(build, 2.0, 3.0, 2, 0), 6.0, 1e-12);   // 2z
  EXPECT_NEAR(pb::ad::input_derivative(build, 2.0, 3.0, 1, 0), 12.0, 1e-12);  // 2xz
  EXPECT_NEAR(pb::ad::input_derivative(build, 2.0, 3.0, 0, 2), 0.0, 1e-12);
}

TEST(InputDerivative, LinearMapSecondDerivativeVanishes) {
  auto build = [](Graph& g, NodeId xz) {
    NodeId x = g.slice_col(xz, 0);
    NodeId z = g.slice_col(xz, 1);
    return g.sum(g.add(g.affine(x, 2.5, 1.0), g.affine(z, -0.75, 0.0)));
  };
  for (auto [ax, az] : {std::pair{2, 0}, {0, 2}, {1, 1}})
    EXPECT_NEAR(pb::ad::input_derivative(build, 0.3, -0.8, ax, az), 0.0, 1e-12);
}

TEST(InputDerivative, OrderValidation) {
  auto build = [](Graph& g, NodeId xz) { return g.sum(xz); };
  EXPECT_THROW(pb::ad::input_derivative(build, 0, 0, 0, 0), pb::Error);
  EXPECT_THROW(pb::ad::input_derivative(build, 0, 0, 2, 1), pb::Error);
}

// The load-bearing composition for residual losses: parameter gradients of a
// loss built from second input derivatives of a small swish network.
TEST(Gradient, ParameterGradThroughSecondInputDerivative) {
  pb::Rng rng(21);
  Graph g;
  const std::size_t n = 5;
  NodeId pts = g.input(Shape{n, 2});
  NodeId w1 = g.input(Shape{4, 2});
  NodeId b1 = g.input(Shape{4});
  NodeId w2 = g.input(Shape{1, 4});
  NodeId h = g.swish(g.add(g.matmul(pts, w1, false, true), g.expand_rows(b1, n)));
  NodeId out = g.matmul(h, w2, false, true);  // [n,1]
  // first derivatives of the scalar field w.r.t. the points
  const NodeId wrt_pts[] = {pts};
  NodeId d1 = g.backward(g.sum(g.slice_col(out, 0)), wrt_pts)[0];
  NodeId ux = g.slice_col(d1, 0);
  // second derivative d2u/dx2 per point
  NodeId d2 = g.backward(g.sum(ux), wrt_pts)[0];
  NodeId uxx = g.slice_col(d2, 0);
  NodeId loss = g.mean(g.square(uxx));

  g.bind(pts, random_tensor(Shape{n, 2}, rng, -1.0, 1.0));
  g.bind(w1, random_tensor(Shape{4, 2}, rng, -0.8, 0.8));
  g.bind(b1, random_tensor(Shape{4}, rng, -0.3, 0.3));
  g.bind(w2, random_tensor(Shape{1, 4}, rng, -0.8, 0.8));
  const NodeId wrt[] = {w1, b1, w2};
  EXPECT_LE(gradcheck_max_rel(g, loss, wrt), 1e-6);
}

// ---- truncated 2-D DFT ----

TEST(Dft2, ConstantFieldDcOnly) {
  Graph g;
  const std::size_t nx = 8, nz = 6, c = 2;
  NodeId f = g.input(Shape{1, nx, nz, c});
  NodeId coef = g.dft2(f, 4, 3);
  g.bind(f, Tensor::full(Shape{1, nx, nz, c}, 2.5));
  g.evaluate({coef});
  const Tensor& t = g.value(coef);
  // coefficient layout [1, mx, mz, c, 2]
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double re = t[((j * 3 + l) * c + ch) * 2];
        const double im = t[((j * 3 + l) * c + ch) * 2 + 1];
        if (j == 0 && l == 0) {
          EXPECT_NEAR(re, 2.5 * nx * nz, 1e-10);  // unnormalized forward
          EXPECT_NEAR(im, 0.0, 1e-10);
        } else {
          EXPECT_NEAR(re, 0.0, 1e-10);
          EXPECT_NEAR(im, 0.0, 1e-10);
        }
      }
}

TEST(Dft2, RoundTripFullModes) {
  pb::Rng rng(31);
  Graph g;
  const std::size_t nx = 8, nz = 6, c = 3;
  NodeId f = g.input(Shape{2, nx, nz, c});
  NodeId coef = g.dft2(f, nx, nz / 2 + 1);
  NodeId back = g.idft2(coef, nx, nz);
  Tensor t = random_tensor(Shape{2, nx, nz, c}, rng);
  g.bind(f, t);
  g.evaluate({back});
  const Tensor& r = g.value(back);
  double max_err = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) max_err = std::max(max_err, std::abs(r[i] - t[i]));
  EXPECT_LE(max_err, 1e-12 * std::max(1.0, t.max_abs()));
}

TEST(Dft2, RoundTripOddNzFullModes) {
  pb::Rng rng(33);
  Graph g;
  const std::size_t nx = 5, nz = 7, c = 1;
  NodeId f = g.input(Shape{1, nx, nz, c});
  NodeId back = g.idft2(g.dft2(f, nx, nz / 2 + 1), nx, nz);
  Tensor t = random_tensor(Shape{1, nx, nz, c}, rng);
  g.bind(f, t);
  g.evaluate({back});
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(g.value(back)[i], t[i], 1e-12);
}

// <F x, y> == <x, F* y> with the stacked-real inner product, for both the
// forward and inverse maps and their registered transposes.
TEST(Dft2, AdjointIdentity) {
  pb::Rng rng(37);
  const std::size_t nx = 8, nz = 6, c = 2, mx = 5, mz = 3;
  Graph g;
  NodeId x = g.input(Shape{1, nx, nz, c});
  NodeId ycoef = g.input(Shape{1, mx, mz, c, 2});
  NodeId fx = g.dft2(x, mx, mz);
  NodeId fty = g.dft2_t(ycoef, nx, nz);
  NodeId iy = g.idft2(ycoef, nx, nz);
  NodeId itx = g.idft2_t(x, mx, mz);
  Tensor tx = random_tensor(Shape{1, nx, nz, c}, rng);
  Tensor ty = random_tensor(Shape{1, mx, mz, c, 2}, rng);
  g.bind(x, tx);
  g.bind(ycoef, ty);
  g.evaluate({fx, fty, iy, itx});
  auto ip = [](const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const double lhs_f = ip(g.value(fx), ty);
  const double rhs_f = ip(tx, g.value(fty));
  EXPECT_NEAR(lhs_f, rhs_f, 1e-12 * std::max(1.0, std::abs(lhs_f)));
  const double lhs_i = ip(g.value(iy), tx);
  const double rhs_i = ip(ty, g.value(itx));
  EXPECT_NEAR(lhs_i, rhs_i, 1e-12 * std::max(1.0, std::abs(lhs_i)));
}

TEST(Dft2, NyquistValidation) {
  Graph g;
  NodeId f = g.input(Shape{1, 8, 6, 1});
  EXPECT_THROW(g.dft2(f, 9, 3), pb::Error);
  EXPECT_THROW(g.dft2(f, 4, 5), pb::Error);  // mz > Nz/2+1
}

TEST(Dft2, GradientFlowsThroughTransforms) {
  pb::Rng rng(41);
  Graph g;
  const std::size_t nx = 8, nz = 6, c = 2;
  NodeId f = g.input(Shape{1, nx, nz, c});
  NodeId filt = g.idft2(g.dft2(f, 4, 3), nx, nz);
  NodeId loss = g.sum(g.square(filt));
  g.bind(f, random_tensor(Shape{1, nx, nz, c}, rng));
  const NodeId wrt[] = {f};
  EXPECT_LE(gradcheck_max_rel(g, loss, wrt), 1e-6);
}

// ---- spectral channel mixing ----

TEST(ModeMul, DcIdentityPassThrough) {
  Graph g;
  const std::size_t nx = 8, nz = 4, c = 3, mx = 4, mz = 2;
  NodeId v = g.input(Shape{1, nx, nz, c});
  NodeId rre = g.input(Shape{mx, mz, c, c});
  NodeId rim = g.input(Shape{mx, mz, c, c});
  NodeId out = g.idft2(g.mode_mul(g.dft2(v, mx, mz), rre, rim), nx, nz);

  // constant per channel; R = identity at the (0,0) mode, zero elsewhere
  Tensor tv(Shape{1, nx, nz, c});
  for (std::size_t i = 0; i < nx * nz; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) tv[i * c + ch] = 1.0 + static_cast<double>(ch);
  Tensor tre(Shape{mx, mz, c, c});
  for (std::size_t ch = 0; ch < c; ++ch) tre[ch * c + ch] = 1.0;  // mode (0,0) block
  g.bind(v, tv);
  g.bind(rre, tre);
  g.bind(rim, Tensor::zeros(Shape{mx, mz, c, c}));
  g.evaluate({out});
  for (std::size_t i = 0; i < tv.size(); ++i) EXPECT_NEAR(g.value(out)[i], tv[i], 1e-12);
}

TEST(ModeMul, ZeroWeightsAnnihilate) {
  pb::Rng rng(43);
  Graph g;
  const std::size_t nx = 8, nz = 4, c = 2, mx = 4, mz = 2;
  NodeId v = g.input(Shape{1, nx, nz, c});
  NodeId rre = g.input(Shape{mx, mz, c, c});
  NodeId rim = g.input(Shape{mx, mz, c, c});
  NodeId out = g.idft2(g.mode_mul(g.dft2(v, mx, mz), rre, rim), nx, nz);
  g.bind(v, random_tensor(Shape{1, nx, nz, c}, rng));
  g.bind(rre, Tensor::zeros(Shape{mx, mz, c, c}));
  g.bind(rim, Tensor::zeros(Shape{mx, mz, c, c}));
  g.evaluate({out});
  EXPECT_DOUBLE_EQ(g.value(out).max_abs(), 0.0);
}

TEST(ModeMul, LinearityInField) {
  pb::Rng rng(47);
  const std::size_t nx = 8, nz = 4, c = 2, mx = 4, mz = 2;
  Tensor r_re = random_tensor(Shape{mx, mz, c, c}, rng, -0.5, 0.5);
  Tensor r_im = random_tensor(Shape{mx, mz, c, c}, rng, -0.5, 0.5);
  Tensor v1 = random_tensor(Shape{1, nx, nz, c}, rng);
  Tensor v2 = random_tensor(Shape{1, nx, nz, c}, rng);
  const double a = 1.3, b = -0.7;

  Graph g;
  NodeId v = g.input(Shape{1, nx, nz, c});
  NodeId rre = g.constant(r_re);
  NodeId rim = g.constant(r_im);
  NodeId out = g.idft2(g.mode_mul(g.dft2(v, mx, mz), rre, rim), nx, nz);
  auto run = [&](const Tensor& t) {
    g.bind(v, t);
    g.evaluate({out});
    return g.value(out);
  };
  Tensor combo(Shape{1, nx, nz, c});
  for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * v1[i] + b * v2[i];
  Tensor o1 = run(v1), o2 = run(v2), oc = run(combo);
  for (std::size_t i = 0; i < oc.size(); ++i)
    EXPECT_NEAR(oc[i], a * o1[i] + b * o2[i], 1e-10);
}

TEST(ModeMul, GradcheckFieldAndWeights) {
  pb::Rng rng(53);
  Graph g;
  const std::size_t nx = 8, nz = 4, c = 2, mx = 4, mz = 2;
  NodeId v = g.input(Shape{2, nx, nz, c});
  NodeId rre = g.input(Shape{mx, mz, c, c});
  NodeId rim = g.input(Shape{mx, mz, c, c});
  NodeId out = g.idft2(g.mode_mul(g.dft2(v, mx, mz), rre, rim), nx, nz);
  NodeId loss = g.sum(g.square(out));
  g.bind(v, random_tensor(Shape{2, nx, nz, c}, rng));
  g.bind(rre, random_tensor(Shape{mx, mz, c, c}, rng, -0.5, 0.5));
  g.bind(rim, random_tensor(Shape{mx, mz, c, c}, rng, -0.5, 0.5));
  const NodeId wrt[] = {v, rre, rim};
  EXPECT_LE(gradcheck_max_rel(g, loss, wrt), 1e-6);
}

TEST(Gradient, BitDeterministic) {
  pb::Rng rng(61);
  Graph g;
  NodeId x = g.input(Shape{8, 4});
  NodeId w = g.input(Shape{4, 4});
  NodeId loss = g.sum(g.square(g.swish(g.matmul(x, w))));
  Tensor tx = random_tensor(Shape{8, 4}, rng);
  Tensor tw = random_tensor(Shape{4, 4}, rng);
  g.bind(x, tx);
  g.bind(w, tw);
  const NodeId wrt[] = {w};
  auto g1 = g.gradient(loss, wrt);
  g.bind(x, tx);
  g.bind(w, tw);
  auto g2 = g.gradient(loss, wrt);
  for (std::size_t i = 0; i < g1[0].size(); ++i) EXPECT_EQ(g1[0][i], g2[0][i]);
}

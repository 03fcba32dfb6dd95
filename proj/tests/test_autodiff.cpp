// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "dafc/autodiff.hpp"
#include "dafc/error.hpp"
#include "doctest.h"

using namespace dafc;

namespace {

Matrix random_matrix(Index r, Index c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// 0.5 * sum((f(x) - t)^2) through a graph of two affine layers around a
// block transpose, plus the input gradient.
struct SmallNet {
  AffineLayer a{"a", 6, 4, Activation::kTanh};
  AffineLayer b{"b", 3, 5, Activation::kSigmoid};

  double loss(const Matrix& x, const Matrix& t, Matrix* grad_x = nullptr) {
    Graph g;
    const auto in = g.input(x, grad_x != nullptr);
    const auto h = g.affine(in, a);          // (2*3) x 4
    const auto tr = g.block_transpose(h, 3);  // (2*4) x 3
    const auto out = g.affine(tr, b);         // (2*4) x 5
    const Matrix diff = g.value(out) - t;
    g.backward(out, diff);
    if (grad_x) *grad_x = g.grad(in);
    return 0.5 * diff.squaredNorm();
  }
};

}  // namespace

TEST_CASE("graph gradients match finite differences") {
  Rng rng(12);
  SmallNet net;
  net.a.init_uniform_fan(rng);
  net.b.init_uniform_fan(rng);
  net.a.b = random_matrix(4, 1, rng).col(0) * 0.1;
  const Matrix x = random_matrix(6, 6, rng);
  const Matrix t = random_matrix(8, 5, rng).cwiseAbs() * 0.3;
  net.a.zero_grad();
  net.b.zero_grad();
  Matrix gx;
  net.loss(x, t, &gx);
  const double h = 1e-5;
  auto fd = [&](double& p) {
    const double o = p;
    p = o + h;
    const double up = net.loss(x, t);
    p = o - h;
    const double down = net.loss(x, t);
    p = o;
    return (up - down) / (2 * h);
  };
  const Matrix gA = net.a.grad_W, gB = net.b.grad_W;
  const Vector gbA = net.a.grad_b;
  for (Index i = 0; i < net.a.W.size(); ++i) CHECK(fd(net.a.W.data()[i]) == doctest::Approx(gA.data()[i]).epsilon(1e-6));
  for (Index i = 0; i < net.b.W.size(); ++i) CHECK(fd(net.b.W.data()[i]) == doctest::Approx(gB.data()[i]).epsilon(1e-6));
  for (Index i = 0; i < gbA.size(); ++i) CHECK(fd(net.a.b(i)) == doctest::Approx(gbA(i)).epsilon(1e-6));
  Matrix xm = x;
  for (Index i = 0; i < xm.size(); ++i) {
    const double o = xm.data()[i];
    xm.data()[i] = o + h;
    const double up = net.loss(xm, t);
    xm.data()[i] = o - h;
    const double down = net.loss(xm, t);
    xm.data()[i] = o;
    CHECK((up - down) / (2 * h) == doctest::Approx(gx.data()[i]).epsilon(1e-6));
  }
}

TEST_CASE("every activation matches finite differences") {
  for (Activation act : {Activation::kIdentity, Activation::kTanh, Activation::kRelu, Activation::kSigmoid}) {
    CAPTURE(static_cast<int>(act));
    Rng rng(40 + static_cast<int>(act));
    AffineLayer layer("l", 5, 3, act);
    layer.init_uniform_fan(rng);
    layer.b = random_matrix(3, 1, rng).col(0);
    Matrix x = random_matrix(4, 5, rng);
    // Keep every ReLU pre-activation clear of the kink.
    for (;;) {
      const Matrix pre = (x * layer.W).rowwise() + layer.b.transpose();
      if (pre.cwiseAbs().minCoeff() > 1e-2) break;
      x = random_matrix(4, 5, rng);
    }
    const Matrix c = random_matrix(2, 6, rng);
    // sum(c .* reshape(f(x))) exercises the reshape node as well.
    auto loss = [&](Matrix* gx) {
      Graph g;
      const auto in = g.input(x, gx != nullptr);
      const auto out = g.reshape(g.affine(in, layer), 2, 6);
      const double v = (g.value(out).array() * c.array()).sum();
      if (gx) {
        g.backward(out, c);
        *gx = g.grad(in);
      }
      return v;
    };
    layer.zero_grad();
    Matrix gx;
    loss(&gx);
    const Matrix gW = layer.grad_W;
    const Vector gb = layer.grad_b;
    const double h = 1e-5;
    auto check = [&](double& p, double analytic) {
      const double o = p;
      p = o + h;
      const double up = loss(nullptr);
      p = o - h;
      const double down = loss(nullptr);
      p = o;
      const double fd = (up - down) / (2 * h);
      const double scale = std::max(std::abs(fd), std::abs(analytic));
      CHECK((scale == 0.0 ? 0.0 : std::abs(fd - analytic) / scale) < 1e-6);
    };
    for (Index i = 0; i < layer.W.size(); ++i) check(layer.W.data()[i], gW.data()[i]);
    for (Index i = 0; i < layer.b.size(); ++i) check(layer.b(i), gb(i));
    for (Index i = 0; i < x.size(); ++i) check(x.data()[i], gx.data()[i]);
  }
}

TEST_CASE("reshape keeps row-major order") {
  Graph g;
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  const auto r = g.reshape(g.input(x), 1, 6);
  const Matrix& v = g.value(r);
  for (Index i = 0; i < 6; ++i) CHECK(v(0, i) == static_cast<double>(i + 1));
  CHECK_THROWS_AS(g.reshape(0, 4, 2), DimensionError);
}

TEST_CASE("Adam recovers the least-squares solution") {
  Rng rng(13);
  const Matrix X = random_matrix(64, 5, rng);
  const Matrix Wtrue = random_matrix(5, 2, rng);
  const Matrix Y = X * Wtrue + random_matrix(64, 2, rng) * 0.1;
  // Closed form with an intercept column.
  Eigen::MatrixXd A(64, 6);
  A.leftCols(5) = X;
  A.col(5).setOnes();
  const Eigen::MatrixXd sol = A.colPivHouseholderQr().solve(Eigen::MatrixXd(Y));

  AffineLayer layer("ls", 5, 2, Activation::kIdentity);
  AffineLayer* params[] = {&layer};
  AdamState adam(params, 0.02);
  for (int step = 0; step < 6000; ++step) {
    // Anneal so the fixed step size does not leave Adam circling the optimum.
    if (step == 3000) adam.lr = 1e-3;
    layer.zero_grad();
    Graph g;
    const auto out = g.affine(g.input(X), layer);
    g.backward(out, (g.value(out) - Y) / 64.0);
    adam_step(params, adam);
  }
  CHECK((layer.W - sol.topRows(5)).cwiseAbs().maxCoeff() < 1e-4);
  CHECK((layer.b - sol.row(5).transpose()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("Adam first step and quadratic bowl") {
  AffineLayer layer("bowl", 2, 2, Activation::kIdentity);
  layer.W << 1.0, -2.0, 0.5, 3.0;
  AffineLayer* params[] = {&layer};
  AdamState adam(params, 0.01);
  // Bias-corrected first step moves every parameter by lr against its gradient sign.
  layer.grad_W << 4.0, -0.5, 2.0, 1e-3;
  layer.grad_b.setZero();
  const Matrix before = layer.W;
  adam_step(params, adam);
  const Matrix step = layer.W - before;
  CHECK(step(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(step(0, 1) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(step(1, 1) == doctest::Approx(-0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-6));
  CHECK(layer.b.isZero());

  Matrix c(2, 2);
  c << 0.3, -0.7, 1.1, 0.2;
  for (int t = 0; t < 3000; ++t) {
    layer.grad_W = 2.0 * (layer.W - c);
    layer.grad_b.setZero();
    adam_step(params, adam);
  }
  CHECK((layer.W - c).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("Adam rejects non-finite gradients") {
  AffineLayer layer("x", 2, 2, Activation::kIdentity);
  AffineLayer* params[] = {&layer};
  AdamState adam(params, 0.01);
  layer.grad_W(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(params, adam), NumericalError);
}

TEST_CASE("plateau scheduler") {
  LrScheduler s(1e-3, 3, 0.5, 1.0);
  CHECK(s.step(0.9) == 1e-3);
  CHECK(s.step(0.95) == 1e-3);
  CHECK(s.step(0.9) == 1e-3);
  CHECK(s.step(0.91) == 0.5e-3);  // third epoch without improvement
  CHECK(s.reductions() == 1);
  CHECK(s.bad_epochs() == 0);
  CHECK(s.step(0.5) == 0.5e-3);
  CHECK(s.best() == 0.5);
  CHECK_THROWS_AS(s.step(std::nan("")), NumericalError);
}

TEST_CASE("require_finite") {
  Matrix m = Matrix::Zero(2, 2);
  CHECK_NOTHROW(require_finite(m, "m"));
  m(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(require_finite(m, "m"), NumericalError);
}

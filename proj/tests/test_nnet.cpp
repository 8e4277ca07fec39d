#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pf/nnet.hpp"
#include "reference_net.hpp"

#include <cmath>
#include <random>

using namespace pf;
using pf::testing::close_rel;
using pf::testing::fd_derivatives;
using pf::testing::random_net;

namespace {

NetworkParams scalar_chain(double w_hidden, double w_out) {
  NetworkParams p;
  p.activation = Activation::Tanh;
  p.layers.push_back({Matrix::Constant(1, 1, w_hidden), Vector::Zero(1)});
  p.layers.push_back({Matrix::Constant(1, 1, w_out), Vector::Zero(1)});
  return p;
}

}  // namespace

TEST_CASE("forward: zero network gives zeros") {
  const std::vector<Index> widths{3, 7, 5, 2};
  NetworkParams p = zeros_like(init_network(widths, Activation::Tanh, 1));
  Vector x(3);
  x << 0.4, -2.0, 9.0;
  CHECK(forward(p, x).isZero(0.0));
}

TEST_CASE("forward: 1-1-1 chain evaluates tanh(0.5)") {
  Vector x(1);
  x << 0.5;
  CHECK(forward(scalar_chain(1.0, 1.0), x)(0) == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("forward: bias is subtracted") {
  NetworkParams p = scalar_chain(1.0, 1.0);
  p.layers[0].bias(0) = 0.25;
  Vector x(1);
  x << 0.5;
  CHECK(forward(p, x)(0) == doctest::Approx(std::tanh(0.25)));
}

TEST_CASE("forward: matches straight-line reference on a seeded 2-16-1 net") {
  const NetworkParams p = random_net({2, 16, 1}, 7);
  Vector x(2);
  x << 0.3, 0.7;
  const double ref = static_cast<double>(pf::testing::ref_u(p, 0.3L, 0.7L));
  CHECK(std::abs(forward(p, x)(0) - ref) < 1e-14);
}

TEST_CASE("forward: shape mismatch names the layer") {
  NetworkParams p = random_net({2, 4, 3, 1}, 3);
  p.layers[2].weights = Matrix::Ones(1, 5);
  Vector x = Vector::Ones(2);
  try {
    forward(p, x);
    FAIL("expected shape mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeMismatch);
    CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
  }
  CHECK_THROWS_AS(validate(p), Error);
}

TEST_CASE("forward: overflow reports layer index") {
  NetworkParams p;
  p.activation = Activation::Identity;
  p.layers.push_back({Matrix::Constant(1, 1, 1e200), Vector::Zero(1)});
  p.layers.push_back({Matrix::Constant(1, 1, 1e200), Vector::Zero(1)});
  Vector x(1);
  x << 1.0;
  try {
    forward(p, x);
    FAIL("expected overflow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Overflow);
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("forward: identity output is positively homogeneous in the last layer") {
  NetworkParams p = random_net({2, 9, 9, 1}, 11);
  p.layers.back().bias.setZero();
  NetworkParams scaled = p;
  scaled.layers.back().weights *= 3.5;
  Vector x(2);
  x << -0.2, 0.6;
  CHECK(forward(scaled, x)(0) == doctest::Approx(3.5 * forward(p, x)(0)).epsilon(1e-14));
}

TEST_CASE("derivatives: u = tanh(x) at the origin") {
  NetworkParams p;
  p.layers.push_back({(Matrix(1, 2) << 1.0, 0.0).finished(), Vector::Zero(1)});
  p.layers.push_back({Matrix::Ones(1, 1), Vector::Zero(1)});
  const DualTriple d = derivatives(p, 0.0, 0.3);
  CHECK(d.value == 0.0);
  CHECK(d.d_dx == 1.0);
  CHECK(d.d_dt == 0.0);
  CHECK(d.d2_dx2 == 0.0);
  const DualTriple e = derivatives(p, 0.4, 0.0);
  const double s2 = 1.0 - std::tanh(0.4) * std::tanh(0.4);
  CHECK(e.d_dx == doctest::Approx(s2));
  CHECK(e.d2_dx2 == doctest::Approx(-2.0 * std::tanh(0.4) * s2));
}

TEST_CASE("derivatives: zero network gives all zeros") {
  const std::vector<Index> widths{2, 6, 1};
  const NetworkParams p = zeros_like(init_network(widths, Activation::Tanh, 5));
  const DualTriple d = derivatives(p, 0.7, 0.1);
  CHECK(d.value == 0.0);
  CHECK(d.d_dx == 0.0);
  CHECK(d.d_dt == 0.0);
  CHECK(d.d2_dx2 == 0.0);
}

TEST_CASE("derivatives: seeded 2-8-8-1 net matches finite differences") {
  const NetworkParams p = random_net({2, 8, 8, 1}, 2024);
  const DualTriple d = derivatives(p, 0.2, 0.4);
  const DualTriple fd = fd_derivatives(p, 0.2, 0.4);
  CHECK(close_rel(d.value, fd.value, 1e-12, 1e-14));
  CHECK(close_rel(d.d_dx, fd.d_dx, 1e-5, 1e-8));
  CHECK(close_rel(d.d_dt, fd.d_dt, 1e-5, 1e-8));
  CHECK(close_rel(d.d2_dx2, fd.d2_dx2, 1e-5, 1e-8));
}

TEST_CASE("derivatives: 50 random nets agree with finite differences") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int depth = 1 + static_cast<int>(rng() % 4);
    std::vector<Index> widths{2};
    for (int l = 0; l < depth; ++l) widths.push_back(2 + static_cast<Index>(rng() % 15));
    widths.push_back(1);
    const NetworkParams p = random_net(widths, 1000 + trial);
    const double x = uniform01(rng), t = uniform01(rng);
    const DualTriple d = derivatives(p, x, t);
    const DualTriple fd = fd_derivatives(p, x, t);
    INFO("trial " << trial);
    CHECK(close_rel(d.d_dx, fd.d_dx, 1e-5, 1e-8));
    CHECK(close_rel(d.d_dt, fd.d_dt, 1e-5, 1e-8));
    CHECK(close_rel(d.d2_dx2, fd.d2_dx2, 1e-5, 1e-8));
  }
}

TEST_CASE("derivatives: relu cannot carry second derivatives") {
  NetworkParams p = random_net({2, 4, 1}, 1);
  p.activation = Activation::Relu;
  try {
    derivatives(p, 0.1, 0.1);
    FAIL("expected unsupported activation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedActivation);
  }
}

namespace {

// E = ||W x - y||^2 for a single identity-activation layer.
std::vector<LossTerm> least_squares(const Vector& x, const Vector& y) {
  LossTerm term;
  term.inputs = x;
  term.head = [y](const SlotBatch& out, SlotBatch& adj) {
    const Vector r = out.value().col(0) - y;
    adj.value().col(0) = 2.0 * r;
    return r.squaredNorm();
  };
  return {term};
}

}  // namespace

TEST_CASE("loss_gradient: zero at the exact solve point of a linear layer") {
  NetworkParams p;
  p.activation = Activation::Identity;
  p.layers.push_back({(Matrix(2, 2) << 1.0, 2.0, -1.0, 0.5).finished(), Vector::Zero(2)});
  Vector x(2);
  x << 0.3, -0.8;
  const Vector y = p.layers[0].weights * x;
  const LossGradient g = loss_gradient(p, least_squares(x, y));
  CHECK(g.value == 0.0);
  CHECK(g.gradient.layers[0].weights.isZero(0.0));
  CHECK(g.gradient.layers[0].bias.isZero(0.0));
}

TEST_CASE("loss_gradient: linear layer matches 2(Wx-y)x^T") {
  NetworkParams p;
  p.activation = Activation::Identity;
  p.layers.push_back({(Matrix(3, 2) << 1.0, 2.0, -1.0, 0.5, 0.25, -3.0).finished(), Vector::Zero(3)});
  Vector x(2), y(3);
  x << 0.3, -0.8;
  y << 1.0, 2.0, -0.5;
  const LossGradient g = loss_gradient(p, least_squares(x, y));
  const Vector r = p.layers[0].weights * x - y;
  const Matrix expected = 2.0 * r * x.transpose();
  CHECK((g.gradient.layers[0].weights - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.gradient.layers[0].bias + 2.0 * r).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("loss_gradient: non-finite loss is rejected before differentiation") {
  NetworkParams p = random_net({2, 3, 1}, 4);
  LossTerm term;
  term.inputs = Matrix::Zero(2, 1);
  term.head = [](const SlotBatch&, SlotBatch&) { return std::nan(""); };
  std::vector<LossTerm> terms{term};
  try {
    loss_gradient(p, terms);
    FAIL("expected non-finite loss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
  }
}

TEST_CASE("loss_gradient: derivative-slot loss matches finite differences per parameter") {
  // E = sum_k (u_t + u u_x - 0.1 u_xx)^2 + u^2 over a few points; exercises
  // every slot of the reverse sweep.
  const NetworkParams p = random_net({2, 5, 4, 1}, 77);
  Matrix pts(2, 4);
  pts << 0.1, 0.4, 0.7, 0.9, 0.2, 0.5, 0.3, 0.8;
  LossTerm term;
  term.inputs = pts;
  term.slots = Slots::Derivatives;
  term.head = [](const SlotBatch& out, SlotBatch& adj) {
    double e = 0;
    for (Index k = 0; k < out.points; ++k) {
      const double u = out.value()(0, k), ux = out.dx()(0, k), ut = out.dt()(0, k),
                   uxx = out.dxx()(0, k);
      const double r = ut + u * ux - 0.1 * uxx;
      e += r * r + u * u;
      adj.value()(0, k) = 2 * r * ux + 2 * u;
      adj.dx()(0, k) = 2 * r * u;
      adj.dt()(0, k) = 2 * r;
      adj.dxx()(0, k) = -0.2 * r;
    }
    return e;
  };
  std::vector<LossTerm> terms{term};
  const LossGradient g = loss_gradient(p, terms);
  const double h = 1e-6;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (Index i = 0; i < p.layers[l].weights.size(); ++i) {
      NetworkParams a = p, b = p;
      a.layers[l].weights.data()[i] += h;
      b.layers[l].weights.data()[i] -= h;
      const double fd = (loss_value(a, terms) - loss_value(b, terms)) / (2 * h);
      CHECK(close_rel(g.gradient.layers[l].weights.data()[i], fd, 1e-5, 1e-8));
    }
    for (Index i = 0; i < p.layers[l].bias.size(); ++i) {
      NetworkParams a = p, b = p;
      a.layers[l].bias(i) += h;
      b.layers[l].bias(i) -= h;
      const double fd = (loss_value(a, terms) - loss_value(b, terms)) / (2 * h);
      CHECK(close_rel(g.gradient.layers[l].bias(i), fd, 1e-5, 1e-8));
    }
  }
}

TEST_CASE("normalize_layer: examples") {
  CHECK(normalize_layer(Vector::Map(std::vector<double>{3, 4}.data(), 2), 5.0) ==
        (Vector(2) << 3, 4).finished());
  const Vector u = normalize_layer((Vector(2) << 3, 4).finished(), 1.0);
  CHECK(u(0) == doctest::Approx(0.6));
  CHECK(u(1) == doctest::Approx(0.8));
  const Vector w = normalize_layer(Vector::Ones(4), 4.0);
  CHECK(w.isApprox(Vector::Constant(4, 2.0)));
  CHECK_THROWS_AS(normalize_layer(Vector::Zero(3), 1.0), Error);
}

TEST_CASE("normalize_layer: idempotent on random vectors") {
  std::mt19937_64 rng(5);
  NormalSampler<std::mt19937_64> normal;
  for (int trial = 0; trial < 200; ++trial) {
    Vector z(1 + static_cast<Index>(rng() % 200));
    for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng) * std::exp(4 * normal(rng));
    const double target = std::exp(normal(rng));
    const Vector once = normalize_layer(z, target);
    CHECK(std::abs(once.norm() - target) <= 1e-13 * target);
    CHECK(normalize_layer(once, target) == once);
  }
}

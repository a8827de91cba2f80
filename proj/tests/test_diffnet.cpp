#include <cmath>

#include "doctest.h"
#include "ldc/bytes.hpp"
#include "ldc/diffnet.hpp"
#include "ldc/rng.hpp"

using namespace ldc;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double* param_ptr(Net& net, std::size_t flat) {
  for (auto& l : net.layers) {
    if (flat < l.w.size()) return l.w.data() + flat;
    flat -= l.w.size();
    if (flat < l.b.size()) return l.b.data() + flat;
    flat -= l.b.size();
  }
  return nullptr;
}

double grad_at(const GradBundle& g, std::size_t flat) {
  for (std::size_t k = 0; k < g.dw.size(); ++k) {
    if (flat < g.dw[k].size()) return g.dw[k].data()[flat];
    flat -= g.dw[k].size();
    if (flat < g.db[k].size()) return g.db[k][flat];
    flat -= g.db[k].size();
  }
  return 0.0;
}

}  // namespace

TEST_CASE("zero residual net is the identity") {
  Net net;
  net.residual = true;
  Layer l;
  l.w = Matrix(4, 4);
  l.b.assign(4, 0.0);
  l.act = Activation::Identity;
  net.layers.push_back(l);

  Matrix x = random_matrix(3, 4, 11);
  Matrix y = forward(net, x);
  CHECK(y == x);
}

TEST_CASE("identity layer passes input through") {
  Net net;
  Layer l;
  l.w = Matrix::identity(5);
  l.b.assign(5, 0.0);
  l.act = Activation::Identity;
  net.layers.push_back(l);
  Matrix x = random_matrix(2, 5, 12);
  CHECK(forward(net, x) == x);
}

TEST_CASE("two-layer forward matches a straight-line recomputation") {
  Net net = init_net({3, 6, 2}, InitScheme::He, 42);
  Matrix x = random_matrix(4, 3, 13);
  Matrix y = forward(net, x);

  for (std::size_t i = 0; i < 4; ++i) {
    // layer 0 with ReLU
    Vector h(6);
    for (std::size_t o = 0; o < 6; ++o) {
      double z = net.layers[0].b[o];
      for (std::size_t j = 0; j < 3; ++j) z += net.layers[0].w(o, j) * x(i, j);
      h[o] = z > 0 ? z : 0;
    }
    for (std::size_t o = 0; o < 2; ++o) {
      double z = net.layers[1].b[o];
      for (std::size_t j = 0; j < 6; ++j) z += net.layers[1].w(o, j) * h[j];
      CHECK(y(i, o) == doctest::Approx(z).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward is pure") {
  Net net = init_net({4, 8, 4}, InitScheme::Xavier, 7, true);
  Matrix x = random_matrix(5, 4, 14);
  CHECK(forward(net, x) == forward(net, x));
}

TEST_CASE("linear least-squares gradient matches the analytic form") {
  Net net;
  Layer l;
  l.w = random_matrix(3, 4, 21);
  l.b.assign(3, 0.0);
  l.act = Activation::Identity;
  net.layers.push_back(l);

  Matrix x = random_matrix(1, 4, 22);
  Vector target{0.5, -1.0, 2.0};

  ForwardCache cache;
  Matrix out = forward(net, x, &cache);
  Matrix upstream(1, 3);  // d(0.5 ||Wx - y||^2)/dout = out - y
  for (std::size_t o = 0; o < 3; ++o) upstream(0, o) = out(0, o) - target[o];

  BackwardResult r = backward(net, cache, upstream);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(r.grads.dw[0](o, j) ==
            doctest::Approx((out(0, o) - target[o]) * x(0, j)).epsilon(1e-12));
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  Net net = init_net({4, 5, 4}, InitScheme::He, 3, true);
  Matrix x = random_matrix(2, 4, 23);
  ForwardCache cache;
  forward(net, x, &cache);
  BackwardResult r = backward(net, cache, Matrix(2, 4));
  CHECK(r.grads.max_abs() == 0.0);
  CHECK(r.input_grad.frobenius_norm() == 0.0);
}

TEST_CASE("backward agrees with central finite differences") {
  Net net = init_net({5, 7, 4}, InitScheme::He, 99);
  Matrix x = random_matrix(3, 5, 31);
  Matrix c = random_matrix(3, 4, 32);  // loss = sum(c .* out)

  ForwardCache cache;
  forward(net, x, &cache);
  BackwardResult r = backward(net, cache, c);

  auto loss = [&](Net& n) {
    Matrix out = forward(n, x);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += c.data()[i] * out.data()[i];
    return s;
  };

  const double h = 1e-5;
  const std::size_t np = net.param_count();
  std::size_t ok = 0;
  for (std::size_t p = 0; p < np; ++p) {
    Net n = net;
    double* v = param_ptr(n, p);
    double orig = *v;
    *v = orig + h;
    double up = loss(n);
    *v = orig - h;
    double dn = loss(n);
    double fd = (up - dn) / (2 * h);
    double an = grad_at(r.grads, p);
    double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
    if (std::fabs(fd - an) / denom < 1e-4) ++ok;
  }
  CHECK(double(ok) >= 0.95 * double(np));

  // input gradient too
  std::size_t ok_in = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    Matrix a = forward(net, xp), b = forward(net, xm);
    double fd = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) fd += c.data()[j] * (a.data()[j] - b.data()[j]);
    fd /= 2 * h;
    double an = r.input_grad.data()[i];
    double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
    if (std::fabs(fd - an) / denom < 1e-4) ++ok_in;
  }
  CHECK(double(ok_in) >= 0.95 * double(x.size()));
}

TEST_CASE("residual backward includes the identity path") {
  Net net = init_net({4, 6, 4}, InitScheme::He, 55, true);
  Matrix x = random_matrix(2, 4, 41);
  Matrix c = random_matrix(2, 4, 42);

  ForwardCache cache;
  forward(net, x, &cache);
  BackwardResult r = backward(net, cache, c);

  const double h = 1e-5;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    Matrix a = forward(net, xp), b = forward(net, xm);
    double fd = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) fd += c.data()[j] * (a.data()[j] - b.data()[j]);
    fd /= 2 * h;
    CHECK(r.input_grad.data()[i] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("sgd_step arithmetic") {
  Net net;
  Layer l;
  l.w = Matrix(1, 1);
  l.w(0, 0) = 1.0;
  l.b.assign(1, 0.0);
  net.layers.push_back(l);

  GradBundle g = GradBundle::zeros_like(net);
  Net same = sgd_step(net, g, 0.1);
  CHECK(serialize_net(same) == serialize_net(net));

  g.dw[0](0, 0) = 2.0;
  Net stepped = sgd_step(net, g, 0.1);
  CHECK(stepped.layers[0].w(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("sgd converges on a convex quadratic") {
  // loss(w) = 0.5 (w - 3)^2, gradient w - 3
  Net net;
  Layer l;
  l.w = Matrix(1, 1);
  l.w(0, 0) = 1.0;
  l.b.assign(1, 0.0);
  net.layers.push_back(l);

  int steps = 0;
  for (; steps < 200; ++steps) {
    double w = net.layers[0].w(0, 0);
    if (std::fabs(w - 3.0) < 1e-6) break;
    GradBundle g = GradBundle::zeros_like(net);
    g.dw[0](0, 0) = w - 3.0;
    net = sgd_step(std::move(net), g, 0.1);
  }
  CHECK(steps <= 200);
  CHECK(net.layers[0].w(0, 0) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("init_net is deterministic per seed and validates sizes") {
  Net a = init_net({4, 4}, InitScheme::He, 2026);
  Net b = init_net({4, 4}, InitScheme::He, 2026);
  CHECK(serialize_net(a) == serialize_net(b));
  Net c = init_net({4, 4}, InitScheme::He, 2027);
  CHECK(serialize_net(c) != serialize_net(a));

  CHECK_THROWS_AS(init_net({5}, InitScheme::He, 1), LdcError);
  CHECK_THROWS_AS(init_net({4, 0, 4}, InitScheme::He, 1), LdcError);
  CHECK_THROWS_AS(init_net({4, 5}, InitScheme::He, 1, true), LdcError);
}

TEST_CASE("He initialization has the right weight variance") {
  Net net = init_net({100, 100}, InitScheme::He, 777);
  const Matrix& w = net.layers[0].w;
  double mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) mean += w.data()[i];
  mean /= double(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double d = w.data()[i] - mean;
    var += d * d;
  }
  var /= double(w.size());
  CHECK(var > 0.8 * 0.02);
  CHECK(var < 1.2 * 0.02);
  for (double b : net.layers[0].b) CHECK(b == 0.0);
}

TEST_CASE("serialization roundtrips bitwise") {
  Net net = init_net({6, 9, 6}, InitScheme::Xavier, 31415, true);
  auto blob = serialize_net(net);
  Net back = deserialize_net(blob);
  CHECK(serialize_net(back) == blob);
  CHECK(back.residual == net.residual);

  auto corrupt = blob;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(deserialize_net(corrupt), LdcError);

  auto cut = blob;
  cut.resize(cut.size() / 2);
  CHECK_THROWS_AS(deserialize_net(cut), LdcError);
}

TEST_CASE("stale cache is rejected") {
  Net net = init_net({4, 4}, InitScheme::He, 8);
  Matrix x = random_matrix(3, 4, 51);
  ForwardCache cache;
  forward(net, x, &cache);
  CHECK_THROWS_AS(backward(net, cache, Matrix(2, 4)), LdcError);  // wrong batch
  cache.pre.clear();
  CHECK_THROWS_AS(backward(net, cache, Matrix(3, 4)), LdcError);  // missing layers
}

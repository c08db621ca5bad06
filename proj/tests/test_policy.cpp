// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/policy.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ctrlode/rng.hpp"
#include "support/finite_diff.hpp"

using namespace ctrlode;
namespace fdt = ctrlode::testing;

namespace {

const Vector kVdpLb = (Vector(1) << -0.3).finished();
const Vector kVdpUb = (Vector(1) << 1.0).finished();

PolicyNetwork random_net(const std::vector<int>& sizes, const Vector& lb,
                         const Vector& ub, std::uint64_t seed) {
  return PolicyNetwork::glorot(sizes, lb, ub, seed);
}

}  // namespace

TEST_CASE("glorot initialization") {
  const PolicyNetwork net = random_net({2, 16, 16, 1}, kVdpLb, kVdpUb, 7);

  SUBCASE("biases are exactly zero") {
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
      CHECK(net.layer(i).b.isZero(0.0));
    }
  }
  SUBCASE("hidden 16->16 weights stay inside the gain bound") {
    // b = (5/3) * sqrt(6/32)
    const double bound = 0.7216878364870322;
    const Matrix& W = net.layer(1).W;
    CHECK(W.cwiseAbs().maxCoeff() <= bound);
    CHECK(W.cwiseAbs().maxCoeff() > 0.5 * bound);  // not degenerate
  }
  SUBCASE("output layer uses gain 1") {
    const double bound = std::sqrt(6.0 / 17.0);
    CHECK(net.layer(2).W.cwiseAbs().maxCoeff() <= bound);
  }
  SUBCASE("same seed gives identical networks") {
    const PolicyNetwork again = random_net({2, 16, 16, 1}, kVdpLb, kVdpUb, 7);
    CHECK(net.params() == again.params());
  }
  SUBCASE("different streams differ") {
    const PolicyNetwork other = random_net({2, 16, 16, 1}, kVdpLb, kVdpUb,
                                           Rng::split(7, 1));
    CHECK(net.params() != other.params());
  }
}

TEST_CASE("parameter counts of the case-study architectures") {
  CHECK(random_net({2, 16, 16, 1}, kVdpLb, kVdpUb, 1).param_count() == 337);
  const Vector lb2 = (Vector(2) << 120.0, 0.0).finished();
  const Vector ub2 = (Vector(2) << 400.0, 40.0).finished();
  CHECK(random_net({3, 16, 16, 2}, lb2, ub2, 1).param_count() == 370);
}

TEST_CASE("invalid shapes are rejected") {
  CHECK_THROWS_AS(PolicyNetwork({2, 1}, kVdpLb, kVdpUb), InvalidShape);
  CHECK_THROWS_AS(PolicyNetwork({2, 0, 1}, kVdpLb, kVdpUb), InvalidShape);
  CHECK_THROWS_AS(
      PolicyNetwork({2, 4, 1}, (Vector(1) << 1.0).finished(),
                    (Vector(1) << -0.3).finished()),
      ConfigError);
}

TEST_CASE("forward pass") {
  SUBCASE("zero parameters give the mid-range control") {
    const PolicyNetwork net({2, 16, 16, 1}, kVdpLb, kVdpUb);
    const Vector u = net.forward((Vector(2) << 0.7, -1.3).finished());
    CHECK(u[0] == doctest::Approx(0.35).epsilon(1e-15));
  }
  SUBCASE("saturated output hits the upper bound") {
    PolicyNetwork net({2, 4, 1}, kVdpLb, kVdpUb);
    Vector p = net.params();
    p[p.size() - 1] = 1e3;  // output bias
    net.set_params(p);
    const Vector u = net.forward(Vector::Zero(2));
    CHECK(u[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("random networks respect the bounds") {
    Rng rng(123);
    for (int trial = 0; trial < 300; ++trial) {
      const PolicyNetwork net =
          random_net({2, 16, 16, 1}, kVdpLb, kVdpUb, rng.next_u64());
      Vector x(2);
      x << rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0);
      const Vector u = net.forward(x);
      CHECK(u[0] >= -0.3);
      CHECK(u[0] <= 1.0);
    }
  }
  SUBCASE("dimension mismatch throws") {
    const PolicyNetwork net({2, 4, 1}, kVdpLb, kVdpUb);
    CHECK_THROWS_AS(net.forward(Vector::Zero(3)), DimensionMismatch);
    CHECK_THROWS_AS(net.vjp_input(Vector::Zero(2), Vector::Zero(2)),
                    DimensionMismatch);
  }
}

TEST_CASE("vjp basics") {
  const PolicyNetwork net = random_net({2, 16, 16, 1}, kVdpLb, kVdpUb, 99);
  const Vector x = (Vector(2) << 0.4, -0.8).finished();

  SUBCASE("zero covector maps to zero") {
    CHECK(net.vjp_input(x, Vector::Zero(1)).isZero(0.0));
    CHECK(net.vjp_params(x, Vector::Zero(1)).isZero(0.0));
  }
  SUBCASE("linearity to floating precision") {
    Vector w1 = (Vector(1) << 0.7).finished();
    Vector w2 = (Vector(1) << -1.3).finished();
    const double a = 2.5, b = -0.75;
    const Vector lhs = net.vjp_input(x, a * w1 + b * w2);
    const Vector rhs = a * net.vjp_input(x, w1) + b * net.vjp_input(x, w2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    const Vector lp = net.vjp_params(x, a * w1 + b * w2);
    const Vector rp = a * net.vjp_params(x, w1) + b * net.vjp_params(x, w2);
    CHECK((lp - rp).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("chain-rule base case at the origin") {
  // Zero biases and x = 0 keep every tanh at 0 (slope 1), so the input VJP
  // collapses to (ub-lb) * sigma'(0) * w^T W2 W1.
  PolicyNetwork net({2, 2, 1}, kVdpLb, kVdpUb);
  Matrix W1(2, 2), W2(1, 2);
  W1 << 0.3, -0.2, 0.5, 0.7;
  W2 << 1.1, -0.4;
  Vector p(net.param_count());
  p << 0.3, -0.2, 0.5, 0.7, 0.0, 0.0, 1.1, -0.4, 0.0;
  net.set_params(p);
  const Vector w = (Vector(1) << 2.0).finished();
  const Vector gx = net.vjp_input(Vector::Zero(2), w);
  const Vector expected =
      (1.3 * 0.25 * 2.0) * (W2 * W1).transpose();  // range * sigma'(0) * w
  CHECK((gx - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("output-layer bias gradient matches the hand chain rule") {
  // For the last-layer bias, w^T dpi/db = w * (ub-lb) * sigma'(z).
  PolicyNetwork net({2, 3, 1}, kVdpLb, kVdpUb);
  Vector p = Vector::Zero(net.param_count());
  p[p.size() - 1] = 0.37;  // output bias only
  net.set_params(p);
  const Vector x = (Vector(2) << 0.1, -0.2).finished();
  const Vector w = (Vector(1) << 1.4).finished();
  const Vector gp = net.vjp_params(x, w);
  const double s = sigmoid(0.37);
  CHECK(gp[gp.size() - 1] ==
        doctest::Approx(1.4 * 1.3 * s * (1.0 - s)).epsilon(1e-14));
}

TEST_CASE("both vjps agree with central differences") {
  Rng rng(2024);
  double worst_in = 0.0, worst_par = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<int> sizes = trial % 2 ? std::vector<int>{3, 8, 5, 2}
                                             : std::vector<int>{2, 16, 16, 1};
    const int n_u = sizes.back();
    Vector lb(n_u), ub(n_u);
    for (int i = 0; i < n_u; ++i) {
      lb[i] = rng.uniform(-2.0, 0.0);
      ub[i] = lb[i] + rng.uniform(0.5, 3.0);
    }
    const PolicyNetwork net = random_net(sizes, lb, ub, rng.next_u64());
    Vector x(sizes.front());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(-2.0, 2.0);
    Vector w(n_u);
    for (int i = 0; i < n_u; ++i) w[i] = rng.uniform(-2.0, 2.0);

    // FD noise drowns per-entry ratios on near-zero entries, so the
    // agreement is measured in the vector inf-norm.
    const Vector gx = net.vjp_input(x, w);
    const Vector fd_x = fdt::central_gradient(
        [&](const Vector& xi) { return w.dot(net.forward(xi)); }, x);
    worst_in = std::max(
        worst_in, (gx - fd_x).cwiseAbs().maxCoeff() /
                      std::max({gx.cwiseAbs().maxCoeff(),
                                fd_x.cwiseAbs().maxCoeff(), 1e-6}));

    const Vector gp = net.vjp_params(x, w);
    PolicyNetwork probe = net;
    const Vector fd_p = fdt::central_gradient(
        [&](const Vector& th) {
          probe.set_params(th);
          return w.dot(probe.forward(x));
        },
        net.params());
    worst_par = std::max(
        worst_par, (gp - fd_p).cwiseAbs().maxCoeff() /
                       std::max({gp.cwiseAbs().maxCoeff(),
                                 fd_p.cwiseAbs().maxCoeff(), 1e-6}));
  }
  CHECK(worst_in < 1e-5);
  CHECK(worst_par < 1e-5);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const PolicyNetwork net = random_net({3, 16, 16, 2},
                                       (Vector(2) << 120.0, 0.0).finished(),
                                       (Vector(2) << 400.0, 40.0).finished(),
                                       0xBEEF);
  const auto path =
      (std::filesystem::temp_directory_path() / "ctrlode_ckpt_test.json")
          .string();
  net.save(path);
  const PolicyNetwork loaded = PolicyNetwork::load(path);
  CHECK(loaded.params() == net.params());
  CHECK(loaded.layer_sizes() == net.layer_sizes());
  CHECK(loaded.lower_bounds() == net.lower_bounds());
  CHECK(loaded.upper_bounds() == net.upper_bounds());
  CHECK(loaded.init_seed() == net.init_seed());
  std::filesystem::remove(path);
}

TEST_CASE("flatten/unflatten round trip is bit exact") {
  PolicyNetwork net = random_net({2, 16, 16, 1}, kVdpLb, kVdpUb, 5);
  const Vector p = net.params();
  net.set_params(p);
  CHECK(net.params() == p);
}

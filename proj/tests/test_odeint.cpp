// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/odeint.hpp"

#include <doctest.h>

#include <cmath>

#include "ctrlode/rng.hpp"

using namespace ctrlode;

namespace {

const VectorField kZeroField = [](double, const Vector&, Vector& dx) {
  dx.setZero();
};
const VectorField kExpField = [](double, const Vector& x, Vector& dx) {
  dx = x;
};

Vector scalar(double v) { return (Vector(1) << v).finished(); }

constexpr double kE = 2.718281828459045;

}  // namespace

TEST_CASE("zero field keeps the state constant") {
  Vector c = (Vector(3) << 1.5, -2.0, 7.0).finished();
  Vector dx(3);
  const Trajectory traj = integrate(kZeroField, c, 0.0, 3.0);
  for (const auto& s : traj.states()) CHECK(s == c);
  CHECK(traj.eval(1.234567) == c);
}

TEST_CASE("exponential growth hits e at t=1") {
  IntegratorConfig cfg;
  cfg.rtol = 1e-8;
  cfg.atol = 1e-10;
  const Trajectory traj = integrate(kExpField, scalar(1.0), 0.0, 1.0, cfg);
  CHECK(traj.states().back()[0] == doctest::Approx(kE).epsilon(1e-6));
  CHECK(traj.states().front()[0] == 1.0);  // initial condition bit-exact
  CHECK(traj.t_start() == 0.0);
  CHECK(traj.t_end() == 1.0);
}

TEST_CASE("backward integration recovers the initial point") {
  IntegratorConfig cfg;
  cfg.rtol = 1e-8;
  cfg.atol = 1e-10;
  // Same field, decreasing span: x' = x through (1, e) gives x(0) = 1.
  const Trajectory back = integrate(kExpField, scalar(kE), 1.0, 0.0, cfg);
  CHECK(back.states().back()[0] == doctest::Approx(1.0).epsilon(1e-6));
  // Equivalent formulation: negated field forward in reversed time.
  const VectorField neg = [](double, const Vector& x, Vector& dx) { dx = -x; };
  const Trajectory fwd = integrate(neg, scalar(kE), 0.0, 1.0, cfg);
  CHECK(fwd.states().back()[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("dense output") {
  const Trajectory traj = integrate(kExpField, scalar(1.0), 0.0, 1.0);

  SUBCASE("mesh points reproduce stored states exactly") {
    for (std::size_t k = 0; k < traj.mesh().size(); ++k) {
      CHECK(traj.eval(traj.mesh()[k]) == traj.states()[k]);
    }
  }
  SUBCASE("boundary returns x0") {
    CHECK(traj.eval(0.0)[0] == 1.0);
  }
  SUBCASE("interior value matches the analytic solution") {
    CHECK(traj.eval(0.5)[0] == doctest::Approx(std::exp(0.5)).epsilon(1e-5));
  }
  SUBCASE("outside the span throws") {
    CHECK_THROWS_AS(traj.eval(-0.1), OutOfDomain);
    CHECK_THROWS_AS(traj.eval(1.1), OutOfDomain);
  }
}

TEST_CASE("tolerance tightening never hurts and reaches 1e-8 at rtol=1e-10") {
  double prev_err = std::numeric_limits<double>::infinity();
  for (double tol : {1e-4, 5e-5, 2.5e-5, 1e-6, 1e-8, 1e-10}) {
    IntegratorConfig cfg;
    cfg.rtol = tol;
    cfg.atol = tol * 1e-2;
    const Trajectory traj = integrate(kExpField, scalar(1.0), 0.0, 1.0, cfg);
    const double err = std::abs(traj.states().back()[0] - kE);
    CHECK(err <= prev_err * (1.0 + 1e-12));
    prev_err = err;
    if (tol == 1e-10) CHECK(err < 1e-8);
  }
}

TEST_CASE("forward/backward round trip returns near x0") {
  IntegratorConfig cfg;
  const VectorField vdp_like = [](double, const Vector& x, Vector& dx) {
    dx.resize(2);
    dx[0] = x[0] * (1.0 - x[1] * x[1]) - x[1];
    dx[1] = x[0];
  };
  Vector x0 = (Vector(2) << 0.3, 1.1).finished();
  const Trajectory fwd = integrate(vdp_like, x0, 0.0, 4.0, cfg);
  const Trajectory back =
      integrate(vdp_like, fwd.states().back(), 4.0, 0.0, cfg);
  const double tol = 10.0 * (cfg.atol + cfg.rtol * x0.norm());
  CHECK((back.states().back() - x0).norm() <= tol);
}

TEST_CASE("dense output error stays within 100x the endpoint error") {
  IntegratorConfig cfg;
  cfg.rtol = 1e-7;
  cfg.atol = 1e-9;
  const Trajectory traj = integrate(kExpField, scalar(1.0), 0.0, 1.0, cfg);
  const double end_err =
      std::max(std::abs(traj.states().back()[0] - kE), 1e-14);
  Rng rng(42);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform(0.0, 1.0);
    worst = std::max(worst, std::abs(traj.eval(t)[0] - std::exp(t)));
  }
  CHECK(worst < 100.0 * end_err);
}

TEST_CASE("step budget is enforced") {
  IntegratorConfig cfg;
  cfg.max_steps = 5;
  cfg.rtol = 1e-12;
  cfg.atol = 1e-14;
  const VectorField stiffish = [](double t, const Vector& x, Vector& dx) {
    dx[0] = std::cos(40.0 * t) * x[0];
  };
  CHECK_THROWS_AS(integrate(stiffish, scalar(1.0), 0.0, 10.0, cfg),
                  StepBudgetExceeded);
}

TEST_CASE("diverging fields surface as errors") {
  const VectorField blowup = [](double, const Vector& x, Vector& dx) {
    dx[0] = x[0] * x[0];
  };
  SUBCASE("overflow to inf reports a non-finite state") {
    // x' = x^2 from 1e200 overflows on the first stage.
    CHECK_THROWS_AS(integrate(blowup, scalar(1e200), 0.0, 2.0),
                    NonFiniteState);
  }
  SUBCASE("a finite-time singularity exhausts the step size") {
    // x' = x^2 from 1 escapes at t=1; the state stays finite while the
    // step shrinks to nothing trying to resolve it.
    CHECK_THROWS_AS(integrate(blowup, scalar(1.0), 0.0, 2.0),
                    StepSizeUnderflow);
  }
}

TEST_CASE("config validation") {
  IntegratorConfig cfg;
  cfg.rtol = 0.0;
  CHECK_THROWS_AS(integrate(kZeroField, scalar(1.0), 0.0, 1.0, cfg),
                  ConfigError);
  cfg = {};
  CHECK_THROWS_AS(integrate(kZeroField, scalar(1.0), 1.0, 1.0, cfg),
                  ConfigError);
  CHECK_THROWS_AS(
      integrate(kZeroField, scalar(std::nan("")), 0.0, 1.0, cfg),
      NonFiniteState);
}

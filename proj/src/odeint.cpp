// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctrlode {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 4.0 / 5.0,
                 kC5 = 8.0 / 9.0;

constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                 kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0,
                 kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                 kA65 = -5103.0 / 18656.0;
// 5th-order weights (also the last stage row; the pair is FSAL).
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
// Error weights, b5 - b4.
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0,
                 kE4 = 71.0 / 1920.0, kE5 = -17253.0 / 339200.0,
                 kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;
// Dense-output weights for the r5 polynomial coefficient.
constexpr double kD1 = -12715105075.0 / 11282082432.0,
                 kD3 = 87487479700.0 / 32700410799.0,
                 kD4 = -10690763975.0 / 1880347072.0,
                 kD5 = 701980252875.0 / 199316789632.0,
                 kD6 = -1453857185.0 / 822651844.0,
                 kD7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kShrinkLimit = 0.2;
constexpr double kGrowLimit = 5.0;
constexpr int kOrder = 5;

double scaled_rms(const Vector& v, const Vector& scale) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double q = v[i] / scale[i];
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

// Classic two-evaluation guess for the first step magnitude.
double initial_step(const VectorField& rhs, double t0, const Vector& x0,
                    const Vector& f0, double dir, double h_cap,
                    const IntegratorConfig& cfg, IntegratorStats& stats) {
  Vector scale = (cfg.atol + cfg.rtol * x0.cwiseAbs().array()).matrix();
  const double d0 = scaled_rms(x0, scale);
  const double d1 = scaled_rms(f0, scale);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
  h0 = std::min(h0, h_cap);

  Vector x1 = x0 + dir * h0 * f0;
  Vector f1(x0.size());
  rhs(t0 + dir * h0, x1, f1);
  ++stats.n_rhs;
  double d2 = 0.0;
  if (f1.allFinite()) {
    d2 = scaled_rms(f1 - f0, scale) / h0;
  }

  double h1;
  if (std::max(d1, d2) <= 1e-15) {
    h1 = std::max(1e-6, h0 * 1e-3);
  } else {
    h1 = std::pow(0.01 / std::max(d1, d2), 1.0 / kOrder);
  }
  return std::min({100.0 * h0, h1, h_cap});
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rtol > 0.0)) throw ConfigError("integrator rtol must be positive");
  if (!(atol > 0.0)) throw ConfigError("integrator atol must be positive");
  if (h_max < 0.0) throw ConfigError("integrator h_max must be nonnegative");
  if (h_init < 0.0) throw ConfigError("integrator h_init must be nonnegative");
  if (max_steps < 1) throw ConfigError("integrator max_steps must be >= 1");
}

void DenseStep::eval_into(double t, Vector& out) const {
  const double theta = (t - t0) / h;
  const double theta1 = 1.0 - theta;
  out = r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
}

std::size_t Trajectory::locate_step(double t) const {
  const double dir = (mesh_.back() >= mesh_.front()) ? 1.0 : -1.0;
  const double span = std::abs(mesh_.back() - mesh_.front());
  const double slack =
      16.0 * std::numeric_limits<double>::epsilon() *
      std::max({1.0, span, std::abs(mesh_.front()), std::abs(mesh_.back())});
  if (dir * (t - mesh_.front()) < -slack || dir * (t - mesh_.back()) > slack) {
    throw OutOfDomain("eval time outside the integrated span");
  }
  // Binary search for the step whose [mesh[k], mesh[k+1]] brackets t.
  std::size_t lo = 0, hi = steps_.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (dir * (t - mesh_[mid + 1]) > 0.0) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo;
}

void Trajectory::eval_into(double t, Vector& out) const {
  if (steps_.empty()) throw OutOfDomain("empty trajectory");
  const std::size_t k = locate_step(t);
  // Mesh points reproduce stored states exactly.
  if (t == mesh_[k]) {
    out = states_[k];
    return;
  }
  if (t == mesh_[k + 1]) {
    out = states_[k + 1];
    return;
  }
  steps_[k].eval_into(t, out);
}

Vector Trajectory::eval(double t) const {
  Vector out;
  eval_into(t, out);
  return out;
}

Trajectory integrate(const VectorField& rhs, const Vector& x0, double t_a,
                     double t_b, const IntegratorConfig& cfg) {
  cfg.validate();
  if (x0.size() == 0) throw DimensionMismatch("empty initial state");
  if (!x0.allFinite()) throw NonFiniteState("non-finite initial state");
  if (t_a == t_b) throw ConfigError("degenerate integration span");

  const Eigen::Index n = x0.size();
  const double dir = (t_b > t_a) ? 1.0 : -1.0;
  const double span = std::abs(t_b - t_a);
  const double h_cap = (cfg.h_max > 0.0) ? std::min(cfg.h_max, span) : span;

  Trajectory traj;
  traj.mesh_.push_back(t_a);
  traj.states_.push_back(x0);

  Vector x = x0;
  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  Vector xtmp(n), xnew(n), err(n), scale(n);

  double t = t_a;
  rhs(t, x, k1);
  ++traj.stats_.n_rhs;
  if (!k1.allFinite()) throw NonFiniteState("non-finite rhs at initial state");

  double h_mag = (cfg.h_init > 0.0)
                     ? std::min(cfg.h_init, h_cap)
                     : initial_step(rhs, t, x, k1, dir, h_cap, cfg, traj.stats_);

  bool last_failure_nonfinite = false;
  long steps = 0;
  while (dir * (t_b - t) > 0.0) {
    if (steps++ >= cfg.max_steps) {
      throw StepBudgetExceeded("integrator exceeded max_steps (" +
                               std::to_string(cfg.max_steps) + ")");
    }
    h_mag = std::min(h_mag, h_cap);
    const double h_min =
        16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h_mag < h_min) {
      if (last_failure_nonfinite) {
        throw NonFiniteState("state became non-finite during integration");
      }
      throw StepSizeUnderflow("step size underflow at t = " + std::to_string(t));
    }
    double h = dir * h_mag;
    // Clamp the final step onto the endpoint.
    if (dir * (t + h - t_b) > 0.0) {
      h = t_b - t;
      h_mag = std::abs(h);
    }

    xtmp = x + h * (kA21 * k1);
    rhs(t + kC2 * h, xtmp, k2);
    xtmp = x + h * (kA31 * k1 + kA32 * k2);
    rhs(t + kC3 * h, xtmp, k3);
    xtmp = x + h * (kA41 * k1 + kA42 * k2 + kA43 * k3);
    rhs(t + kC4 * h, xtmp, k4);
    xtmp = x + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4);
    rhs(t + kC5 * h, xtmp, k5);
    xtmp = x + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5);
    rhs(t + h, xtmp, k6);
    xnew = x + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
    rhs(t + h, xnew, k7);
    traj.stats_.n_rhs += 6;

    if (!xnew.allFinite() || !k7.allFinite()) {
      // Shrink hard and retry; reported as NonFiniteState if the step underflows.
      ++traj.stats_.n_rejected;
      last_failure_nonfinite = true;
      h_mag *= kShrinkLimit;
      continue;
    }

    err = h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);
    for (Eigen::Index i = 0; i < n; ++i) {
      scale[i] = cfg.atol + cfg.rtol * std::max(std::abs(x[i]), std::abs(xnew[i]));
    }
    const double err_norm = scaled_rms(err, scale);

    if (!(err_norm <= 1.0)) {
      ++traj.stats_.n_rejected;
      last_failure_nonfinite = !std::isfinite(err_norm);
      const double fac = std::isfinite(err_norm)
                             ? std::max(kShrinkLimit,
                                        kSafety * std::pow(err_norm, -1.0 / kOrder))
                             : kShrinkLimit;
      h_mag *= fac;
      continue;
    }

    // Accepted: record the dense polynomial for [t, t+h].
    DenseStep ds;
    ds.t0 = t;
    ds.h = h;
    ds.r1 = x;
    ds.r2 = xnew - x;
    ds.r3 = h * k1 - ds.r2;
    ds.r4 = ds.r2 - h * k7 - ds.r3;
    ds.r5 = h * (kD1 * k1 + kD3 * k3 + kD4 * k4 + kD5 * k5 + kD6 * k6 + kD7 * k7);
    traj.steps_.push_back(std::move(ds));

    t += h;
    x.swap(xnew);
    k1.swap(k7);  // FSAL
    traj.mesh_.push_back(t);
    traj.states_.push_back(x);
    ++traj.stats_.n_accepted;
    last_failure_nonfinite = false;

    double fac = kGrowLimit;
    if (err_norm > 0.0) {
      fac = std::clamp(kSafety * std::pow(err_norm, -1.0 / kOrder),
                       kShrinkLimit, kGrowLimit);
    }
    h_mag = std::abs(h) * fac;
  }

  return traj;
}

}  // namespace ctrlode

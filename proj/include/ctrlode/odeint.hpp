// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "ctrlode/errors.hpp"

namespace ctrlode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Right-hand side of an ODE, written into `dx` in place.
using VectorField =
    std::function<void(double t, const Vector& x, Vector& dx)>;

/// Tolerance and budget knobs for the adaptive integrator.
struct IntegratorConfig {
  double rtol = 1e-6;      ///< relative tolerance
  double atol = 1e-8;      ///< absolute tolerance (state units)
  double h_init = 0.0;     ///< initial step magnitude; 0 selects automatically
  double h_max = 0.0;      ///< maximum step magnitude; 0 means the span width
  long max_steps = 100000; ///< combined accepted+rejected step budget

  /// Throws ConfigError unless rtol > 0, atol > 0, h_max >= 0, max_steps >= 1.
  void validate() const;
};

struct IntegratorStats {
  long n_rhs = 0;
  long n_accepted = 0;
  long n_rejected = 0;
};

/// Dense-output coefficients of one accepted Dormand-Prince step.
///
/// The interpolant is the standard 4th-order polynomial of the DP5(4) pair,
/// evaluated as
///   x(t0+theta*h) = r1 + theta*(r2 + (1-theta)*(r3 + theta*(r4 + (1-theta)*r5)))
struct DenseStep {
  double t0 = 0.0;  ///< step start time
  double h = 0.0;   ///< signed step width; the step covers [t0, t0+h]
  Vector r1, r2, r3, r4, r5;

  void eval_into(double t, Vector& out) const;
};

/// Continuous solution x(t) over an integration span.
///
/// Holds the accepted mesh, the states at the mesh points and one dense-output
/// polynomial per step, so the path is evaluable anywhere inside the span
/// without extrapolation. The mesh is strictly monotone: increasing for
/// forward runs, decreasing for backward runs.
class Trajectory {
 public:
  Trajectory() = default;

  double t_start() const { return mesh_.front(); }
  double t_end() const { return mesh_.back(); }
  Eigen::Index dim() const { return states_.empty() ? 0 : states_.front().size(); }
  std::size_t step_count() const { return steps_.size(); }

  const std::vector<double>& mesh() const { return mesh_; }
  const std::vector<Vector>& states() const { return states_; }
  const IntegratorStats& stats() const { return stats_; }

  /// Interpolated state at time t. Mesh points reproduce the stored state
  /// exactly. Throws OutOfDomain for t outside the span (a slack of a few
  /// ulps of the span width is tolerated and clamped).
  Vector eval(double t) const;
  void eval_into(double t, Vector& out) const;

 private:
  friend Trajectory integrate(const VectorField&, const Vector&, double,
                              double, const IntegratorConfig&);

  std::size_t locate_step(double t) const;

  std::vector<double> mesh_;
  std::vector<Vector> states_;
  std::vector<DenseStep> steps_;
  IntegratorStats stats_;
};

/// Integrates dx/dt = rhs(t, x) from t_a to t_b with the Dormand-Prince 5(4)
/// embedded pair and returns the dense solution.
///
/// t_a > t_b runs the same stepper with negative steps (backward in time).
/// Per-step local error satisfies the mixed componentwise test
/// |err_i| <= atol + rtol*|x_i| in the RMS sense.
///
/// Throws StepBudgetExceeded, NonFiniteState or StepSizeUnderflow on failure.
Trajectory integrate(const VectorField& rhs, const Vector& x0, double t_a,
                     double t_b, const IntegratorConfig& cfg = {});

}  // namespace ctrlode

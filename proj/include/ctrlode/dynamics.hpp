// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctrlode/odeint.hpp"
#include "ctrlode/policy.hpp"

namespace ctrlode {

/// Scalar inequality in margin form: the point is feasible iff h >= 0.
struct PathConstraint {
  std::string label;
  std::function<double(const Vector& x, const Vector& u)> h;
  std::function<Vector(const Vector& x, const Vector& u)> h_x;  ///< n_x gradient
  std::function<Vector(const Vector& x, const Vector& u)> h_u;  ///< n_u gradient
  double scale = 1.0;  ///< typical margin magnitude, used for feasibility slack
};

/// Terminal-state inequality in margin form, h(x(t_f)) >= 0.
struct TerminalConstraint {
  std::string label;
  std::function<double(const Vector& x)> h;
  std::function<Vector(const Vector& x)> h_x;
  double scale = 1.0;
};

/// Continuous-time Bolza problem: dynamics f, running cost l, terminal cost
/// phi, span, initial state, control bounds and inequality constraints.
///
/// Derivative fields hold exact analytic partials; the adjoint pass is only
/// as good as these, so each catalog problem ships hand-coded Jacobians
/// guarded by finite-difference tests. Immutable after construction; safe to
/// share across threads.
struct ControlProblem {
  std::string name;
  int n_x = 0;
  int n_u = 0;
  Vector x0;
  double t0 = 0.0;
  double tf = 0.0;
  Vector u_lb, u_ub;

  std::function<void(const Vector& x, const Vector& u, double t, Vector& dx)> f;
  std::function<Matrix(const Vector& x, const Vector& u, double t)> f_x;
  std::function<Matrix(const Vector& x, const Vector& u, double t)> f_u;

  std::function<double(const Vector& x, const Vector& u, double t)> l;
  std::function<void(const Vector& x, const Vector& u, double t, Vector& lx,
                     Vector& lu)>
      l_grad;

  std::function<double(const Vector& x)> phi;
  std::function<Vector(const Vector& x)> phi_x;

  std::vector<PathConstraint> constraints;
  std::vector<TerminalConstraint> terminal_constraints;

  /// Diagnostic split of a penalized cost: the un-penalized running and
  /// terminal parts. Unset on base problems.
  std::function<double(const Vector& x, const Vector& u, double t)> l_diag;
  std::function<double(const Vector& x)> phi_diag;

  /// Integrator atol suited to the state magnitudes of this problem.
  double recommended_atol = 1e-8;

  Vector control_midpoint() const { return 0.5 * (u_lb + u_ub); }
};

/// Closed-loop vector field (t, x) -> f(x, pi(x), t); the policy is evaluated
/// at every RHS call. Throws DimensionMismatch if net does not fit prob.
VectorField closed_loop_rhs(const ControlProblem& prob,
                            const PolicyNetwork& net);

/// Exact partials of f at (x, u, t).
Matrix jac_x(const ControlProblem& prob, const Vector& x, const Vector& u,
             double t);
Matrix jac_u(const ControlProblem& prob, const Vector& x, const Vector& u,
             double t);

/// Exact partials of the running cost (including any active barrier terms).
void cost_partials(const ControlProblem& prob, const Vector& x,
                   const Vector& u, double t, Vector& lx, Vector& lu);

/// Constrained Van der Pol oscillator: span [0,5], x0=(0,1),
/// l = x1^2 + x2^2 + u^2, margin x1 + 0.4 >= 0, u in [-0.3, 1], phi = 0.
ControlProblem make_vdp();

/// Photoproduction bioreactor parameters (defaults are the source values).
struct BioreactorParams {
  double u_m = 0.0572;
  double u_d = 0.0;
  double K_N = 393.1;
  double Y_NX = 504.5;
  double k_m = 0.00016;
  double k_d = 0.281;
  double k_s = 178.9;
  double k_i = 447.1;
  double k_sq = 23.51;
  double k_iq = 800.0;
  double K_Np = 16.89;
};

/// Fed-batch bioreactor: states (C_X, C_N, C_qc), controls (I, F_N).
/// Maximizes the terminal bioproduct C_qc(t_f), encoded as phi = -C_qc(t_f),
/// with running margins 800 - C_N >= 0 and 0.3 - (0.011*C_X - C_qc) >= 0,
/// terminal margin 150 - C_N(t_f) >= 0, and control box I in [120,400],
/// F_N in [0,40]. The batch time t_f is a required model choice.
ControlProblem make_bioreactor(const BioreactorParams& params = {},
                               double tf = 240.0);

}  // namespace ctrlode

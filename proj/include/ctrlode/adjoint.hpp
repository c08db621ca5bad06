// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ctrlode/dynamics.hpp"
#include "ctrlode/odeint.hpp"
#include "ctrlode/policy.hpp"

namespace ctrlode {

/// Closed-loop rollout with the running cost accumulated alongside the state.
///
/// The stored trajectory is over the augmented vector [x; c] (plus a second
/// accumulator [x; c; c_diag] when the problem carries a diagnostic cost
/// split); x is the leading n_x block.
struct Simulation {
  Trajectory traj;
  double cost = 0.0;           ///< c(t_f) + phi(x(t_f))
  double running_cost = 0.0;   ///< c(t_f)
  double terminal_cost = 0.0;  ///< phi(x(t_f))
  double objective = 0.0;      ///< un-penalized part (== cost on base problems)
  double penalty = 0.0;        ///< cost - objective
};

Simulation simulate(const ControlProblem& prob, const PolicyNetwork& net,
                    const IntegratorConfig& cfg = {});

/// Cost and parameter gradient from one forward/backward sweep.
struct GradientResult {
  double cost = 0.0;
  Vector grad;            ///< dJ/dtheta, flattened in parameter order
  Trajectory forward;     ///< augmented forward solution (see Simulation)
  long adjoint_steps = 0; ///< accepted steps of the backward pass
  Vector lambda0;         ///< adjoint vector at t0
  IntegratorStats forward_stats;
  IntegratorStats adjoint_stats;
  double objective = 0.0;
  double penalty = 0.0;
};

/// Computes J and J_theta: forward solve stored as a dense interpolant, then
/// one backward solve of the extended system [lambda; J_theta] with
/// d lambda/dt = -H_x, lambda(t_f) = phi_x(x(t_f)), d J_theta/dt = -H_theta.
/// H partials are assembled from the problem's analytic Jacobians and the
/// policy's VJPs; H itself is never materialized.
///
/// Throws NonFiniteAdjoint if the adjoint diverges, and propagates
/// integrator errors from either pass.
GradientResult grad(const ControlProblem& prob, const PolicyNetwork& net,
                    const IntegratorConfig& cfg = {});

/// Cross-check variant: solves the adjoint alone on the backward pass, keeps
/// its interpolant, then evaluates integral(H_theta dt) with adaptive
/// quadrature over both interpolants. Exists as an independent oracle for
/// grad(); prefer grad() everywhere else.
Vector grad_via_quadrature(const ControlProblem& prob,
                           const PolicyNetwork& net,
                           const IntegratorConfig& cfg = {});

}  // namespace ctrlode

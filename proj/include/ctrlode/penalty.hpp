// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "ctrlode/dynamics.hpp"

namespace ctrlode {

/// Weight and relaxation of one barrier term. Both stay positive; across
/// optimization rounds delta shrinks (or alpha grows).
struct BarrierParams {
  double alpha = 1.0;  ///< penalty weight (cost units per log-margin)
  double delta = 1.0;  ///< relaxation width (margin units)
};

/// Outer-loop update policy for the barrier parameters.
struct BarrierSchedule {
  double delta_rate = 0.55;   ///< multiplicative delta decrease per round, in (0,1)
  double alpha_rate = 2.0;    ///< multiplicative alpha increase on stalled rounds
  double target_ratio = 0.05; ///< desired penalty/objective ratio at round start
  int max_rounds = 12;
  double delta_floor = 1e-6;
  double stall_tol = 1e-4;  ///< relative loss decrease below which a round stalls

  void validate() const;
};

/// Relaxed logarithmic barrier P(z; delta): -ln z inside the margin
/// (z > delta), continued by the truncated exponential
/// beta(z; delta) = exp(1 - z/delta) - 1 - ln(delta) for z <= delta.
/// Total and C^1 on finite z; the caller multiplies by alpha.
///
/// Far outside the feasible region (z < delta*(1 - 30)) the exponent is
/// frozen and the barrier continued linearly so the value and slope stay
/// finite in double precision; the continuation keeps the function C^1 and
/// strictly decreasing.
double relaxed_log(double z, const BarrierParams& p);

/// dP/dz: -1/z for z > delta, -(1/delta)*exp(1 - z/delta) below; both
/// branches equal -1/delta at z = delta.
double relaxed_log_deriv(double z, const BarrierParams& p);

/// Returns a problem whose running cost adds sum_i alpha_i*P(h_i(x,u); delta_i)
/// over the path constraints and whose terminal cost adds the analogous terms
/// for terminal constraints. `params` is ordered path constraints first, then
/// terminal constraints. Cost partials include the barrier derivatives. The
/// original costs are kept as the l_diag/phi_diag split for reporting.
ControlProblem penalized_problem(const ControlProblem& prob,
                                 const std::vector<BarrierParams>& params);

/// Outcome of one optimization round, input to the schedule update.
struct RoundReport {
  double objective = 0.0;  ///< un-penalized cost of the round's best policy
  double penalty = 0.0;    ///< total barrier term at the current parameters
  bool stalled = false;    ///< the round failed to decrease the loss
  /// Re-evaluates the total penalty of the round's final trajectory under
  /// candidate barrier parameters. Optional; without it the delta branch
  /// applies exactly one shrink.
  std::function<double(const std::vector<BarrierParams>&)> penalty_eval;
};

/// Fiacco-McCormick update: shrink every delta by delta_rate (repeating while
/// the penalty/objective ratio stays above target_ratio, down to delta_floor);
/// on a stalled round the alphas are scaled by alpha_rate instead.
std::vector<BarrierParams> update_schedule(std::vector<BarrierParams> state,
                                           const RoundReport& report,
                                           const BarrierSchedule& sched);

}  // namespace ctrlode

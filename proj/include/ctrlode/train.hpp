// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ctrlode/adjoint.hpp"
#include "ctrlode/penalty.hpp"

namespace ctrlode {

/// First-order optimizer settings. `kind` selects which fields apply.
struct OptimizerConfig {
  enum class Kind { AdamW, Lbfgs };
  Kind kind = Kind::AdamW;

  double step_size = 0.01;

  // AdamW
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  // L-BFGS with backtracking (Armijo) line search
  int memory = 10;
  double ls_backtrack = 0.5;
  double ls_c1 = 1e-4;
  int ls_max_evals = 40;

  int max_iters = 500;
  double grad_norm_tol = 1e-8;  ///< inf-norm stopping threshold

  void validate() const;
};

/// One objective evaluation. `objective`/`penalty` are a diagnostic split of
/// `cost`; plain objectives leave penalty at zero.
struct EvalResult {
  double cost = 0.0;
  Vector grad;
  double objective = 0.0;
  double penalty = 0.0;
};

using Objective = std::function<EvalResult(const Vector& theta)>;

struct IterRecord {
  int round = 0;
  int iter = 0;
  double cost = 0.0;
  double objective = 0.0;
  double penalty = 0.0;
  double grad_inf = 0.0;
  double alpha_min = 0.0;
  double delta_max = 0.0;
  double wall_ms = 0.0;
};

struct RoundRecord {
  int round = 0;
  int iters = 0;
  double loss = 0.0;  ///< penalized cost at round end
  double objective = 0.0;
  double penalty = 0.0;
  double min_margin = 0.0;
  double alpha_min = 0.0;
  double delta_max = 0.0;
  bool stalled = false;
};

/// Everything needed to audit or reproduce a run (given the config).
struct RunReport {
  std::vector<IterRecord> iters;
  std::vector<RoundRecord> rounds;
  std::string termination;
  std::uint64_t seed = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<std::string> notes;
};

/// Appends src's iteration records to dst under the given round label.
void append_report(RunReport& dst, const RunReport& src, int round,
                   double alpha_min = 0.0, double delta_max = 0.0);

/// Minimizes a deterministic objective from theta0; returns the best-seen
/// parameters (not merely the last iterate).
///
/// Terminates on max_iters, on ||grad||_inf <= grad_norm_tol, or when the
/// objective yields a non-finite value at an accepted point. Objective
/// exceptions at the starting point propagate (tagged with the iteration
/// index); later ones terminate the run and the best iterate is returned.
std::pair<Vector, RunReport> minimize(const Objective& objective,
                                      const Vector& theta0,
                                      const OptimizerConfig& cfg);

/// Adjoint-backed objective for a problem/policy pair. The policy argument
/// is a template; each evaluation loads theta into a private copy.
Objective make_objective(ControlProblem prob, PolicyNetwork net,
                         IntegratorConfig integ);

/// Reference control profile u_ref(t).
using ControlProfile = std::function<Vector(double)>;

/// Constant mid-range profile plus seeded 4-segment piecewise-constant
/// profiles, all inside the control box.
std::vector<ControlProfile> default_profile_pool(const ControlProblem& prob,
                                                 int n, std::uint64_t seed);

/// Trains the policy to track u_ref on gradually increasing time windows
/// (fractions of [t0,tf], processed in order), by minimizing the tracking
/// cost integral |pi(x) - u_ref(t)|^2 through the adjoint engine.
PolicyNetwork precondition(const ControlProblem& prob, PolicyNetwork net,
                           const ControlProfile& u_ref,
                           const std::vector<double>& windows,
                           const IntegratorConfig& integ,
                           const OptimizerConfig& opt,
                           RunReport* report = nullptr);

struct FeasibilityEntry {
  std::string label;
  double min_margin = 0.0;
  double slack = 0.0;  ///< tolerated violation depth for the verdict
};

/// Minimum constraint margins over a fine evaluation grid plus terminal
/// margins. Feasible means every margin stays above -slack.
struct FeasibilityReport {
  std::vector<FeasibilityEntry> entries;
  bool feasible() const;
  double worst_violation() const;  ///< max over entries of max(0, -margin)
};

FeasibilityReport check_feasibility(const ControlProblem& prob,
                                    const PolicyNetwork& net,
                                    const Trajectory& traj, int grid = 1001,
                                    double rel_slack = 0.01);

/// Config bundle for the training drivers.
struct TrainConfig {
  IntegratorConfig integrator;
  OptimizerConfig precond;  ///< AdamW, preconditioning stage
  OptimizerConfig adamw;    ///< AdamW, unconstrained stage
  OptimizerConfig lbfgs;    ///< L-BFGS, polish + barrier rounds
  bool polish = true;       ///< L-BFGS pass after AdamW on the true objective
  std::vector<double> windows = {0.25, 0.5, 0.75, 1.0};
  std::vector<int> hidden = {16, 16};
  double barrier_delta0 = 1.0;
  double feas_rel_slack = 0.01;
  int feas_grid = 1001;

  TrainConfig() {
    precond.max_iters = 120;
    adamw.max_iters = 400;
    lbfgs.kind = OptimizerConfig::Kind::Lbfgs;
    lbfgs.max_iters = 200;
  }
};

struct TrainResult {
  PolicyNetwork net;
  double cost = 0.0;       ///< cost of the returned policy (penalized in rounds)
  double objective = 0.0;  ///< un-penalized objective
  double penalty = 0.0;
  RunReport report;
  FeasibilityReport feasibility;
};

/// Repeated (glorot init -> precondition toward a pool profile ->
/// unconstrained optimize) with split RNG streams; returns the lowest-cost
/// run. A failing start is recorded in the report notes and skipped; throws
/// only if every start fails. Runs are independent; this implementation
/// executes them sequentially for determinism.
TrainResult multistart(const ControlProblem& prob, int n_starts,
                       const std::vector<ControlProfile>& pool,
                       std::uint64_t seed, const TrainConfig& cfg);

using RoundCallback =
    std::function<void(int round, const PolicyNetwork& net, const RoundRecord&)>;

/// Fiacco-McCormick outer loop on the relaxed-barrier penalized problem:
/// alternates L-BFGS rounds with update_schedule until the loss stops
/// decreasing or sched.max_rounds is reached. Initial per-constraint alphas
/// are auto-scaled so the starting penalty is sched.target_ratio of the
/// starting objective. Returns the best feasible (or least-infeasible)
/// policy with its feasibility report.
TrainResult solve_constrained(const ControlProblem& prob, PolicyNetwork net0,
                              const BarrierSchedule& sched,
                              const TrainConfig& cfg,
                              const RoundCallback& on_round = {});

}  // namespace ctrlode

// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/penalty.hpp"

#include <cmath>

namespace ctrlode {

namespace {
// Exponent freeze point of the relaxing branch. exp(30) ~ 1.1e13 already
// dwarfs any objective in the catalog while staying far from overflow even
// after squaring in norms.
constexpr double kMaxExponent = 30.0;
}  // namespace

void BarrierSchedule::validate() const {
  if (!(delta_rate > 0.0 && delta_rate < 1.0)) {
    throw ConfigError("barrier delta_rate must lie in (0,1)");
  }
  if (!(alpha_rate > 1.0)) throw ConfigError("barrier alpha_rate must be > 1");
  if (max_rounds < 1) throw ConfigError("barrier max_rounds must be >= 1");
  if (!(target_ratio > 0.0)) {
    throw ConfigError("barrier target_ratio must be positive");
  }
}

double relaxed_log(double z, const BarrierParams& p) {
  const double delta = p.delta;
  if (z > delta) return -std::log(z);
  const double arg = 1.0 - z / delta;
  if (arg <= kMaxExponent) {
    return std::exp(arg) - 1.0 - std::log(delta);
  }
  // Linear continuation with matching value and slope at the freeze point.
  const double e = std::exp(kMaxExponent);
  const double z_freeze = delta * (1.0 - kMaxExponent);
  return e - 1.0 - std::log(delta) + (e / delta) * (z_freeze - z);
}

double relaxed_log_deriv(double z, const BarrierParams& p) {
  const double delta = p.delta;
  if (z > delta) return -1.0 / z;
  const double arg = 1.0 - z / delta;
  if (arg <= kMaxExponent) {
    return -std::exp(arg) / delta;
  }
  return -std::exp(kMaxExponent) / delta;
}

ControlProblem penalized_problem(const ControlProblem& prob,
                                 const std::vector<BarrierParams>& params) {
  const std::size_t n_path = prob.constraints.size();
  const std::size_t n_term = prob.terminal_constraints.size();
  if (params.size() != n_path + n_term) {
    throw DimensionMismatch(
        "penalized_problem needs one BarrierParams per constraint (" +
        std::to_string(n_path + n_term) + "), got " +
        std::to_string(params.size()));
  }
  for (const auto& p : params) {
    if (!(p.alpha > 0.0) || !(p.delta > 0.0)) {
      throw ConfigError("barrier alpha and delta must be positive");
    }
  }
  if (params.empty()) return prob;

  ControlProblem out = prob;
  const std::vector<BarrierParams> path_params(params.begin(),
                                               params.begin() + n_path);
  const std::vector<BarrierParams> term_params(params.begin() + n_path,
                                               params.end());

  const auto base_l = prob.l;
  const auto base_l_grad = prob.l_grad;
  const auto base_phi = prob.phi;
  const auto base_phi_x = prob.phi_x;
  const auto path = prob.constraints;
  const auto term = prob.terminal_constraints;

  out.l = [base_l, path, path_params](const Vector& x, const Vector& u,
                                      double t) {
    double val = base_l(x, u, t);
    for (std::size_t i = 0; i < path.size(); ++i) {
      val += path_params[i].alpha * relaxed_log(path[i].h(x, u), path_params[i]);
    }
    return val;
  };
  out.l_grad = [base_l_grad, path, path_params](const Vector& x,
                                                const Vector& u, double t,
                                                Vector& lx, Vector& lu) {
    base_l_grad(x, u, t, lx, lu);
    for (std::size_t i = 0; i < path.size(); ++i) {
      const double w =
          path_params[i].alpha * relaxed_log_deriv(path[i].h(x, u), path_params[i]);
      lx += w * path[i].h_x(x, u);
      lu += w * path[i].h_u(x, u);
    }
  };
  out.phi = [base_phi, term, term_params](const Vector& x) {
    double val = base_phi(x);
    for (std::size_t i = 0; i < term.size(); ++i) {
      val += term_params[i].alpha * relaxed_log(term[i].h(x), term_params[i]);
    }
    return val;
  };
  out.phi_x = [base_phi_x, term, term_params](const Vector& x) {
    Vector g = base_phi_x(x);
    for (std::size_t i = 0; i < term.size(); ++i) {
      g += term_params[i].alpha * relaxed_log_deriv(term[i].h(x), term_params[i]) *
           term[i].h_x(x);
    }
    return g;
  };

  // Keep the original costs around so runs can report the objective/penalty
  // split per iteration.
  out.l_diag = prob.l_diag ? prob.l_diag : base_l;
  out.phi_diag = prob.phi_diag ? prob.phi_diag : base_phi;
  return out;
}

std::vector<BarrierParams> update_schedule(std::vector<BarrierParams> state,
                                           const RoundReport& report,
                                           const BarrierSchedule& sched) {
  sched.validate();
  if (report.stalled) {
    for (auto& p : state) p.alpha *= sched.alpha_rate;
    return state;
  }
  const double obj_scale = std::max(std::abs(report.objective), 1e-12);
  bool any_shrinkable = false;
  for (const auto& p : state) any_shrinkable |= p.delta > sched.delta_floor;
  if (!any_shrinkable) {
    // Deltas exhausted; tighten the weights instead so the update still
    // makes strict progress.
    for (auto& p : state) p.alpha *= sched.alpha_rate;
    return state;
  }
  // One shrink always happens. Shrinking delta raises the relaxed penalty
  // toward the pure log barrier, so with a penalty re-evaluator we keep
  // shrinking until the penalty/objective ratio climbs back to the target
  // (or the floor hits). The pass cap keeps a log-region-only trajectory,
  // whose penalty ignores delta, from slamming delta to the floor at once.
  constexpr int kMaxShrinksPerRound = 8;
  for (int pass = 0; pass < kMaxShrinksPerRound; ++pass) {
    for (auto& p : state) {
      p.delta = std::max(p.delta * sched.delta_rate, sched.delta_floor);
    }
    if (!report.penalty_eval) break;
    const double pen = report.penalty_eval(state);
    if (std::abs(pen) / obj_scale >= sched.target_ratio) break;
    bool all_floored = true;
    for (const auto& p : state) all_floored &= p.delta <= sched.delta_floor;
    if (all_floored) break;
  }
  return state;
}

}  // namespace ctrlode

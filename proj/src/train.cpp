// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>

#include "ctrlode/rng.hpp"

namespace ctrlode {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// RNG stream namespaces, so profile draws never collide with start seeds.
constexpr std::uint64_t kProfileStreamBase = 1ull << 20;

struct AdamState {
  Vector m, v;
  explicit AdamState(Eigen::Index n) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

std::pair<Vector, RunReport> minimize_adamw(const Objective& objective,
                                            Vector theta,
                                            const OptimizerConfig& cfg) {
  RunReport rep;
  Vector best_theta = theta;
  AdamState st(theta.size());
  const auto t_start = Clock::now();

  for (int k = 0; k < cfg.max_iters; ++k) {
    EvalResult ev;
    try {
      ev = objective(theta);
    } catch (const Error& e) {
      if (k == 0) {
        throw Error("objective failed at iteration 0: " + std::string(e.what()));
      }
      rep.termination = "objective_error@" + std::to_string(k) + ": " + e.what();
      return {best_theta, rep};
    }
    const double ginf = ev.grad.size() ? ev.grad.cwiseAbs().maxCoeff() : 0.0;
    rep.iters.push_back({0, k, ev.cost, ev.objective, ev.penalty, ginf, 0.0,
                         0.0, ms_since(t_start)});
    if (!std::isfinite(ev.cost) || !ev.grad.allFinite()) {
      rep.termination = "non_finite_objective@" + std::to_string(k);
      return {best_theta, rep};
    }
    if (ev.cost < rep.best_cost) {
      rep.best_cost = ev.cost;
      best_theta = theta;
    }
    if (ginf <= cfg.grad_norm_tol) {
      rep.termination = "grad_tol";
      return {best_theta, rep};
    }
    const double b1t = 1.0 - std::pow(cfg.beta1, k + 1);
    const double b2t = 1.0 - std::pow(cfg.beta2, k + 1);
    st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * ev.grad;
    st.v = cfg.beta2 * st.v +
           (1.0 - cfg.beta2) * ev.grad.cwiseProduct(ev.grad);
    // Decoupled weight decay.
    theta -= cfg.step_size *
             ((st.m / b1t).array() / ((st.v / b2t).array().sqrt() + cfg.eps) +
              cfg.weight_decay * theta.array())
                 .matrix();
  }
  rep.termination = "max_iters";
  return {best_theta, rep};
}

std::pair<Vector, RunReport> minimize_lbfgs(const Objective& objective,
                                            Vector theta,
                                            const OptimizerConfig& cfg) {
  RunReport rep;
  Vector best_theta = theta;
  const auto t_start = Clock::now();

  std::deque<std::pair<Vector, Vector>> history;  // (s, y)
  double gamma = 1.0;

  auto eval_trial = [&](const Vector& th, EvalResult& out) -> bool {
    // Trial points may wander into diverging territory; treat any failure
    // as a rejected step.
    try {
      out = objective(th);
    } catch (const Error&) {
      return false;
    }
    return std::isfinite(out.cost);
  };

  EvalResult cur;
  try {
    cur = objective(theta);
  } catch (const Error& e) {
    throw Error("objective failed at iteration 0: " + std::string(e.what()));
  }

  for (int k = 0; k < cfg.max_iters; ++k) {
    const double ginf = cur.grad.size() ? cur.grad.cwiseAbs().maxCoeff() : 0.0;
    rep.iters.push_back({0, k, cur.cost, cur.objective, cur.penalty, ginf, 0.0,
                         0.0, ms_since(t_start)});
    if (!std::isfinite(cur.cost) || !cur.grad.allFinite()) {
      rep.termination = "non_finite_objective@" + std::to_string(k);
      return {best_theta, rep};
    }
    if (cur.cost < rep.best_cost) {
      rep.best_cost = cur.cost;
      best_theta = theta;
    }
    if (ginf <= cfg.grad_norm_tol) {
      rep.termination = "grad_tol";
      return {best_theta, rep};
    }

    // Two-loop recursion.
    Vector d = -cur.grad;
    if (!history.empty()) {
      std::vector<double> alpha(history.size());
      std::vector<double> rho(history.size());
      for (std::size_t i = history.size(); i-- > 0;) {
        const auto& [s, y] = history[i];
        rho[i] = 1.0 / y.dot(s);
        alpha[i] = rho[i] * s.dot(d);
        d -= alpha[i] * y;
      }
      d *= gamma;
      for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& [s, y] = history[i];
        const double beta = rho[i] * y.dot(d);
        d += (alpha[i] - beta) * s;
      }
    }
    double slope = cur.grad.dot(d);
    if (!(slope < 0.0)) {
      history.clear();
      d = -cur.grad;
      slope = -cur.grad.squaredNorm();
    }

    // Backtracking Armijo search. Unit steps once curvature pairs exist;
    // the very first direction is raw steepest descent, so scale it down.
    double t = history.empty()
                   ? std::min(1.0, 1.0 / std::max(d.cwiseAbs().maxCoeff(), 1e-12))
                   : 1.0;
    bool accepted = false;
    EvalResult nxt;
    Vector theta_new;
    for (int ls = 0; ls < cfg.ls_max_evals; ++ls) {
      theta_new = theta + t * d;
      if (eval_trial(theta_new, nxt) &&
          nxt.cost <= cur.cost + cfg.ls_c1 * t * slope) {
        accepted = true;
        break;
      }
      t *= cfg.ls_backtrack;
    }
    if (!accepted) {
      if (!history.empty()) {
        history.clear();  // stale curvature; retry steepest descent next iter
        continue;
      }
      rep.termination = "line_search_failed@" + std::to_string(k);
      return {best_theta, rep};
    }

    Vector s = theta_new - theta;
    Vector y = nxt.grad - cur.grad;
    const double sy = s.dot(y);
    if (std::isfinite(sy) && sy > 1e-10 * s.norm() * y.norm()) {
      history.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(history.size()) > cfg.memory) history.pop_front();
      gamma = sy / history.back().second.squaredNorm();
    }
    theta = std::move(theta_new);
    cur = std::move(nxt);
  }
  rep.termination = "max_iters";
  return {best_theta, rep};
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("optimizer step_size must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adamw betas must lie in [0,1)");
  }
  if (max_iters < 1) throw ConfigError("optimizer max_iters must be >= 1");
  if (memory < 1) throw ConfigError("lbfgs memory must be >= 1");
  if (!(ls_backtrack > 0.0 && ls_backtrack < 1.0)) {
    throw ConfigError("lbfgs backtracking factor must lie in (0,1)");
  }
}

void append_report(RunReport& dst, const RunReport& src, int round,
                   double alpha_min, double delta_max) {
  for (IterRecord rec : src.iters) {
    rec.round = round;
    rec.alpha_min = alpha_min;
    rec.delta_max = delta_max;
    dst.iters.push_back(rec);
  }
  for (const auto& n : src.notes) dst.notes.push_back(n);
  dst.best_cost = std::min(dst.best_cost, src.best_cost);
  dst.termination = src.termination;
}

std::pair<Vector, RunReport> minimize(const Objective& objective,
                                      const Vector& theta0,
                                      const OptimizerConfig& cfg) {
  cfg.validate();
  if (cfg.kind == OptimizerConfig::Kind::AdamW) {
    return minimize_adamw(objective, theta0, cfg);
  }
  return minimize_lbfgs(objective, theta0, cfg);
}

Objective make_objective(ControlProblem prob, PolicyNetwork net,
                         IntegratorConfig integ) {
  auto prob_ptr = std::make_shared<ControlProblem>(std::move(prob));
  auto net_ptr = std::make_shared<PolicyNetwork>(std::move(net));
  return [prob_ptr, net_ptr, integ](const Vector& theta) {
    net_ptr->set_params(theta);
    GradientResult g = grad(*prob_ptr, *net_ptr, integ);
    EvalResult ev;
    ev.cost = g.cost;
    ev.grad = std::move(g.grad);
    ev.objective = g.objective;
    ev.penalty = g.penalty;
    return ev;
  };
}

std::vector<ControlProfile> default_profile_pool(const ControlProblem& prob,
                                                 int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("profile pool size must be >= 1");
  std::vector<ControlProfile> pool;
  const Vector mid = prob.control_midpoint();
  pool.push_back([mid](double) { return mid; });

  constexpr int kSegments = 4;
  for (int k = 1; k < n; ++k) {
    Rng rng(Rng::split(seed, kProfileStreamBase + static_cast<std::uint64_t>(k)));
    Matrix levels(prob.n_u, kSegments);
    for (int s = 0; s < kSegments; ++s) {
      for (int i = 0; i < prob.n_u; ++i) {
        levels(i, s) = rng.uniform(prob.u_lb[i], prob.u_ub[i]);
      }
    }
    const double t0 = prob.t0, tf = prob.tf;
    pool.push_back([levels, t0, tf](double t) -> Vector {
      const double frac = (t - t0) / (tf - t0);
      int s = std::clamp(static_cast<int>(frac * kSegments), 0, kSegments - 1);
      return levels.col(s);
    });
  }
  return pool;
}

PolicyNetwork precondition(const ControlProblem& prob, PolicyNetwork net,
                           const ControlProfile& u_ref,
                           const std::vector<double>& windows,
                           const IntegratorConfig& integ,
                           const OptimizerConfig& opt, RunReport* report) {
  if (windows.empty()) throw ConfigError("precondition needs >= 1 window");
  for (double w : windows) {
    if (!(w > 0.0 && w <= 1.0)) {
      throw ConfigError("precondition windows must lie in (0, 1]");
    }
  }

  Vector theta = net.params();
  for (double w : windows) {
    ControlProblem sub = prob;
    sub.tf = prob.t0 + w * (prob.tf - prob.t0);
    sub.constraints.clear();
    sub.terminal_constraints.clear();
    sub.l_diag = nullptr;
    sub.phi_diag = nullptr;
    sub.l = [u_ref](const Vector&, const Vector& u, double t) {
      return (u - u_ref(t)).squaredNorm();
    };
    sub.l_grad = [u_ref, n_x = prob.n_x](const Vector&, const Vector& u,
                                         double t, Vector& lx, Vector& lu) {
      lx = Vector::Zero(n_x);
      lu = 2.0 * (u - u_ref(t));
    };
    sub.phi = [](const Vector&) { return 0.0; };
    sub.phi_x = [n_x = prob.n_x](const Vector&) { return Vector::Zero(n_x); };

    auto objective = make_objective(sub, net, integ);
    auto [theta_w, rep] = minimize(objective, theta, opt);
    theta = std::move(theta_w);
    if (report) append_report(*report, rep, 0);
  }
  net.set_params(theta);
  return net;
}

bool FeasibilityReport::feasible() const {
  for (const auto& e : entries) {
    if (e.min_margin < -e.slack) return false;
  }
  return true;
}

double FeasibilityReport::worst_violation() const {
  double worst = 0.0;
  for (const auto& e : entries) {
    worst = std::max(worst, std::max(0.0, -e.min_margin));
  }
  return worst;
}

FeasibilityReport check_feasibility(const ControlProblem& prob,
                                    const PolicyNetwork& net,
                                    const Trajectory& traj, int grid,
                                    double rel_slack) {
  if (grid < 2) throw ConfigError("feasibility grid needs >= 2 points");
  FeasibilityReport rep;
  const Eigen::Index n_x = prob.n_x;
  std::vector<double> mins(prob.constraints.size(),
                           std::numeric_limits<double>::infinity());
  Vector xa, x, u;
  for (int k = 0; k < grid; ++k) {
    const double t = (k == grid - 1)
                         ? prob.tf
                         : prob.t0 + (prob.tf - prob.t0) * k / (grid - 1);
    traj.eval_into(t, xa);
    x = xa.head(n_x);
    u = net.forward(x);
    for (std::size_t i = 0; i < prob.constraints.size(); ++i) {
      mins[i] = std::min(mins[i], prob.constraints[i].h(x, u));
    }
  }
  for (std::size_t i = 0; i < prob.constraints.size(); ++i) {
    const auto& c = prob.constraints[i];
    rep.entries.push_back(
        {c.label, mins[i], rel_slack * std::max(1.0, c.scale)});
  }
  const Vector xf = traj.states().back().head(n_x);
  for (const auto& c : prob.terminal_constraints) {
    rep.entries.push_back(
        {c.label, c.h(xf), rel_slack * std::max(1.0, c.scale)});
  }
  return rep;
}

namespace {

// Per-constraint penalty terms of a stored trajectory: composite-Simpson
// integrals of P(h_i; delta_i) for path constraints followed by the terminal
// P values. Unweighted (alpha multiplies outside).
std::vector<double> penalty_terms(const ControlProblem& prob,
                                  const PolicyNetwork& net,
                                  const Trajectory& traj,
                                  const std::vector<BarrierParams>& params,
                                  int grid) {
  if (grid % 2 == 0) ++grid;  // Simpson needs an even interval count
  const Eigen::Index n_x = prob.n_x;
  const std::size_t n_path = prob.constraints.size();
  std::vector<double> terms(n_path + prob.terminal_constraints.size(), 0.0);
  const double h = (prob.tf - prob.t0) / (grid - 1);
  Vector xa, x, u;
  for (int k = 0; k < grid; ++k) {
    const double t = (k == grid - 1)
                         ? prob.tf
                         : prob.t0 + (prob.tf - prob.t0) * k / (grid - 1);
    traj.eval_into(t, xa);
    x = xa.head(n_x);
    u = net.forward(x);
    const double wgt =
        (k == 0 || k == grid - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    for (std::size_t i = 0; i < n_path; ++i) {
      terms[i] += wgt * relaxed_log(prob.constraints[i].h(x, u), params[i]);
    }
  }
  for (std::size_t i = 0; i < n_path; ++i) terms[i] *= h / 3.0;
  const Vector xf = traj.states().back().head(n_x);
  for (std::size_t j = 0; j < prob.terminal_constraints.size(); ++j) {
    terms[n_path + j] =
        relaxed_log(prob.terminal_constraints[j].h(xf), params[n_path + j]);
  }
  return terms;
}

}  // namespace

TrainResult multistart(const ControlProblem& prob, int n_starts,
                       const std::vector<ControlProfile>& pool,
                       std::uint64_t seed, const TrainConfig& cfg) {
  if (n_starts < 1) throw ConfigError("multistart needs n_starts >= 1");
  if (pool.empty()) throw ConfigError("multistart needs a nonempty profile pool");

  std::vector<int> sizes;
  sizes.push_back(prob.n_x);
  for (int h : cfg.hidden) sizes.push_back(h);
  sizes.push_back(prob.n_u);

  bool have_best = false;
  TrainResult best;
  std::vector<std::string> notes;

  for (int i = 0; i < n_starts; ++i) {
    const std::uint64_t start_seed = Rng::split(seed, static_cast<std::uint64_t>(i));
    try {
      PolicyNetwork net =
          PolicyNetwork::glorot(sizes, prob.u_lb, prob.u_ub, start_seed);
      RunReport rep;
      rep.seed = start_seed;
      net = precondition(prob, net, pool[i % pool.size()], cfg.windows,
                         cfg.integrator, cfg.precond, &rep);

      auto objective = make_objective(prob, net, cfg.integrator);
      auto [theta1, rep1] = minimize(objective, net.params(), cfg.adamw);
      append_report(rep, rep1, 0);
      Vector theta = std::move(theta1);
      if (cfg.polish) {
        auto [theta2, rep2] = minimize(objective, theta, cfg.lbfgs);
        append_report(rep, rep2, 0);
        theta = std::move(theta2);
      }
      net.set_params(theta);

      const Simulation sim = simulate(prob, net, cfg.integrator);
      notes.push_back("start " + std::to_string(i) + ": cost " +
                      std::to_string(sim.cost));
      if (!have_best || sim.cost < best.cost) {
        have_best = true;
        best.net = std::move(net);
        best.cost = sim.cost;
        best.objective = sim.objective;
        best.penalty = sim.penalty;
        best.report = std::move(rep);
        best.report.seed = start_seed;
        best.feasibility = check_feasibility(prob, best.net, sim.traj,
                                             cfg.feas_grid, cfg.feas_rel_slack);
      }
    } catch (const Error& e) {
      notes.push_back("start " + std::to_string(i) + " failed: " + e.what());
    }
  }
  if (!have_best) {
    throw Error("all " + std::to_string(n_starts) + " multistart runs failed");
  }
  for (auto& n : notes) best.report.notes.push_back(std::move(n));
  return best;
}

TrainResult solve_constrained(const ControlProblem& prob, PolicyNetwork net0,
                              const BarrierSchedule& sched,
                              const TrainConfig& cfg,
                              const RoundCallback& on_round) {
  sched.validate();
  const std::size_t n_c =
      prob.constraints.size() + prob.terminal_constraints.size();

  // No constraints: the outer loop degenerates to one plain minimize.
  if (n_c == 0) {
    auto objective = make_objective(prob, net0, cfg.integrator);
    auto [theta, rep] = minimize(objective, net0.params(), cfg.lbfgs);
    net0.set_params(theta);
    const Simulation sim = simulate(prob, net0, cfg.integrator);
    TrainResult res;
    res.net = std::move(net0);
    res.cost = res.objective = sim.cost;
    res.report = std::move(rep);
    res.feasibility = check_feasibility(prob, res.net, sim.traj, cfg.feas_grid,
                                        cfg.feas_rel_slack);
    return res;
  }

  // Initial relaxation in each constraint's own margin units, and weights
  // auto-scaled so the starting penalty sits at target_ratio of the starting
  // objective, split evenly across constraints.
  std::vector<BarrierParams> params(n_c);
  {
    std::size_t idx = 0;
    for (const auto& c : prob.constraints) {
      params[idx++].delta = cfg.barrier_delta0 * std::max(1.0, c.scale);
    }
    for (const auto& c : prob.terminal_constraints) {
      params[idx++].delta = cfg.barrier_delta0 * std::max(1.0, c.scale);
    }
  }
  Simulation sim0 = simulate(prob, net0, cfg.integrator);
  {
    const std::vector<double> terms =
        penalty_terms(prob, net0, sim0.traj, params, cfg.feas_grid);
    const double obj_scale = std::max(std::abs(sim0.cost), 1e-8);
    for (std::size_t i = 0; i < n_c; ++i) {
      const double share = sched.target_ratio * obj_scale /
                           (static_cast<double>(n_c) *
                            std::max(std::abs(terms[i]), 1e-8));
      params[i].alpha = std::clamp(share, 1e-6, 1e6);
    }
  }

  struct Candidate {
    Vector theta;
    double loss, objective, penalty;
    FeasibilityReport feas;
    int round;
  };
  std::vector<Candidate> candidates;

  RunReport full;
  full.seed = net0.init_seed();
  Vector theta = net0.params();
  PolicyNetwork net = net0;
  int stall_streak = 0;
  int rounds_done = 0;

  for (int r = 1; r <= sched.max_rounds; ++r) {
    const double alpha_min =
        std::min_element(params.begin(), params.end(), [](auto& a, auto& b) {
          return a.alpha < b.alpha;
        })->alpha;
    const double delta_max =
        std::max_element(params.begin(), params.end(), [](auto& a, auto& b) {
          return a.delta < b.delta;
        })->delta;

    const ControlProblem pprob = penalized_problem(prob, params);
    auto objective = make_objective(pprob, net, cfg.integrator);

    std::pair<Vector, RunReport> out;
    try {
      out = minimize(objective, theta, cfg.lbfgs);
    } catch (const Error& e) {
      full.notes.push_back("round " + std::to_string(r) + " aborted: " + e.what());
      break;
    }
    theta = std::move(out.first);
    append_report(full, out.second, r, alpha_min, delta_max);
    net.set_params(theta);
    rounds_done = r;

    Simulation sim = simulate(pprob, net, cfg.integrator);
    FeasibilityReport feas = check_feasibility(prob, net, sim.traj,
                                               cfg.feas_grid, cfg.feas_rel_slack);
    const double loss_start = out.second.iters.empty()
                                  ? sim.cost
                                  : out.second.iters.front().cost;
    const bool stalled =
        (loss_start - sim.cost) < sched.stall_tol * std::max(1.0, std::abs(loss_start));

    RoundRecord rr;
    rr.round = r;
    rr.iters = static_cast<int>(out.second.iters.size());
    rr.loss = sim.cost;
    rr.objective = sim.objective;
    rr.penalty = sim.penalty;
    rr.min_margin = feas.entries.empty()
                        ? 0.0
                        : std::min_element(feas.entries.begin(), feas.entries.end(),
                                           [](auto& a, auto& b) {
                                             return a.min_margin < b.min_margin;
                                           })
                              ->min_margin;
    rr.alpha_min = alpha_min;
    rr.delta_max = delta_max;
    rr.stalled = stalled;
    full.rounds.push_back(rr);
    if (on_round) on_round(r, net, rr);

    candidates.push_back({theta, sim.cost, sim.objective, sim.penalty,
                          std::move(feas), r});

    // Outer loop stop: the loss kept stalling even through the alpha-increase
    // branch (each stalled round doubles the weights before the next try).
    stall_streak = stalled ? stall_streak + 1 : 0;
    if (stall_streak >= 3) {
      full.termination = "loss_stalled";
      break;
    }

    // The re-evaluator prices the current trajectory under candidate
    // barrier parameters, so the delta shrink can restore the target ratio.
    auto traj = std::make_shared<Trajectory>(std::move(sim.traj));
    RoundReport report;
    report.objective = sim.objective;
    report.penalty = sim.penalty;
    report.stalled = stalled;
    report.penalty_eval = [&prob, &net, traj, grid = cfg.feas_grid](
                              const std::vector<BarrierParams>& cand) {
      const std::vector<double> terms =
          penalty_terms(prob, net, *traj, cand, grid);
      double total = 0.0;
      for (std::size_t i = 0; i < cand.size(); ++i) {
        total += cand[i].alpha * terms[i];
      }
      return total;
    };
    params = update_schedule(std::move(params), report, sched);
  }
  if (full.termination.empty()) {
    full.termination =
        (rounds_done == sched.max_rounds) ? "max_rounds" : "round_error";
  }

  if (candidates.empty()) {
    throw Error("constrained solve produced no usable round");
  }

  // Prefer feasible candidates by objective; otherwise least-infeasible.
  const Candidate* chosen = nullptr;
  for (const auto& c : candidates) {
    if (!c.feas.feasible()) continue;
    if (!chosen || c.objective < chosen->objective) chosen = &c;
  }
  if (!chosen) {
    for (const auto& c : candidates) {
      if (!chosen ||
          c.feas.worst_violation() < chosen->feas.worst_violation()) {
        chosen = &c;
      }
    }
  }

  TrainResult res;
  net.set_params(chosen->theta);
  res.net = std::move(net);
  res.cost = chosen->loss;
  res.objective = chosen->objective;
  res.penalty = chosen->penalty;
  res.feasibility = chosen->feas;
  full.notes.push_back("selected round " + std::to_string(chosen->round));
  res.report = std::move(full);
  return res;
}

}  // namespace ctrlode

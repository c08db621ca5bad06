// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: solve | precondition | portrait | gradcheck |
// inspect. Configuration comes from a JSON file merged over documented
// defaults; --override key.path=value patches single entries. Exit codes:
// 0 success, 1 configuration or numerical failure, 2 infeasible final
// result on a constraint-enforcing stage.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "ctrlode/adjoint.hpp"
#include "ctrlode/config.hpp"
#include "ctrlode/io.hpp"
#include "ctrlode/rng.hpp"
#include "ctrlode/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctrlode;

namespace {

int log_level() {
  const char* env = std::getenv("CTRLODE_LOG");
  if (!env) return 1;
  const std::string v(env);
  if (v == "quiet" || v == "0") return 0;
  if (v == "debug" || v == "2") return 2;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[ctrlode] " << msg << "\n";
}

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--override", overrides,
                    "config override key.path=value (repeatable)");
    cmd->add_option("--seed", seed, "RNG seed (overrides config)");
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
  }

  /// defaults <- file <- --override <- --seed/--out
  json merged_doc() const {
    json doc = default_config_json();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file: " + config_path);
      json user;
      try {
        in >> user;
      } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + config_path + ": " + e.what());
      }
      doc = merge_config(doc, user);
    }
    for (const auto& ov : overrides) apply_override(doc, ov);
    if (seed) doc["seed"] = *seed;
    if (!out_dir.empty()) doc["out"] = out_dir;
    return doc;
  }
};

std::vector<int> policy_sizes(const ControlProblem& prob,
                              const std::vector<int>& hidden) {
  std::vector<int> sizes;
  sizes.push_back(prob.n_x);
  for (int h : hidden) sizes.push_back(h);
  sizes.push_back(prob.n_u);
  return sizes;
}

json feasibility_json(const FeasibilityReport& feas) {
  json margins = json::object();
  for (const auto& e : feas.entries) margins[e.label] = e.min_margin;
  return margins;
}

void write_solution_artifacts(const fs::path& out, const ControlProblem& prob,
                              const PolicyNetwork& net,
                              const IntegratorConfig& integ, int grid) {
  const Simulation sim = simulate(prob, net, integ);
  write_trajectory_csv((out / "trajectory.csv").string(), prob, net, sim.traj,
                       grid);
  write_controls_csv((out / "controls.csv").string(), prob, net, sim.traj,
                     grid);
  net.save((out / "checkpoint.json").string());
}

int cmd_solve(const CommonFlags& flags, bool precondition_only) {
  const json doc = flags.merged_doc();
  RunConfig rc = config_from_json(doc);
  if (precondition_only) rc.stage = "precondition";
  ControlProblem prob = rc.make_problem();
  const fs::path out(rc.out_dir);
  fs::create_directories(out);

  info("problem " + prob.name + ", stage " + rc.stage + ", seed " +
       std::to_string(rc.seed));

  auto pool = default_profile_pool(prob, rc.pool_size, rc.seed);

  RunReport report;
  PolicyNetwork net;
  double final_cost = 0.0, objective = 0.0, penalty = 0.0;
  std::string termination;
  FeasibilityReport feas;
  bool enforce_feasibility = false;

  auto run_unconstrained = [&]() {
    TrainResult res = multistart(prob, rc.n_starts, pool, rc.seed, rc.train);
    info("unconstrained stage done, cost " + std::to_string(res.cost));
    return res;
  };

  try {
    if (rc.stage == "precondition") {
      const std::uint64_t s = Rng::split(rc.seed, 0);
      net = PolicyNetwork::glorot(policy_sizes(prob, rc.train.hidden),
                                  prob.u_lb, prob.u_ub, s);
      net = precondition(prob, net, pool.front(), rc.train.windows,
                         rc.train.integrator, rc.train.precond, &report);
      const Simulation sim = simulate(prob, net, rc.train.integrator);
      final_cost = objective = sim.cost;
      feas = check_feasibility(prob, net, sim.traj, rc.train.feas_grid,
                               rc.train.feas_rel_slack);
      termination = report.termination;
      report.seed = s;
    } else if (rc.stage == "unconstrained" ||
               (rc.stage == "full" && prob.constraints.empty() &&
                prob.terminal_constraints.empty())) {
      TrainResult res = run_unconstrained();
      net = std::move(res.net);
      report = std::move(res.report);
      final_cost = res.cost;
      objective = res.objective;
      penalty = res.penalty;
      feas = std::move(res.feasibility);
      termination = report.termination;
    } else {
      // constrained | full
      PolicyNetwork start;
      if (rc.stage == "constrained" && !rc.init_checkpoint.empty()) {
        start = PolicyNetwork::load(rc.init_checkpoint);
        if (start.input_dim() != prob.n_x || start.output_dim() != prob.n_u) {
          throw DimensionMismatch("init checkpoint does not fit the problem");
        }
      } else {
        TrainResult unc = run_unconstrained();
        start = std::move(unc.net);
        report = std::move(unc.report);
      }

      const fs::path ck_dir = out / "checkpoints";
      fs::create_directories(ck_dir);
      RoundCallback on_round = [&](int round, const PolicyNetwork& n,
                                   const RoundRecord& rec) {
        char name[32];
        std::snprintf(name, sizeof(name), "round_%02d.json", round);
        n.save((ck_dir / name).string());
        info("round " + std::to_string(round) + ": loss " +
             std::to_string(rec.loss) + ", objective " +
             std::to_string(rec.objective) + ", min margin " +
             std::to_string(rec.min_margin));
      };

      TrainResult res =
          solve_constrained(prob, start, rc.barrier, rc.train, on_round);
      for (const auto& it : res.report.iters) report.iters.push_back(it);
      for (const auto& r : res.report.rounds) report.rounds.push_back(r);
      for (const auto& n : res.report.notes) report.notes.push_back(n);
      net = std::move(res.net);
      final_cost = res.cost;
      objective = res.objective;
      penalty = res.penalty;
      feas = std::move(res.feasibility);
      termination = res.report.termination;
      enforce_feasibility = true;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw Error("stage '" + rc.stage + "' failed: " + e.what());
  }

  write_solution_artifacts(out, prob, net, rc.train.integrator,
                           rc.train.feas_grid);
  write_convergence_csv((out / "convergence.csv").string(), report,
                        rc.log_timing);

  json summary;
  summary["schema"] = "ctrlode.summary.v1";
  summary["version"] = kVersion;
  summary["problem"] = prob.name;
  summary["stage"] = rc.stage;
  summary["seed"] = rc.seed;
  summary["final_cost"] = final_cost;
  summary["objective"] = objective;
  summary["penalty"] = penalty;
  summary["termination"] = termination;
  summary["min_margins"] = feasibility_json(feas);
  summary["feasible"] = feas.feasible();
  summary["config"] = effective_config_json(doc);
  summary["artifacts"] = {{"trajectory", "trajectory.csv"},
                          {"controls", "controls.csv"},
                          {"convergence", "convergence.csv"},
                          {"checkpoint", "checkpoint.json"}};
  write_json((out / "summary.json").string(), summary);

  info("final cost " + std::to_string(final_cost) + ", artifacts in " +
       out.string());
  if (enforce_feasibility && !feas.feasible()) {
    info("final result violates constraints beyond slack");
    return 2;
  }
  return 0;
}

int cmd_portrait(const CommonFlags& flags, const std::string& checkpoint,
                 std::vector<double> x1_range, std::vector<double> x2_range,
                 int resolution, int streamlines) {
  const json doc = flags.merged_doc();
  RunConfig rc = config_from_json(doc);
  ControlProblem prob = rc.make_problem();
  if (prob.n_x != 2) {
    throw DimensionMismatch("phase portraits need a planar (2-state) problem");
  }
  if (resolution < 2) throw ConfigError("portrait resolution must be >= 2");
  if (x1_range[0] >= x1_range[1] || x2_range[0] >= x2_range[1]) {
    throw ConfigError("portrait ranges must be lo < hi");
  }
  PolicyNetwork net = PolicyNetwork::load(checkpoint);
  if (net.input_dim() != prob.n_x || net.output_dim() != prob.n_u) {
    throw DimensionMismatch("checkpoint does not fit the problem");
  }

  const fs::path out(rc.out_dir);
  fs::create_directories(out);
  std::ofstream os((out / "portrait.csv").string());
  if (!os) throw Error("cannot open portrait.csv for writing");
  os << "# schema: ctrlode.portrait.v1\n";
  os << "series,id,t,x1,x2,dx1,dx2\n";

  VectorField rhs = closed_loop_rhs(prob, net);
  Vector x(2), dx(2);
  auto emit = [&](const std::string& series, int id, double t,
                  const Vector& xi) {
    rhs(t, xi, dx);
    os << series << "," << id << "," << format_double(t) << ","
       << format_double(xi[0]) << "," << format_double(xi[1]) << ","
       << format_double(dx[0]) << "," << format_double(dx[1]) << "\n";
  };

  // Vector field on the grid.
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      x[0] = x1_range[0] + (x1_range[1] - x1_range[0]) * i / (resolution - 1);
      x[1] = x2_range[0] + (x2_range[1] - x2_range[0]) * j / (resolution - 1);
      emit("field", i * resolution + j, 0.0, x);
    }
  }

  // Short streamlines seeded from the grid border.
  std::vector<Vector> seeds;
  for (int i = 0; i < resolution; ++i) {
    const double a =
        x1_range[0] + (x1_range[1] - x1_range[0]) * i / (resolution - 1);
    const double b =
        x2_range[0] + (x2_range[1] - x2_range[0]) * i / (resolution - 1);
    seeds.push_back((Vector(2) << a, x2_range[0]).finished());
    seeds.push_back((Vector(2) << a, x2_range[1]).finished());
    seeds.push_back((Vector(2) << x1_range[0], b).finished());
    seeds.push_back((Vector(2) << x1_range[1], b).finished());
  }
  const std::size_t stride =
      std::max<std::size_t>(1, seeds.size() / std::max(1, streamlines));
  IntegratorConfig coarse = rc.train.integrator;
  coarse.rtol = std::max(coarse.rtol, 1e-5);
  const double horizon = 0.2 * (prob.tf - prob.t0);
  int sid = 0;
  for (std::size_t s = 0; s < seeds.size(); s += stride) {
    try {
      const Trajectory traj = integrate(rhs, seeds[s], 0.0, horizon, coarse);
      for (int k = 0; k <= 24; ++k) {
        const double t = horizon * k / 24.0;
        emit("streamline", sid, t, traj.eval(t));
      }
    } catch (const Error&) {
      // A diverging streamline is fine to drop; the portrait stays useful.
    }
    ++sid;
  }

  // The optimal trajectory from x0, tagged for plotting.
  const Trajectory traj =
      integrate(rhs, prob.x0, prob.t0, prob.tf, rc.train.integrator);
  for (int k = 0; k <= 200; ++k) {
    const double t = (k == 200) ? prob.tf
                                : prob.t0 + (prob.tf - prob.t0) * k / 200.0;
    emit("trajectory", 0, t, traj.eval(t));
  }
  info("portrait written to " + (out / "portrait.csv").string());
  return 0;
}

int cmd_gradcheck(const CommonFlags& flags, int n_directions,
                  double corrupt_eps) {
  if (n_directions < 1) {
    throw ConfigError("gradcheck needs n_directions >= 1");
  }
  const json doc = flags.merged_doc();
  RunConfig rc = config_from_json(doc);
  ControlProblem prob = rc.make_problem();

  if (corrupt_eps != 0.0) {
    // Test hook: perturb one Jacobian entry so the check must fail.
    auto base = prob.f_x;
    prob.f_x = [base, corrupt_eps](const Vector& x, const Vector& u, double t) {
      Matrix A = base(x, u, t);
      A(0, 0) += corrupt_eps;
      return A;
    };
  }

  const std::uint64_t s = Rng::split(rc.seed, 0);
  PolicyNetwork net = PolicyNetwork::glorot(policy_sizes(prob, rc.train.hidden),
                                            prob.u_lb, prob.u_ub, s);
  const Vector theta = net.params();

  const GradientResult g = grad(prob, net, rc.train.integrator);

  // Central differences of the cost need tighter tolerances than the
  // gradient itself, so the integration error cancels in the difference.
  IntegratorConfig tight = rc.train.integrator;
  tight.rtol = std::min(tight.rtol, 1e-10);
  tight.atol = std::min(tight.atol, 1e-10);
  tight.max_steps = std::max(tight.max_steps, 400000L);
  auto cost_at = [&](const Vector& th) {
    PolicyNetwork n2 = net;
    n2.set_params(th);
    return simulate(prob, n2, tight).cost;
  };

  Rng rng(Rng::split(rc.seed, 7777));
  const double h = 1e-4 * std::max(1.0, theta.cwiseAbs().maxCoeff());
  const double floor = 1e-6 * std::max(g.grad.cwiseAbs().maxCoeff(), 1e-12);
  double max_fd_err = 0.0;
  for (int k = 0; k < n_directions; ++k) {
    Vector v(theta.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
    v /= v.norm();
    const double fd = (cost_at(theta + h * v) - cost_at(theta - h * v)) / (2 * h);
    const double ad = g.grad.dot(v);
    const double rel = std::abs(ad - fd) /
                       std::max({std::abs(ad), std::abs(fd), floor});
    max_fd_err = std::max(max_fd_err, rel);
  }

  const Vector gq = grad_via_quadrature(prob, net, rc.train.integrator);
  const double scale = std::max(g.grad.cwiseAbs().maxCoeff(), 1e-12);
  const double quad_err = (g.grad - gq).cwiseAbs().maxCoeff() / scale;

  constexpr double kThreshold = 1e-4;
  std::cout << "gradcheck: problem=" << prob.name
            << " n_theta=" << theta.size() << " directions=" << n_directions
            << "\n";
  std::cout << "max relative error, adjoint vs central differences: "
            << format_double(max_fd_err) << "\n";
  std::cout << "max relative error, adjoint vs quadrature variant:  "
            << format_double(quad_err) << "\n";
  const bool pass = max_fd_err <= kThreshold && quad_err <= kThreshold;
  std::cout << (pass ? "PASS" : "FAIL") << " (threshold "
            << format_double(kThreshold) << ")\n";
  return pass ? 0 : 1;
}

int cmd_inspect(const std::string& checkpoint) {
  const PolicyNetwork net = PolicyNetwork::load(checkpoint);
  const Vector p = net.params();
  json j;
  j["format"] = "ctrlode.policy.v1";
  j["layer_sizes"] = net.layer_sizes();
  std::vector<std::string> acts;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    acts.push_back(net.layer(i).act == Activation::Tanh ? "tanh"
                                                        : "scaled_sigmoid");
  }
  j["activations"] = acts;
  j["lb"] = std::vector<double>(net.lower_bounds().begin(),
                                net.lower_bounds().end());
  j["ub"] = std::vector<double>(net.upper_bounds().begin(),
                                net.upper_bounds().end());
  j["seed"] = net.init_seed();
  j["param_count"] = net.param_count();
  j["param_l2"] = p.norm();
  j["param_linf"] = p.size() ? p.cwiseAbs().maxCoeff() : 0.0;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural state-feedback optimal control via adjoint gradients"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonFlags solve_flags, precond_flags, portrait_flags, gradcheck_flags;

  auto* solve = app.add_subcommand("solve", "run the configured pipeline");
  solve_flags.attach(solve);

  auto* precond = app.add_subcommand(
      "precondition", "run only the profile-tracking preconditioning stage");
  precond_flags.attach(precond);

  auto* portrait = app.add_subcommand(
      "portrait", "closed-loop vector field, streamlines and the optimal "
                  "trajectory on a state-plane grid");
  portrait_flags.attach(portrait);
  std::string ck_portrait;
  std::vector<double> x1_range{-3.0, 3.0}, x2_range{-3.0, 3.0};
  int resolution = 25, streamlines = 24;
  portrait->add_option("--checkpoint", ck_portrait, "policy checkpoint")
      ->required();
  portrait->add_option("--x1", x1_range, "x1 range: lo hi")->expected(2);
  portrait->add_option("--x2", x2_range, "x2 range: lo hi")->expected(2);
  portrait->add_option("--resolution", resolution, "grid points per axis");
  portrait->add_option("--streamlines", streamlines,
                       "number of border-seeded streamlines");

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "adjoint gradient vs central differences and vs the "
                   "quadrature variant");
  gradcheck_flags.attach(gradcheck);
  int n_directions = 20;
  double corrupt = 0.0;
  gradcheck->add_option("--directions", n_directions, "random directions");
  gradcheck
      ->add_option("--corrupt-jacobian", corrupt,
                   "test hook: perturb f_x(0,0) by this amount")
      ->default_val(0.0);

  auto* inspect =
      app.add_subcommand("inspect", "print checkpoint metadata as JSON");
  std::string ck_inspect;
  inspect->add_option("--checkpoint", ck_inspect, "policy checkpoint")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(solve_flags, false);
    if (precond->parsed()) return cmd_solve(precond_flags, true);
    if (portrait->parsed()) {
      return cmd_portrait(portrait_flags, ck_portrait, x1_range, x2_range,
                          resolution, streamlines);
    }
    if (gradcheck->parsed()) {
      return cmd_gradcheck(gradcheck_flags, n_directions, corrupt);
    }
    if (inspect->parsed()) return cmd_inspect(ck_inspect);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

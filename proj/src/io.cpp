// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ctrlode {

std::string format_double(double v) {
  char buf[32];
  // Shortest representation that parses back exactly.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path);
  return out;
}

void sample_closed_loop(const ControlProblem& prob, const PolicyNetwork& net,
                        const Trajectory& traj, int grid,
                        const std::function<void(double, const Vector&,
                                                 const Vector&)>& emit) {
  if (grid < 2) throw ConfigError("sampling grid needs >= 2 points");
  Vector xa, x, u;
  for (int k = 0; k < grid; ++k) {
    const double t = (k == grid - 1)
                         ? prob.tf
                         : prob.t0 + (prob.tf - prob.t0) * k / (grid - 1);
    traj.eval_into(t, xa);
    x = xa.head(prob.n_x);
    u = net.forward(x);
    emit(t, x, u);
  }
}

}  // namespace

void write_trajectory_csv(const std::string& path, const ControlProblem& prob,
                          const PolicyNetwork& net, const Trajectory& traj,
                          int grid) {
  auto out = open_out(path);
  out << "# schema: ctrlode.trajectory.v1\n";
  out << "t";
  for (int i = 1; i <= prob.n_x; ++i) out << ",x" << i;
  for (int i = 1; i <= prob.n_u; ++i) out << ",u" << i;
  out << "\n";
  sample_closed_loop(prob, net, traj, grid,
                     [&](double t, const Vector& x, const Vector& u) {
                       out << format_double(t);
                       for (double v : x) out << "," << format_double(v);
                       for (double v : u) out << "," << format_double(v);
                       out << "\n";
                     });
}

void write_controls_csv(const std::string& path, const ControlProblem& prob,
                        const PolicyNetwork& net, const Trajectory& traj,
                        int grid) {
  auto out = open_out(path);
  out << "# schema: ctrlode.controls.v1\n";
  out << "t";
  for (int i = 1; i <= prob.n_u; ++i) out << ",u" << i;
  out << "\n";
  sample_closed_loop(prob, net, traj, grid,
                     [&](double t, const Vector&, const Vector& u) {
                       out << format_double(t);
                       for (double v : u) out << "," << format_double(v);
                       out << "\n";
                     });
}

void write_convergence_csv(const std::string& path, const RunReport& report,
                           bool with_timing) {
  auto out = open_out(path);
  out << "# schema: ctrlode.convergence.v1\n";
  out << "round,iter,cost,objective,penalty,grad_inf_norm,alpha_min,delta_max,"
         "wall_ms\n";
  for (const auto& r : report.iters) {
    out << r.round << "," << r.iter << "," << format_double(r.cost) << ","
        << format_double(r.objective) << "," << format_double(r.penalty) << ","
        << format_double(r.grad_inf) << "," << format_double(r.alpha_min) << ","
        << format_double(r.delta_max) << ","
        << format_double(with_timing ? r.wall_ms : 0.0) << "\n";
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

ControlProfile read_profile_csv(const std::string& path,
                                const ControlProblem& prob) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile file: " + path);
  std::vector<double> times;
  std::vector<Vector> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (...) {
        numeric = false;
        break;
      }
    }
    if (!numeric) continue;  // header line
    if (static_cast<int>(row.size()) != prob.n_u + 1) {
      throw ConfigError("profile file rows need t plus " +
                        std::to_string(prob.n_u) + " control columns");
    }
    times.push_back(row[0]);
    Vector u(prob.n_u);
    for (int i = 0; i < prob.n_u; ++i) {
      u[i] = std::clamp(row[i + 1], prob.u_lb[i], prob.u_ub[i]);
    }
    values.push_back(std::move(u));
  }
  if (times.size() < 2) {
    throw ConfigError("profile file needs at least two samples");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw ConfigError("profile file times must be strictly increasing");
    }
  }
  return [times, values](double t) -> Vector {
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
    const double w = (t - times[k]) / (times[k + 1] - times[k]);
    return (1.0 - w) * values[k] + w * values[k + 1];
  };
}

}  // namespace ctrlode

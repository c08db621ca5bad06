// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ctrlode/dynamics.hpp"
#include "ctrlode/train.hpp"

namespace ctrlode {

/// Shortest round-trippable decimal form of a double ("%.17g" trimmed).
/// All CSV numbers go through this so reruns are byte-identical.
std::string format_double(double v);

/// Samples the closed-loop trajectory on a uniform grid and writes
/// t, x1..xn, u1..um rows. `traj` may be the augmented forward solution;
/// only the leading n_x block is used.
void write_trajectory_csv(const std::string& path, const ControlProblem& prob,
                          const PolicyNetwork& net, const Trajectory& traj,
                          int grid = 1001);

/// Control profile u(t) on the same grid: t, u1..um.
void write_controls_csv(const std::string& path, const ControlProblem& prob,
                        const PolicyNetwork& net, const Trajectory& traj,
                        int grid = 1001);

/// Per-iteration optimization log:
/// round, iter, cost, objective, penalty, grad_inf_norm, alpha_min,
/// delta_max, wall_ms. wall_ms is written as 0 unless with_timing is set,
/// keeping reruns byte-identical.
void write_convergence_csv(const std::string& path, const RunReport& report,
                           bool with_timing = false);

void write_json(const std::string& path, const nlohmann::json& j);

/// Reads a piecewise-linear control profile from a CSV with columns
/// t, u1..um (header optional). Values clamp onto the control box.
ControlProfile read_profile_csv(const std::string& path,
                                const ControlProblem& prob);

}  // namespace ctrlode

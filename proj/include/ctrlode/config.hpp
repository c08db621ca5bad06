// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrlode/dynamics.hpp"
#include "ctrlode/train.hpp"

namespace ctrlode {

/// Fully resolved run configuration. Every field has a documented default;
/// parsing rejects unknown keys so typos fail loudly instead of silently
/// falling back to defaults.
struct RunConfig {
  std::string problem = "vdp";  ///< vdp | bioreactor | path to a problem JSON
  std::string stage = "full";   ///< precondition | unconstrained | constrained | full
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string init_checkpoint;  ///< starting policy for stage=constrained

  // problem overrides
  std::optional<double> tf;
  std::optional<std::vector<double>> u_lb, u_ub;
  BioreactorParams bioreactor;

  TrainConfig train;
  bool atol_explicit = false;  ///< user pinned atol; skip the per-problem default
  int n_starts = 5;
  int pool_size = 5;
  BarrierSchedule barrier;
  bool log_timing = false;  ///< emit measured wall_ms (sacrifices byte-exact reruns)

  /// Builds the configured problem instance (with overrides applied) and,
  /// unless atol was pinned, adopts its recommended integrator atol.
  ControlProblem make_problem();
};

/// The defaults of every accepted key, as a JSON document. Also the schema:
/// user configs may only contain keys present here.
nlohmann::json default_config_json();

/// Parses a config document (already merged); throws ConfigError naming any
/// unknown key or ill-typed value.
RunConfig config_from_json(const nlohmann::json& doc);

/// Reads and validates a config file.
RunConfig load_config(const std::string& path);

/// Applies a `--override key=value` with a dotted path, e.g.
/// "optimizer.adamw.step_size=0.02". Values parse as JSON scalars, falling
/// back to strings. The key path must exist in the schema.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Validates `user` against the schema `defaults` and deep-merges it on top.
/// Throws ConfigError with the dotted path of the first unknown key.
nlohmann::json merge_config(const nlohmann::json& defaults,
                            const nlohmann::json& user);

/// Effective config (defaults + file + overrides) as JSON, for summaries.
nlohmann::json effective_config_json(const nlohmann::json& merged);

}  // namespace ctrlode

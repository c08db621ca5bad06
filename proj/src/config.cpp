// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/config.hpp"

#include <fstream>

namespace ctrlode {

using nlohmann::json;

json default_config_json() {
  json opt_adamw = {{"step_size", 0.02},    {"beta1", 0.9},
                    {"beta2", 0.999},       {"eps", 1e-8},
                    {"weight_decay", 0.0},  {"max_iters", 400},
                    {"grad_norm_tol", 1e-8}};
  json opt_precond = opt_adamw;
  opt_precond["max_iters"] = 120;
  json opt_lbfgs = {{"memory", 10},        {"ls_backtrack", 0.5},
                    {"ls_c1", 1e-4},       {"ls_max_evals", 40},
                    {"max_iters", 200},    {"grad_norm_tol", 1e-8}};
  return json{
      {"problem", "vdp"},
      {"stage", "full"},
      {"seed", 0},
      {"out", "out"},
      {"init_checkpoint", ""},
      {"problem_overrides",
       {{"tf", nullptr},
        {"u_lb", nullptr},
        {"u_ub", nullptr},
        {"bioreactor",
         {{"u_m", 0.0572},
          {"u_d", 0.0},
          {"K_N", 393.1},
          {"Y_NX", 504.5},
          {"k_m", 0.00016},
          {"k_d", 0.281},
          {"k_s", 178.9},
          {"k_i", 447.1},
          {"k_sq", 23.51},
          {"k_iq", 800.0},
          {"K_Np", 16.89}}}}},
      {"policy", {{"hidden", {16, 16}}}},
      {"integrator",
       {{"rtol", 1e-6},
        {"atol", nullptr},
        {"h_init", 0.0},
        {"h_max", 0.0},
        {"max_steps", 100000}}},
      {"precondition",
       {{"windows", {0.25, 0.5, 0.75, 1.0}}, {"optimizer", opt_precond}}},
      {"optimizer",
       {{"adamw", opt_adamw}, {"lbfgs", opt_lbfgs}, {"polish", true}}},
      {"barrier",
       {{"delta0", 1.0},
        {"delta_rate", 0.55},
        {"alpha_rate", 2.0},
        {"target_ratio", 0.05},
        {"max_rounds", 12},
        {"stall_tol", 1e-4},
        {"delta_floor", 1e-6}}},
      {"multistart", {{"n_starts", 5}, {"pool_size", 5}}},
      {"feasibility", {{"grid", 1001}, {"rel_slack", 0.01}}},
      {"log_timing", false}};
}

namespace {

bool types_compatible(const json& def, const json& usr) {
  if (def.is_null() || usr.is_null()) return true;
  if (def.is_number() && usr.is_number()) return true;
  if (def.is_boolean() && usr.is_boolean()) return true;
  if (def.is_string() && usr.is_string()) return true;
  if (def.is_array() && usr.is_array()) return true;
  if (def.is_object() && usr.is_object()) return true;
  return false;
}

void merge_into(json& base, const json& user, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) {
      throw ConfigError("unknown config key '" + path + "'");
    }
    json& slot = base[it.key()];
    if (slot.is_object() && !slot.empty() && it->is_object()) {
      merge_into(slot, *it, path);
      continue;
    }
    if (!types_compatible(slot, *it)) {
      throw ConfigError("config key '" + path + "' has the wrong type");
    }
    slot = *it;
  }
}

OptimizerConfig parse_adamw(const json& j) {
  OptimizerConfig o;
  o.kind = OptimizerConfig::Kind::AdamW;
  o.step_size = j.at("step_size").get<double>();
  o.beta1 = j.at("beta1").get<double>();
  o.beta2 = j.at("beta2").get<double>();
  o.eps = j.at("eps").get<double>();
  o.weight_decay = j.at("weight_decay").get<double>();
  o.max_iters = j.at("max_iters").get<int>();
  o.grad_norm_tol = j.at("grad_norm_tol").get<double>();
  o.validate();
  return o;
}

OptimizerConfig parse_lbfgs(const json& j) {
  OptimizerConfig o;
  o.kind = OptimizerConfig::Kind::Lbfgs;
  o.memory = j.at("memory").get<int>();
  o.ls_backtrack = j.at("ls_backtrack").get<double>();
  o.ls_c1 = j.at("ls_c1").get<double>();
  o.ls_max_evals = j.at("ls_max_evals").get<int>();
  o.max_iters = j.at("max_iters").get<int>();
  o.grad_norm_tol = j.at("grad_norm_tol").get<double>();
  o.validate();
  return o;
}

}  // namespace

json merge_config(const json& defaults, const json& user) {
  if (!user.is_object()) throw ConfigError("config root must be a JSON object");
  json merged = defaults;
  merge_into(merged, user, "");
  return merged;
}

json effective_config_json(const json& merged) { return merged; }

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key.path=value, got '" +
                      assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare strings are allowed unquoted
  }

  // Walk the dotted path inside the schema.
  json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot - pos);
    if (!node->is_object() || !node->contains(key)) {
      throw ConfigError("unknown config key '" + path + "'");
    }
    if (dot == std::string::npos) {
      json& slot = (*node)[key];
      if (!types_compatible(slot, value) || (slot.is_object() && !value.is_object())) {
        throw ConfigError("config key '" + path + "' has the wrong type");
      }
      slot = value;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

RunConfig config_from_json(const json& doc) {
  RunConfig rc;
  rc.problem = doc.at("problem").get<std::string>();
  rc.stage = doc.at("stage").get<std::string>();
  if (rc.stage != "precondition" && rc.stage != "unconstrained" &&
      rc.stage != "constrained" && rc.stage != "full") {
    throw ConfigError("config key 'stage' must be one of precondition | "
                      "unconstrained | constrained | full");
  }
  rc.seed = doc.at("seed").get<std::uint64_t>();
  rc.out_dir = doc.at("out").get<std::string>();
  rc.init_checkpoint = doc.at("init_checkpoint").get<std::string>();

  const json& po = doc.at("problem_overrides");
  if (!po.at("tf").is_null()) rc.tf = po.at("tf").get<double>();
  if (!po.at("u_lb").is_null()) rc.u_lb = po.at("u_lb").get<std::vector<double>>();
  if (!po.at("u_ub").is_null()) rc.u_ub = po.at("u_ub").get<std::vector<double>>();
  const json& bio = po.at("bioreactor");
  rc.bioreactor.u_m = bio.at("u_m").get<double>();
  rc.bioreactor.u_d = bio.at("u_d").get<double>();
  rc.bioreactor.K_N = bio.at("K_N").get<double>();
  rc.bioreactor.Y_NX = bio.at("Y_NX").get<double>();
  rc.bioreactor.k_m = bio.at("k_m").get<double>();
  rc.bioreactor.k_d = bio.at("k_d").get<double>();
  rc.bioreactor.k_s = bio.at("k_s").get<double>();
  rc.bioreactor.k_i = bio.at("k_i").get<double>();
  rc.bioreactor.k_sq = bio.at("k_sq").get<double>();
  rc.bioreactor.k_iq = bio.at("k_iq").get<double>();
  rc.bioreactor.K_Np = bio.at("K_Np").get<double>();

  rc.train.hidden = doc.at("policy").at("hidden").get<std::vector<int>>();

  const json& integ = doc.at("integrator");
  rc.train.integrator.rtol = integ.at("rtol").get<double>();
  if (!integ.at("atol").is_null()) {
    rc.train.integrator.atol = integ.at("atol").get<double>();
    rc.atol_explicit = true;
  }
  rc.train.integrator.h_init = integ.at("h_init").get<double>();
  rc.train.integrator.h_max = integ.at("h_max").get<double>();
  rc.train.integrator.max_steps = integ.at("max_steps").get<long>();

  rc.train.windows = doc.at("precondition").at("windows").get<std::vector<double>>();
  rc.train.precond = parse_adamw(doc.at("precondition").at("optimizer"));
  rc.train.adamw = parse_adamw(doc.at("optimizer").at("adamw"));
  rc.train.lbfgs = parse_lbfgs(doc.at("optimizer").at("lbfgs"));
  rc.train.polish = doc.at("optimizer").at("polish").get<bool>();

  const json& bar = doc.at("barrier");
  rc.train.barrier_delta0 = bar.at("delta0").get<double>();
  rc.barrier.delta_rate = bar.at("delta_rate").get<double>();
  rc.barrier.alpha_rate = bar.at("alpha_rate").get<double>();
  rc.barrier.target_ratio = bar.at("target_ratio").get<double>();
  rc.barrier.max_rounds = bar.at("max_rounds").get<int>();
  rc.barrier.stall_tol = bar.at("stall_tol").get<double>();
  rc.barrier.delta_floor = bar.at("delta_floor").get<double>();
  rc.barrier.validate();

  rc.n_starts = doc.at("multistart").at("n_starts").get<int>();
  rc.pool_size = doc.at("multistart").at("pool_size").get<int>();
  rc.train.feas_grid = doc.at("feasibility").at("grid").get<int>();
  rc.train.feas_rel_slack = doc.at("feasibility").at("rel_slack").get<double>();
  rc.log_timing = doc.at("log_timing").get<bool>();
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json user;
  try {
    in >> user;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
  return config_from_json(merge_config(default_config_json(), user));
}

ControlProblem RunConfig::make_problem() {
  ControlProblem prob;
  std::string base = problem;
  json file_overrides;

  if (base != "vdp" && base != "bioreactor") {
    // A user-defined problem file: {"base": ..., "tf": ..., "u_lb": ...,
    // "u_ub": ..., "bioreactor": {...}}.
    std::ifstream in(base);
    if (!in) {
      throw ConfigError("problem '" + base +
                        "' is neither vdp, bioreactor, nor a readable file");
    }
    try {
      in >> file_overrides;
    } catch (const json::exception& e) {
      throw ConfigError("malformed problem file " + base + ": " + e.what());
    }
    json schema = default_config_json().at("problem_overrides");
    schema["base"] = "";
    const json merged = merge_config(schema, file_overrides);
    base = merged.at("base").get<std::string>();
    if (base != "vdp" && base != "bioreactor") {
      throw ConfigError("problem file must set base to vdp or bioreactor");
    }
    if (!merged.at("tf").is_null() && !tf) tf = merged.at("tf").get<double>();
    if (!merged.at("u_lb").is_null() && !u_lb)
      u_lb = merged.at("u_lb").get<std::vector<double>>();
    if (!merged.at("u_ub").is_null() && !u_ub)
      u_ub = merged.at("u_ub").get<std::vector<double>>();
    if (base == "bioreactor") {
      const json& bio = merged.at("bioreactor");
      BioreactorParams p;
      p.u_m = bio.at("u_m").get<double>();
      p.u_d = bio.at("u_d").get<double>();
      p.K_N = bio.at("K_N").get<double>();
      p.Y_NX = bio.at("Y_NX").get<double>();
      p.k_m = bio.at("k_m").get<double>();
      p.k_d = bio.at("k_d").get<double>();
      p.k_s = bio.at("k_s").get<double>();
      p.k_i = bio.at("k_i").get<double>();
      p.k_sq = bio.at("k_sq").get<double>();
      p.k_iq = bio.at("k_iq").get<double>();
      p.K_Np = bio.at("K_Np").get<double>();
      bioreactor = p;
    }
  }

  if (base == "vdp") {
    prob = make_vdp();
    if (tf) prob.tf = *tf;
  } else {
    prob = make_bioreactor(bioreactor, tf.value_or(240.0));
  }

  auto apply_bounds = [&prob](const std::vector<double>& v, Vector& target,
                              const char* which) {
    if (static_cast<int>(v.size()) != prob.n_u) {
      throw ConfigError(std::string("override ") + which + " must have " +
                        std::to_string(prob.n_u) + " entries");
    }
    target = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  };
  if (u_lb) apply_bounds(*u_lb, prob.u_lb, "u_lb");
  if (u_ub) apply_bounds(*u_ub, prob.u_ub, "u_ub");
  for (Eigen::Index i = 0; i < prob.u_lb.size(); ++i) {
    if (!(prob.u_lb[i] < prob.u_ub[i])) {
      throw ConfigError("control bounds require lb < ub componentwise");
    }
  }

  if (!atol_explicit) train.integrator.atol = prob.recommended_atol;
  return prob;
}

}  // namespace ctrlode

// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/config.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ctrlode/io.hpp"
#include "ctrlode/rng.hpp"

using namespace ctrlode;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << contents;
  return p;
}

}  // namespace

TEST_CASE("defaults parse cleanly") {
  const RunConfig rc = config_from_json(default_config_json());
  CHECK(rc.problem == "vdp");
  CHECK(rc.stage == "full");
  CHECK(rc.n_starts == 5);
  CHECK(rc.train.windows == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  CHECK(rc.barrier.max_rounds == 12);
}

TEST_CASE("unknown keys are rejected by name") {
  json user = {{"optimzer", {{"adamw", {{"step_size", 0.1}}}}}};
  try {
    merge_config(default_config_json(), user);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("optimzer") != std::string::npos);
  }
  json nested = {{"optimizer", {{"adamw", {{"stepsize", 0.1}}}}}};
  try {
    merge_config(default_config_json(), nested);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("optimizer.adamw.stepsize") !=
          std::string::npos);
  }
}

TEST_CASE("type mismatches are rejected") {
  json user = {{"seed", "zero"}};
  CHECK_THROWS_AS(merge_config(default_config_json(), user), ConfigError);
}

TEST_CASE("dotted overrides") {
  json doc = default_config_json();
  apply_override(doc, "optimizer.adamw.step_size=0.5");
  CHECK(doc["optimizer"]["adamw"]["step_size"] == 0.5);
  apply_override(doc, "problem=bioreactor");
  CHECK(doc["problem"] == "bioreactor");
  apply_override(doc, "optimizer.polish=false");
  CHECK(doc["optimizer"]["polish"] == false);
  apply_override(doc, "precondition.windows=[0.5,1.0]");
  CHECK(doc["precondition"]["windows"] == json({0.5, 1.0}));
  CHECK_THROWS_AS(apply_override(doc, "no.such.key=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "seed"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "seed=true"), ConfigError);
}

TEST_CASE("stage values are validated") {
  json doc = default_config_json();
  doc["stage"] = "warmup";
  CHECK_THROWS_AS(config_from_json(doc), ConfigError);
}

TEST_CASE("per-problem integrator atol defaults") {
  json doc = default_config_json();
  RunConfig rc = config_from_json(doc);
  rc.make_problem();
  CHECK(rc.train.integrator.atol == 1e-8);

  doc["problem"] = "bioreactor";
  RunConfig bio = config_from_json(doc);
  bio.make_problem();
  CHECK(bio.train.integrator.atol == 1e-6);

  doc["integrator"]["atol"] = 1e-4;
  RunConfig pinned = config_from_json(doc);
  pinned.make_problem();
  CHECK(pinned.train.integrator.atol == 1e-4);
}

TEST_CASE("problem overrides flow into the instance") {
  json doc = default_config_json();
  doc["problem"] = "bioreactor";
  doc["problem_overrides"]["tf"] = 120.0;
  doc["problem_overrides"]["u_ub"] = {350.0, 30.0};
  doc["problem_overrides"]["bioreactor"]["u_m"] = 0.06;
  RunConfig rc = config_from_json(doc);
  const ControlProblem prob = rc.make_problem();
  CHECK(prob.tf == 120.0);
  CHECK(prob.u_ub[0] == 350.0);
  CHECK(prob.u_ub[1] == 30.0);
  // u_m override reaches the dynamics: growth scales linearly with u_m.
  Vector dx(3);
  prob.f(prob.x0, (Vector(2) << 260.0, 0.0).finished(), 0.0, dx);
  ControlProblem base = make_bioreactor();
  Vector dx0(3);
  base.f(base.x0, (Vector(2) << 260.0, 0.0).finished(), 0.0, dx0);
  CHECK(dx[0] == doctest::Approx(dx0[0] * 0.06 / 0.0572));
}

TEST_CASE("user-defined problem files") {
  const fs::path p = temp_file("ctrlode_prob.json",
                               R"({"base": "vdp", "tf": 4.0})");
  json doc = default_config_json();
  doc["problem"] = p.string();
  RunConfig rc = config_from_json(doc);
  const ControlProblem prob = rc.make_problem();
  CHECK(prob.name == "vdp");
  CHECK(prob.tf == 4.0);
  fs::remove(p);

  json bad = default_config_json();
  bad["problem"] = "/no/such/file.json";
  RunConfig rc2 = config_from_json(bad);
  CHECK_THROWS_AS(rc2.make_problem(), ConfigError);
}

TEST_CASE("config file loading") {
  const fs::path p = temp_file("ctrlode_cfg.json",
                               R"({"seed": 42, "multistart": {"n_starts": 2}})");
  const RunConfig rc = load_config(p.string());
  CHECK(rc.seed == 42);
  CHECK(rc.n_starts == 2);
  CHECK(rc.stage == "full");
  fs::remove(p);
  CHECK_THROWS_AS(load_config("/no/such/config.json"), ConfigError);
}

TEST_CASE("format_double round-trips exactly") {
  Rng rng(314);
  for (int i = 0; i < 2000; ++i) {
    double v;
    switch (i % 4) {
      case 0: v = rng.uniform(-1.0, 1.0); break;
      case 1: v = rng.uniform(-1e12, 1e12); break;
      case 2: v = rng.uniform(0.0, 1.0) * 1e-12; break;
      default: v = static_cast<double>(static_cast<int>(rng.uniform(-100, 100)));
    }
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("control profile files") {
  const ControlProblem vdp = make_vdp();
  const fs::path p = temp_file("ctrlode_profile.csv",
                               "t,u1\n0.0,0.0\n2.5,1.0\n5.0,0.5\n");
  const ControlProfile prof = read_profile_csv(p.string(), vdp);
  CHECK(prof(0.0)[0] == 0.0);
  CHECK(prof(1.25)[0] == doctest::Approx(0.5));
  CHECK(prof(2.5)[0] == 1.0);
  CHECK(prof(10.0)[0] == 0.5);  // clamps to the last sample
  fs::remove(p);

  const fs::path bad = temp_file("ctrlode_profile_bad.csv", "t,u1\n0.0,0.0\n");
  CHECK_THROWS_AS(read_profile_csv(bad.string(), vdp), ConfigError);
  fs::remove(bad);
}

TEST_CASE("checkpoint errors") {
  const fs::path p = temp_file("ctrlode_bad_ckpt.json", "{\"format\": \"x\"}");
  CHECK_THROWS_AS(PolicyNetwork::load(p.string()), ConfigError);
  fs::remove(p);
}

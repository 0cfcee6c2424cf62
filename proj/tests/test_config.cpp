#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "config.hpp"

using namespace slowfast;

TEST_CASE("kind names round-trip and reject garbage") {
  for (ExperimentKind k :
       {ExperimentKind::StrongRate, ExperimentKind::WeakRate,
        ExperimentKind::CltRate, ExperimentKind::OracleSuite,
        ExperimentKind::MomentDiag})
    CHECK(kind_from_name(kind_name(k)) == k);
  CHECK(kind_from_name("moment-diagnostics") == ExperimentKind::MomentDiag);
  CHECK_THROWS_AS(kind_from_name("bogus"), ConfigError);
}

TEST_CASE("per-kind defaults carry their own budgets and windows") {
  const ExperimentConfig strong = default_config(ExperimentKind::StrongRate);
  CHECK(strong.replicas == 2000);
  CHECK(strong.slope_min == doctest::Approx(0.40));
  CHECK(strong.slope_max == doctest::Approx(0.60));
  CHECK(strong.theta == 0.0);
  REQUIRE(strong.epsilon.size() == 6);
  CHECK(strong.epsilon.front() == doctest::Approx(1.0 / 16));
  CHECK(strong.epsilon.back() == doctest::Approx(1.0 / 512));
  CHECK_NOTHROW(strong.validate());

  const ExperimentConfig weak = default_config(ExperimentKind::WeakRate);
  CHECK(weak.slope_min == doctest::Approx(0.80));
  CHECK(weak.slope_max == doctest::Approx(1.20));
  CHECK_NOTHROW(weak.validate());

  const ExperimentConfig clt = default_config(ExperimentKind::CltRate);
  CHECK(clt.replicas == 5000);
  CHECK(clt.theta == doctest::Approx(0.25 * kPi));
  CHECK(clt.zbar_replicas == 20000);
  CHECK_NOTHROW(clt.validate());

  const ExperimentConfig oracle = default_config(ExperimentKind::OracleSuite);
  CHECK(oracle.replicas == 1);
  CHECK(oracle.epsilon.empty());
  CHECK(oracle.draws == 100000);
  CHECK_NOTHROW(oracle.validate());

  const ExperimentConfig diag = default_config(ExperimentKind::MomentDiag);
  CHECK(diag.replicas == 400);
  CHECK(diag.family.name == "bounded");
  CHECK_FALSE(diag.family.linear());
  CHECK_NOTHROW(diag.validate());
}

TEST_CASE("resolved json echo round-trips byte for byte") {
  for (ExperimentKind k : {ExperimentKind::StrongRate, ExperimentKind::CltRate,
                           ExperimentKind::MomentDiag}) {
    const ExperimentConfig cfg = default_config(k);
    const std::string echo = resolved_json(cfg);
    const ExperimentConfig back = config_from_text(echo, "json");
    CHECK(resolved_json(back) == echo);
  }
}

TEST_CASE("result records embed their config and parse directly") {
  const ExperimentConfig cfg = default_config(ExperimentKind::WeakRate);
  nlohmann::json rec;
  rec["experiment"] = "weak-rate";
  rec["config"] = nlohmann::json::parse(resolved_json(cfg));
  rec["slope"] = 0.97;
  rec["rows"] = nlohmann::json::array();
  const ExperimentConfig back = config_from_text(rec.dump(), "json");
  CHECK(resolved_json(back) == resolved_json(cfg));
}

TEST_CASE("json configs require a kind and reject unknown keys") {
  CHECK_THROWS_AS(config_from_text("{}", "json"), ConfigError);
  CHECK_THROWS_AS(
      config_from_text(R"({"kind": "strong-rate", "bogus": 1})", "json"),
      ConfigError);
  CHECK_THROWS_AS(config_from_text("not json", "json"), ConfigError);
  CHECK_THROWS_AS(config_from_text("kind = \"strong-rate\"", "yaml"),
                  ConfigError);
}

TEST_CASE("toml subset parses comments, scalars and arrays") {
  const std::string text = R"(# experiment description
kind = "weak-rate"   # trailing comment
seed = 77
modes = 8
epsilon = [0.25, 0.125, 0.0625, 0.03125]
dt_check = false
theta = 0.5
family = "linear"
family_d = 2.0
u0 = [1.0, -0.5]
)";
  const ExperimentConfig cfg = config_from_text(text, "toml");
  CHECK(cfg.kind == ExperimentKind::WeakRate);
  CHECK(cfg.seed == 77);
  CHECK(cfg.modes == 8);
  REQUIRE(cfg.epsilon.size() == 4);
  CHECK(cfg.epsilon[3] == doctest::Approx(0.03125));
  CHECK_FALSE(cfg.dt_check);
  CHECK(cfg.theta == doctest::Approx(0.5));
  CHECK(cfg.family.d == doctest::Approx(2.0));
  REQUIRE(cfg.u0.size() == 2);
  CHECK(cfg.u0[1] == doctest::Approx(-0.5));
  // Absent keys fall back to the weak-rate defaults.
  CHECK(cfg.replicas == 2000);
  CHECK(cfg.slope_max == doctest::Approx(1.20));
}

TEST_CASE("toml errors cite their line and sections are not config keys") {
  const std::string no_eq = "kind = \"strong-rate\"\nmodes 8\n";
  try {
    config_from_text(no_eq, "toml");
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(config_from_text("kind = \"strong-rate\"\nx = \"oops\n", "toml"),
                  ConfigError);
  CHECK_THROWS_AS(config_from_text("kind = \"strong-rate\"\nmodes = [1, \n", "toml"),
                  ConfigError);
  // Flat keys only: a section header prefixes keys into unknown territory.
  const std::string sectioned = "kind = \"strong-rate\"\n[family]\na = 2.0\n";
  CHECK_THROWS_AS(config_from_text(sectioned, "toml"), ConfigError);
}

TEST_CASE("validation rejects out-of-range settings") {
  ExperimentConfig cfg = default_config(ExperimentKind::StrongRate);
  cfg.epsilon = {0.1, 0.2, 0.3, 0.4};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_config(ExperimentKind::StrongRate);
  cfg.replicas = 50;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_config(ExperimentKind::StrongRate);
  cfg.replicas = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_config(ExperimentKind::StrongRate);
  cfg.micro_factor = 0.06;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_config(ExperimentKind::StrongRate);
  cfg.q1_exponent = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.q1_scale = 0.0;  // exponent is irrelevant for silent noise
  CHECK_NOTHROW(cfg.validate());

  cfg = default_config(ExperimentKind::StrongRate);
  cfg.u0.assign(17, 1.0);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_config(ExperimentKind::StrongRate);
  cfg.slope_min = cfg.slope_max;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_config(ExperimentKind::StrongRate);
  cfg.family.a = 12.0;  // kills the mixing margin
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_config(ExperimentKind::MomentDiag);
  cfg.epsilon = {0.25};
  CHECK_NOTHROW(cfg.validate());
  cfg.epsilon.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("overrides merge on top and must keep the kind") {
  ExperimentConfig cfg = default_config(ExperimentKind::StrongRate);
  apply_override_json(cfg, R"({"replicas": 500, "theta": 0.25})");
  CHECK(cfg.replicas == 500);
  CHECK(cfg.theta == doctest::Approx(0.25));
  CHECK_NOTHROW(apply_override_json(cfg, R"({"kind": "strong-rate"})"));
  CHECK_THROWS_AS(apply_override_json(cfg, R"({"kind": "weak-rate"})"),
                  ConfigError);
  CHECK_THROWS_AS(apply_override_json(cfg, R"({"replicas": 0})"), ConfigError);
  CHECK_THROWS_AS(apply_override_json(cfg, "[1, 2]"), ConfigError);
  CHECK_THROWS_AS(apply_override_json(cfg, R"({"modes": 2.5})"), ConfigError);
  CHECK_THROWS_AS(apply_override_json(cfg, R"({"theta": "wide"})"), ConfigError);
}

TEST_CASE("config files are read by extension and missing files are io errors") {
  const std::string path = "config_roundtrip_tmp.toml";
  {
    std::ofstream out(path);
    out << "kind = \"oracle-suite\"\ndraws = 5000\n";
  }
  const ExperimentConfig cfg = config_from_file(path);
  CHECK(cfg.kind == ExperimentKind::OracleSuite);
  CHECK(cfg.draws == 5000);
  std::remove(path.c_str());
  CHECK_THROWS_AS(config_from_file("does_not_exist.toml"), IoError);
  const std::string odd = "config_roundtrip_tmp.cfg";
  {
    std::ofstream out(odd);
    out << "kind = \"oracle-suite\"\n";
  }
  CHECK_THROWS_AS(config_from_file(odd), ConfigError);
  std::remove(odd.c_str());
}

TEST_CASE("sim config assembly pads initial data out to the mode count") {
  ExperimentConfig cfg = default_config(ExperimentKind::StrongRate);
  cfg.modes = 6;
  const SimConfig sim = cfg.make_sim_config();
  REQUIRE(static_cast<int>(sim.u0.size()) == 6);
  CHECK(sim.u0[0] == doctest::Approx(1.0));
  CHECK(sim.u0[1] == doctest::Approx(0.5));
  CHECK(sim.u0[5] == 0.0);
  CHECK(sim.q1.beta[0] == doctest::Approx(1.0));
  CHECK(sim.q1.beta[1] == doctest::Approx(0.25));
}

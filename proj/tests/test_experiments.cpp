#include <doctest.h>

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

#include "experiments.hpp"
#include "oracles.hpp"

using namespace slowfast;

namespace {

ExperimentConfig tiny_strong() {
  ExperimentConfig cfg = default_config(ExperimentKind::StrongRate);
  cfg.seed = 777;
  cfg.threads = 1;
  cfg.modes = 4;
  cfg.time_horizon = 0.3;
  cfg.checkpoints = 6;
  cfg.epsilon = {0.25, 0.125, 0.0625, 0.03125};
  cfg.replicas = 400;
  // Wide sanity window: this epsilon range is pre-asymptotic and the run
  // budget is tiny, so only gross breakage should trip it.
  cfg.slope_min = 0.30;
  cfg.slope_max = 0.90;
  return cfg;
}

}  // namespace

TEST_CASE("tiny strong-rate study lands near the square-root law") {
  const ExperimentConfig cfg = tiny_strong();
  const ResultRecord rec = run_experiment(cfg);
  REQUIRE(rec.fitted);
  CHECK(rec.passed);
  CHECK(rec.fail_reason.empty());
  CHECK(rec.slope > 0.30);
  CHECK(rec.slope < 0.90);
  REQUIRE(rec.rows.size() == 4);
  for (const RatePoint& p : rec.rows) {
    CHECK(p.err > 0.0);
    CHECK(p.se > 0.0);
    CHECK(p.replicas + p.aborts == 400);
    CHECK(p.aborts == 0);
  }
  // Errors shrink with epsilon.
  CHECK(rec.rows.front().err > rec.rows.back().err);
  CHECK(rec.summary.find("slope") != std::string::npos);
}

TEST_CASE("identical configs reproduce results byte for byte") {
  const ExperimentConfig cfg = tiny_strong();
  const ResultRecord a = run_experiment(cfg);
  const ResultRecord b = run_experiment(cfg);
  CHECK(result_csv(a) == result_csv(b));
  CHECK(result_json(a) == result_json(b));

  ExperimentConfig seeded = cfg;
  seeded.seed = 778;
  const ResultRecord c = run_experiment(seeded);
  CHECK(result_csv(a) != result_csv(c));
}

TEST_CASE("worker count does not leak into the reduced results") {
  ExperimentConfig one = tiny_strong();
  one.replicas = 200;
  ExperimentConfig four = one;
  four.threads = 4;
  const ResultRecord a = run_experiment(one);
  const ResultRecord b = run_experiment(four);
  CHECK(result_csv(a) == result_csv(b));
  // The JSON config echo records the thread count; everything else must
  // agree exactly.
  nlohmann::json ja = nlohmann::json::parse(result_json(a));
  nlohmann::json jb = nlohmann::json::parse(result_json(b));
  ja["config"].erase("threads");
  jb["config"].erase("threads");
  CHECK(ja == jb);
}

TEST_CASE("csv carries the pinned schema and a fingerprint header") {
  const ExperimentConfig cfg = tiny_strong();
  const ResultRecord rec = run_experiment(cfg);
  const std::string csv = result_csv(rec);
  CHECK(csv.rfind("# slowfast", 0) == 0);
  CHECK(csv.find("# experiment: strong-rate") != std::string::npos);
  CHECK(csv.find("# seed: 777") != std::string::npos);
  CHECK(csv.find("epsilon,error,stderr,replicas,aborts\n") !=
        std::string::npos);
  // One data line per grid point.
  size_t lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 4 + 4);  // 3 comments + schema + 4 rows
}

TEST_CASE("result json round-trips through the config parser") {
  const ExperimentConfig cfg = tiny_strong();
  const ResultRecord rec = run_experiment(cfg);
  const std::string text = result_json(rec);
  const nlohmann::json obj = nlohmann::json::parse(text);
  CHECK(obj.at("experiment") == "strong-rate");
  CHECK(obj.at("passed").get<bool>() == rec.passed);
  REQUIRE(obj.contains("config"));
  const ExperimentConfig back = config_from_text(text, "json");
  CHECK(resolved_json(back) == resolved_json(cfg));
  REQUIRE(obj.at("rows").size() == 4);
  CHECK(obj.at("rows")[0].at("epsilon").get<double>() ==
        doctest::Approx(0.25));
}

TEST_CASE("moment diagnostics report one row per epsilon") {
  ExperimentConfig cfg = default_config(ExperimentKind::MomentDiag);
  cfg.seed = 911;
  cfg.threads = 1;
  cfg.modes = 4;
  cfg.time_horizon = 0.2;
  cfg.checkpoints = 4;
  cfg.replicas = 40;
  cfg.epsilon = {0.25, 0.0625};
  const ResultRecord rec = run_experiment(cfg);
  REQUIRE(rec.rows.size() == 2);
  for (const RatePoint& p : rec.rows) CHECK(p.err > 0.0);
  CHECK_FALSE(rec.fitted);
  const nlohmann::json extras = nlohmann::json::parse(rec.extras_json);
  CHECK(extras.contains("moment_ratio"));
  CHECK(extras.contains("uniformly_bounded"));
  CHECK(extras.at("y_moment").size() == 2);
}

TEST_CASE("deterministic oracle battery passes and spots a broken basis") {
  OracleOptions opt;
  opt.n = 8;
  opt.draws = 20000;
  opt.deterministic_only = true;
  const std::vector<OracleCheck> checks =
      run_oracle_battery(opt, NoiseStream(13));
  REQUIRE(!checks.empty());
  for (const OracleCheck& c : checks) {
    INFO(c.name);
    CHECK(c.pass);
  }

  // Negative control: a rotation frequency inconsistent with the energy
  // weight must break the isometry.  (Perturbing lambda alone would not:
  // the group and the norm would stay mutually consistent.)
  const auto warped = std::make_shared<SpectralBasis>(8);
  warped->omega[3] *= 1.001;
  CHECK(isometry_deviation(warped, NoiseStream(13), 50) > 1e-9);
}

TEST_CASE("abort accounting separates lost replicas from the mean") {
  // Initial data at the double range limit overflows the first grid
  // transform, so every replica aborts; the experiment must fail on the
  // abort fraction rather than average garbage.
  ExperimentConfig cfg = tiny_strong();
  cfg.u0 = {1e308, 1e308};
  cfg.replicas = 100;
  const ResultRecord rec = run_experiment(cfg);
  CHECK_FALSE(rec.passed);
  CHECK(rec.fail_reason.find("abort") != std::string::npos);
  REQUIRE(!rec.rows.empty());
  CHECK(rec.rows[0].replicas + rec.rows[0].aborts == 100);
  CHECK(rec.rows[0].aborts == 100);
  CHECK_FALSE(rec.fitted);
}

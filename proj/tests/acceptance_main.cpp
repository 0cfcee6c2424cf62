// Acceptance battery: ten gates over the full laboratory, one printed line
// per gate, nonzero exit if any gate fails.  Tolerances and budgets are
// pinned here on purpose; loosening them is not a fix.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "experiments.hpp"
#include "oracles.hpp"

using namespace slowfast;
using nlohmann::json;

namespace {

bool g_all_pass = true;

void gate(int id, bool pass, const std::string& detail) {
  if (!pass) g_all_pass = false;
  std::printf("CRITERION %2d: %s %s\n", id, detail.c_str(),
              pass ? "PASS" : "FAIL");
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

bool aborts_ok(const std::vector<RatePoint>& rows) {
  for (const RatePoint& p : rows) {
    const long requested = p.replicas + p.aborts;
    if (requested > 0 && static_cast<double>(p.aborts) > 0.001 * requested)
      return false;
  }
  return true;
}

const OracleCheck* find_check(const std::vector<OracleCheck>& checks,
                              const std::string& name) {
  for (const OracleCheck& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

int main() {
  std::printf("acceptance battery, %s\n", build_fingerprint().c_str());
  std::fflush(stdout);

  // ---- 1 + 9: strong rate with the step-halving control ----
  ExperimentConfig strong_cfg = default_config(ExperimentKind::StrongRate);
  strong_cfg.dt_check = true;
  const ResultRecord strong = run_experiment(strong_cfg);
  {
    const bool slope_ok = strong.fitted && strong.slope >= 0.40 &&
                          strong.slope <= 0.60;
    const bool pass = slope_ok && aborts_ok(strong.rows) &&
                      strong.wall_seconds <= 900.0;
    gate(1, pass,
         "strong error slope " + fmt(strong.slope) + " +- " +
             fmt(strong.half_width) + " target [0.40, 0.60], " +
             fmt(strong.wall_seconds) + " s (cap 900)");
  }

  // ---- 2: weak rate ----
  {
    const ExperimentConfig cfg = default_config(ExperimentKind::WeakRate);
    const ResultRecord rec = run_experiment(cfg);
    const bool pass = rec.passed && rec.wall_seconds <= 900.0;
    gate(2, pass,
         "weak error slope " + fmt(rec.slope) + " +- " + fmt(rec.half_width) +
             " target [0.80, 1.20], " + fmt(rec.wall_seconds) +
             " s (cap 900)" +
             (rec.fail_reason.empty() ? "" : " [" + rec.fail_reason + "]"));
  }

  // ---- 3: normal deviations ----
  {
    const ExperimentConfig cfg = default_config(ExperimentKind::CltRate);
    const ResultRecord rec = run_experiment(cfg);
    double lyap_z = std::nan("");
    if (!rec.extras_json.empty()) {
      const json extras = json::parse(rec.extras_json);
      if (extras.contains("lyapunov"))
        lyap_z = extras["lyapunov"]["z"].get<double>();
    }
    const bool pass = rec.passed && rec.wall_seconds <= 1800.0;
    gate(3, pass,
         "deviation slope " + fmt(rec.slope) + " +- " + fmt(rec.half_width) +
             " target [0.35, 0.65], limit-variance z " + fmt(lyap_z) +
             " (max 3), " + fmt(rec.wall_seconds) + " s (cap 1800)" +
             (rec.fail_reason.empty() ? "" : " [" + rec.fail_reason + "]"));
  }

  // ---- 4, 5, 6: one full oracle battery ----
  {
    const OracleOptions opt;  // defaults: 16 modes, 1e5 draws, full budgets
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<OracleCheck> checks =
        run_oracle_battery(opt, NoiseStream(20260815).child("oracles"));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    const std::set<std::string> drift_names{"fbar-linear", "fbar-se-budget"};
    const std::set<std::string> sigma_names{"sigma-linear",
                                            "sigma-clipped-mass"};
    bool drift_ok = true, sigma_ok = true, core_ok = true;
    std::string core_fail;
    int core_total = 0;
    for (const OracleCheck& c : checks) {
      if (drift_names.count(c.name)) {
        drift_ok = drift_ok && c.pass;
      } else if (sigma_names.count(c.name)) {
        sigma_ok = sigma_ok && c.pass;
      } else {
        ++core_total;
        if (!c.pass) {
          core_ok = false;
          core_fail += (core_fail.empty() ? "" : ", ") + c.name;
        }
      }
    }
    const OracleCheck* fz = find_check(checks, "fbar-linear");
    const OracleCheck* fse = find_check(checks, "fbar-se-budget");
    const OracleCheck* sz = find_check(checks, "sigma-linear");
    const OracleCheck* sc = find_check(checks, "sigma-clipped-mass");
    drift_ok = drift_ok && fz != nullptr && fse != nullptr;
    sigma_ok = sigma_ok && sz != nullptr && sc != nullptr;

    gate(4, drift_ok,
         "averaged-drift estimator vs closed form: max |z| " +
             (fz ? fmt(fz->measured) : "-") + " (max 3), relative SE " +
             (fse ? fmt(fse->measured) : "-") + " (max 0.01)");
    gate(5, sigma_ok,
         "deviation-noise estimator vs closed form: max diagonal |z| " +
             (sz ? fmt(sz->measured) : "-") +
             " (max 3), clipped spectral mass " +
             (sc ? fmt(sc->measured) : "-") + " (max 0.01)");
    gate(6, core_ok,
         core_ok ? "deterministic and sampler oracles: " +
                       std::to_string(core_total) + " checks clean, " +
                       fmt(secs) + " s"
                 : "oracle failures: " + core_fail);
  }

  // ---- 7: uniform slow-energy moments on the bounded family ----
  {
    const ExperimentConfig cfg = default_config(ExperimentKind::MomentDiag);
    const ResultRecord rec = run_experiment(cfg);
    double ratio = std::nan("");
    if (!rec.extras_json.empty()) {
      const json extras = json::parse(rec.extras_json);
      if (extras.contains("moment_ratio"))
        ratio = extras["moment_ratio"].get<double>();
    }
    gate(7, rec.passed,
         "sup-t slow energy moment spread factor " + fmt(ratio) +
             " across the epsilon grid (max 2)");
  }

  // ---- 8: Hoelder fast drift matches the Lipschitz rate ----
  {
    ExperimentConfig base = default_config(ExperimentKind::StrongRate);
    base.epsilon = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
    base.replicas = 160;
    base.slope_min = -5.0;  // the gate here is the slope difference
    base.slope_max = 5.0;
    base.family.name = "bounded";
    const ResultRecord lip = run_experiment(base);
    base.family.name = "bounded-holder";
    const ResultRecord hol = run_experiment(base);
    const double delta = std::abs(hol.slope - lip.slope);
    const bool pass = lip.fitted && hol.fitted && aborts_ok(lip.rows) &&
                      aborts_ok(hol.rows) && delta < 0.1;
    gate(8, pass,
         "bounded family slope " + fmt(lip.slope) + ", Hoelder variant " +
             fmt(hol.slope) + ", |difference| " + fmt(delta) + " (max 0.1)");
  }

  // ---- 9: step-halving control from the strong run ----
  {
    bool pass = false;
    double worst = std::nan("");
    if (!strong.extras_json.empty()) {
      const json extras = json::parse(strong.extras_json);
      if (extras.contains("dt_check")) {
        worst = extras["dt_check"]["max_rel_delta"].get<double>();
        pass = extras["dt_check"]["pass"].get<bool>();
      }
    }
    gate(9, pass,
         "halving the micro step moves errors by at most " + fmt(worst) +
             " relative (max 0.20)");
  }

  // ---- 10: bit-for-bit reproducibility ----
  {
    ExperimentConfig cfg = default_config(ExperimentKind::StrongRate);
    cfg.seed = 31415;
    cfg.threads = 1;
    cfg.modes = 4;
    cfg.time_horizon = 0.2;
    cfg.checkpoints = 4;
    cfg.epsilon = {0.5, 0.25, 0.125, 0.0625};
    cfg.replicas = 100;
    cfg.slope_min = -5.0;
    cfg.slope_max = 5.0;
    const ResultRecord a = run_experiment(cfg);
    const ResultRecord b = run_experiment(cfg);
    const bool pass =
        result_csv(a) == result_csv(b) && result_json(a) == result_json(b);
    gate(10, pass,
         std::string("rerun with identical config and seed is byte-identical ")
             + "(csv " + (result_csv(a) == result_csv(b) ? "ok" : "DIFFERS") +
             ", json " +
             (result_json(a) == result_json(b) ? "ok" : "DIFFERS") + ")");
  }

  std::printf("acceptance: %s\n", g_all_pass ? "ALL PASS" : "FAILURES");
  return g_all_pass ? 0 : 1;
}

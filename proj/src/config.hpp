// Experiment configuration: typed settings for the five experiment kinds,
// defaults per kind, JSON and TOML ingestion with unknown-key rejection,
// partial overrides, and a canonical JSON echo that round-trips through the
// parser byte for byte.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "estimators.hpp"

namespace slowfast {

enum class ExperimentKind {
  StrongRate,
  WeakRate,
  CltRate,
  OracleSuite,
  MomentDiag,
};

const char* kind_name(ExperimentKind kind);
ExperimentKind kind_from_name(const std::string& name);  // throws ConfigError

struct FamilyConfig {
  std::string name = "linear";  // linear | bounded | bounded-holder
  double a = 1.0;
  double b = 1.0;
  double c = 0.0;
  double d = 1.0;
  double clip = 8.0;    // bounded families: clamp range of the fast drift
  double kappa = 0.5;   // bounded-holder: Holder term weight

  CoefficientPtr build() const;  // validates, throws ConfigError
  bool linear() const { return name == "linear"; }
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::StrongRate;
  std::uint64_t seed = 20260815;
  int threads = 0;  // 0 = hardware concurrency
  int modes = 16;
  double time_horizon = 0.5;
  int checkpoints = 20;
  double micro_factor = 0.02;
  std::vector<double> epsilon;  // strictly decreasing, in (0, 1]
  long replicas = 2000;
  FamilyConfig family;
  double q1_exponent = 2.0;
  double q1_scale = 1.0;
  double q2_exponent = 2.0;
  double q2_scale = 1.0;
  // Initial data and test direction as leading-mode coefficient lists,
  // zero-padded to `modes`.
  std::vector<double> u0{1.0, 0.5};
  std::vector<double> v0{1.0};
  std::vector<double> y0{2.0};
  std::vector<double> functional{1.0, 0.5};
  double theta = 0.0;  // phase of the sinusoid test functional
  ErgodicConfig ergodic;
  PsiOptions psi;
  // Strong rate: rerun the ladder at half the micro step and report deltas.
  bool dt_check = false;
  // Expected rate window; the experiment passes iff the fitted slope lands
  // inside it.
  double slope_min = 0.40;
  double slope_max = 0.60;
  // Oracle suite sampling size.
  long draws = 100000;
  // CLT limit-equation ensemble: replica count and integrator step.
  long zbar_replicas = 20000;
  double zbar_dt = 5e-4;

  void validate() const;  // throws ConfigError
  std::vector<double> padded(const std::vector<double>& modes_list) const;
  SimConfig make_sim_config() const;  // builds basis + noise, validates
};

ExperimentConfig default_config(ExperimentKind kind);

// format is "json" or "toml".  A JSON object may be either a bare config or
// a full result record, in which case its "config" member is read.  Unknown
// keys are rejected; "kind" is required and selects the per-kind defaults
// that absent keys fall back to.
ExperimentConfig config_from_text(const std::string& text,
                                  const std::string& format);
ExperimentConfig config_from_file(const std::string& path);

// Merge a flat JSON object of config keys into cfg (highest precedence).
// "kind" may appear but must match cfg.kind.
void apply_override_json(ExperimentConfig& cfg, const std::string& json_text);

// Canonical echo: parsing this JSON yields an identical config and an
// identical echo (byte-for-byte round trip).
std::string resolved_json(const ExperimentConfig& cfg);

}  // namespace slowfast

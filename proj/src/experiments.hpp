// Experiment drivers: the three convergence-rate studies, the oracle suite,
// and the moment diagnostics, plus deterministic result emission (CSV, JSON,
// log sidecar).  Replicas fan out over a worker pool into per-replica slots
// and are reduced in fixed order, so outputs are byte-identical for any
// thread count.
#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "estimators.hpp"

namespace slowfast {

struct ResultRecord {
  ExperimentConfig config;
  std::vector<RatePoint> rows;
  double slope = 0.0;
  double half_width = 0.0;
  double intercept = 0.0;
  bool fitted = false;
  bool passed = false;
  std::string fail_reason;  // empty when passed
  std::string summary;      // human-readable, one line per finding
  std::string extras_json;  // kind-specific JSON object
  double wall_seconds = 0.0;  // log sidecar only, excluded from CSV/JSON
};

// "slowfast <version> (<compiler>, <build type>)"
std::string build_fingerprint();

ResultRecord run_experiment(const ExperimentConfig& cfg);

std::string result_csv(const ResultRecord& rec);
std::string result_json(const ResultRecord& rec);

// Writes <kind>.csv, <kind>.json (both deterministic) and <kind>.log
// (timings, free-form) under out_dir, creating it if needed.
void write_result(const ResultRecord& rec, const std::string& out_dir);

}  // namespace slowfast

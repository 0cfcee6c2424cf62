#include "slowfast/slowfast.h"

#include <cmath>
#include <limits>
#include <new>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "experiments.hpp"

using namespace slowfast;

struct sf_experiment {
  ExperimentConfig config;
  std::string resolved;  // backing store for sf_experiment_resolved_json
};

struct sf_result {
  ResultRecord record;
  std::string csv;
  std::string json;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Uniform exception-to-status mapping for every entry point.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const ConfigError& e) {
    return fail(SF_BAD_CONFIG, e.what());
  } catch (const IoError& e) {
    return fail(SF_IO_ERROR, e.what());
  } catch (const ExperimentError& e) {
    return fail(SF_FAIL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SF_FAIL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SF_FAIL, e.what());
  }
}

}  // namespace

extern "C" {

const char* sf_version(void) { return "0.1.0"; }

const char* sf_build_fingerprint(void) {
  static const std::string fp = build_fingerprint();
  return fp.c_str();
}

const char* sf_last_error(void) { return g_last_error.c_str(); }

int sf_experiment_default(const char* kind, sf_experiment** out) {
  if (kind == nullptr || out == nullptr)
    return fail(SF_BAD_ARG, "sf_experiment_default: null argument");
  *out = nullptr;
  return guarded([&]() {
    auto exp = new sf_experiment;
    exp->config = default_config(kind_from_name(kind));
    *out = exp;
    return SF_OK;
  });
}

int sf_experiment_from_file(const char* path, sf_experiment** out) {
  if (path == nullptr || out == nullptr)
    return fail(SF_BAD_ARG, "sf_experiment_from_file: null argument");
  *out = nullptr;
  return guarded([&]() {
    auto exp = new sf_experiment;
    try {
      exp->config = config_from_file(path);
    } catch (...) {
      delete exp;
      throw;
    }
    *out = exp;
    return SF_OK;
  });
}

int sf_experiment_from_text(const char* text, const char* format,
                            sf_experiment** out) {
  if (text == nullptr || format == nullptr || out == nullptr)
    return fail(SF_BAD_ARG, "sf_experiment_from_text: null argument");
  *out = nullptr;
  return guarded([&]() {
    auto exp = new sf_experiment;
    try {
      exp->config = config_from_text(text, format);
    } catch (...) {
      delete exp;
      throw;
    }
    *out = exp;
    return SF_OK;
  });
}

int sf_experiment_override_json(sf_experiment* exp, const char* overrides) {
  if (exp == nullptr || overrides == nullptr)
    return fail(SF_BAD_ARG, "sf_experiment_override_json: null argument");
  return guarded([&]() {
    apply_override_json(exp->config, overrides);
    return SF_OK;
  });
}

int sf_experiment_resolved_json(sf_experiment* exp, const char** out_json) {
  if (exp == nullptr || out_json == nullptr)
    return fail(SF_BAD_ARG, "sf_experiment_resolved_json: null argument");
  return guarded([&]() {
    exp->resolved = resolved_json(exp->config);
    *out_json = exp->resolved.c_str();
    return SF_OK;
  });
}

int sf_experiment_run(sf_experiment* exp, sf_result** out) {
  if (exp == nullptr || out == nullptr)
    return fail(SF_BAD_ARG, "sf_experiment_run: null argument");
  *out = nullptr;
  return guarded([&]() {
    auto res = new sf_result;
    try {
      res->record = run_experiment(exp->config);
      res->csv = result_csv(res->record);
      res->json = result_json(res->record);
    } catch (...) {
      delete res;
      throw;
    }
    *out = res;
    if (res->record.passed) return static_cast<int>(SF_OK);
    return fail(SF_FAIL, res->record.fail_reason.empty()
                             ? "experiment failed"
                             : res->record.fail_reason);
  });
}

void sf_experiment_free(sf_experiment* exp) { delete exp; }

int sf_result_passed(const sf_result* res) {
  return res != nullptr && res->record.passed ? 1 : 0;
}

const char* sf_result_fail_reason(const sf_result* res) {
  return res == nullptr ? "" : res->record.fail_reason.c_str();
}

const char* sf_result_summary(const sf_result* res) {
  return res == nullptr ? "" : res->record.summary.c_str();
}

const char* sf_result_csv(const sf_result* res) {
  return res == nullptr ? "" : res->csv.c_str();
}

const char* sf_result_json(const sf_result* res) {
  return res == nullptr ? "" : res->json.c_str();
}

double sf_result_slope(const sf_result* res) {
  if (res == nullptr || !res->record.fitted)
    return std::numeric_limits<double>::quiet_NaN();
  return res->record.slope;
}

double sf_result_slope_halfwidth(const sf_result* res) {
  if (res == nullptr || !res->record.fitted)
    return std::numeric_limits<double>::quiet_NaN();
  return res->record.half_width;
}

int sf_result_write(const sf_result* res, const char* out_dir) {
  if (res == nullptr || out_dir == nullptr)
    return fail(SF_BAD_ARG, "sf_result_write: null argument");
  return guarded([&]() {
    write_result(res->record, out_dir);
    return SF_OK;
  });
}

void sf_result_free(sf_result* res) { delete res; }

}  // extern "C"

// Command line driver for the slowfast experiment library.  Talks to the
// core exclusively through the C API.
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "slowfast/slowfast.h"

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string overrides;  // raw JSON passed through
  std::uint64_t seed = 0;
  bool seed_set = false;
  long replicas = 0;
  bool replicas_set = false;
  int threads = -1;
  bool threads_set = false;
};

int status_to_exit(int status) {
  switch (status) {
    case SF_OK: return 0;
    case SF_BAD_CONFIG: return 2;
    case SF_IO_ERROR: return 3;
    case SF_BAD_ARG: return 4;
    default: return 1;
  }
}

int fail_with(int status, const char* stage) {
  std::fprintf(stderr, "error (%s): %s\n", stage, sf_last_error());
  return status_to_exit(status);
}

int run_kind(const std::string& kind, const Options& opt) {
  sf_experiment* exp = nullptr;
  int status = SF_OK;
  if (!opt.config_path.empty()) {
    status = sf_experiment_from_file(opt.config_path.c_str(), &exp);
    if (status != SF_OK) return fail_with(status, "config");
    // The config file fixes the kind; it must be the invoked subcommand.
    const char* resolved = nullptr;
    status = sf_experiment_resolved_json(exp, &resolved);
    if (status != SF_OK) {
      sf_experiment_free(exp);
      return fail_with(status, "config");
    }
    const std::string want = "\"kind\": \"" + kind + "\"";
    if (std::string(resolved).find(want) == std::string::npos) {
      std::fprintf(stderr,
                   "error (config): config file kind does not match "
                   "subcommand '%s'\n",
                   kind.c_str());
      sf_experiment_free(exp);
      return 2;
    }
  } else {
    status = sf_experiment_default(kind.c_str(), &exp);
    if (status != SF_OK) return fail_with(status, "config");
  }

  // Precedence: flags > SLOWFAST_SEED > file > per-kind default.
  std::string merged = "{";
  bool first = true;
  const auto add = [&](const std::string& key, const std::string& value) {
    if (!first) merged += ",";
    merged += "\"" + key + "\":" + value;
    first = false;
  };
  if (!opt.seed_set) {
    if (const char* env = std::getenv("SLOWFAST_SEED")) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (end == env || *end != '\0') {
        std::fprintf(stderr, "error (config): SLOWFAST_SEED is not a valid "
                             "unsigned integer: %s\n", env);
        sf_experiment_free(exp);
        return 2;
      }
      add("seed", std::to_string(v));
    }
  } else {
    add("seed", std::to_string(opt.seed));
  }
  if (opt.replicas_set) add("replicas", std::to_string(opt.replicas));
  if (opt.threads_set) add("threads", std::to_string(opt.threads));
  merged += "}";
  if (merged != "{}") {
    status = sf_experiment_override_json(exp, merged.c_str());
    if (status != SF_OK) {
      sf_experiment_free(exp);
      return fail_with(status, "overrides");
    }
  }
  if (!opt.overrides.empty()) {
    status = sf_experiment_override_json(exp, opt.overrides.c_str());
    if (status != SF_OK) {
      sf_experiment_free(exp);
      return fail_with(status, "overrides");
    }
  }

  sf_result* res = nullptr;
  status = sf_experiment_run(exp, &res);
  if (res == nullptr) {
    sf_experiment_free(exp);
    return fail_with(status, "run");
  }
  std::fputs(sf_result_summary(res), stdout);
  if (sf_result_passed(res)) {
    std::fprintf(stdout, "%s: PASS\n", kind.c_str());
  } else {
    std::fprintf(stdout, "%s: FAIL (%s)\n", kind.c_str(),
                 sf_result_fail_reason(res));
  }
  int exit_code = sf_result_passed(res) ? 0 : 1;
  if (!opt.out_dir.empty()) {
    const int wstatus = sf_result_write(res, opt.out_dir.c_str());
    if (wstatus != SF_OK) {
      std::fprintf(stderr, "error (write): %s\n", sf_last_error());
      exit_code = status_to_exit(wstatus);
    } else {
      std::fprintf(stdout, "results written to %s/%s.{csv,json,log}\n",
                   opt.out_dir.c_str(), kind.c_str());
    }
  }
  sf_result_free(res);
  sf_experiment_free(exp);
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("slowfast ") + sf_version() +
               " - slow-fast SPDE rate experiments"};
  app.require_subcommand(1);

  Options opt;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path,
                    "Config file (.json or .toml)");
    sub->add_option("--seed", opt.seed, "Master seed (overrides config)")
        ->check(CLI::NonNegativeNumber)
        ->each([&](const std::string&) { opt.seed_set = true; });
    sub->add_option("--out", opt.out_dir, "Output directory for results");
    sub->add_option("--replicas", opt.replicas,
                    "Replica count (overrides config)")
        ->each([&](const std::string&) { opt.replicas_set = true; });
    sub->add_option("--threads", opt.threads,
                    "Worker threads, 0 = hardware (overrides config)")
        ->each([&](const std::string&) { opt.threads_set = true; });
    sub->add_option("--set", opt.overrides,
                    "Raw JSON object of config overrides");
  };
  for (const char* kind : {"strong-rate", "weak-rate", "clt-rate",
                           "oracle-suite", "moment-diag"}) {
    add_common(app.add_subcommand(
        kind, std::string("Run the ") + kind + " experiment"));
  }

  CLI11_PARSE(app, argc, argv);
  const std::string kind = app.get_subcommands().front()->get_name();
  return run_kind(kind, opt);
}

/* slowfast: Monte Carlo laboratory for a slow-fast stochastic wave/heat system.
 *
 * C interface to the experiment runner.  All state lives behind opaque
 * handles; every call that can fail returns an int status code and leaves a
 * message retrievable via sf_last_error() (thread-local).  Strings returned
 * by accessor functions are owned by the handle they were read from and stay
 * valid until the handle is freed.
 */
#ifndef SLOWFAST_H
#define SLOWFAST_H

#include <stdint.h>
#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct sf_experiment sf_experiment;
typedef struct sf_result sf_result;

enum {
  SF_OK = 0,
  SF_FAIL = 1,       /* experiment ran but failed its gate (aborts, fit, oracle) */
  SF_BAD_CONFIG = 2, /* malformed or invalid configuration */
  SF_IO_ERROR = 3,   /* file could not be read or written */
  SF_BAD_ARG = 4     /* null handle or invalid argument */
};

const char* sf_version(void);
const char* sf_build_fingerprint(void);

/* Message for the most recent failing call on this thread ("" if none). */
const char* sf_last_error(void);

/* Construction.  Kind is one of: strong-rate, weak-rate, clt-rate,
 * oracle-suite, moment-diag.  Format is "json" or "toml"; from_file detects
 * the format from the extension. */
int sf_experiment_default(const char* kind, sf_experiment** out);
int sf_experiment_from_file(const char* path, sf_experiment** out);
int sf_experiment_from_text(const char* text, const char* format,
                            sf_experiment** out);

/* Merge a flat JSON object of overrides (highest precedence), e.g.
 * {"seed": 7, "replicas": 500, "threads": 2}. */
int sf_experiment_override_json(sf_experiment* exp, const char* overrides);

/* Fully resolved configuration as a JSON string. */
int sf_experiment_resolved_json(sf_experiment* exp, const char** out_json);

int sf_experiment_run(sf_experiment* exp, sf_result** out);
void sf_experiment_free(sf_experiment* exp);

int sf_result_passed(const sf_result* res); /* 1 = pass, 0 = fail */
const char* sf_result_fail_reason(const sf_result* res);
const char* sf_result_summary(const sf_result* res); /* human-readable table */
const char* sf_result_csv(const sf_result* res);
const char* sf_result_json(const sf_result* res);
double sf_result_slope(const sf_result* res);           /* NaN if no fit */
double sf_result_slope_halfwidth(const sf_result* res); /* NaN if no fit */

/* Write <kind>.csv, <kind>.json and <kind>.log into out_dir (created if
 * missing).  The .log carries volatile data (wall clock); the .csv and .json
 * are byte-identical across reruns of the same build, config and seed. */
int sf_result_write(const sf_result* res, const char* out_dir);
void sf_result_free(sf_result* res);

#ifdef __cplusplus
}
#endif

#endif /* SLOWFAST_H */

// Closed-form and quadrature oracles for the deterministic core and the
// Monte Carlo estimators.  Every check is an independent route to a number
// the implementation must reproduce: group algebra at 1e-12, sampled
// covariances against quadrature at 3 standard errors, estimators against
// the linear family's closed forms.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "estimators.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace slowfast {

struct OracleCheck {
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  double tol = 0.0;  // |measured - expected| <= tol passes
  bool pass = false;
};

struct OracleOptions {
  int n = 16;
  long draws = 100000;
  // Deterministic-core and sampled-covariance checks only (fast subset).
  bool deterministic_only = false;
  ErgodicConfig ergodic;
  PsiOptions psi;
};

// Simpson integration of f over [0, t] with 2^k panels (quadrature oracle).
double simpson(double t, int panels, const std::function<double(double)>& f);

std::vector<OracleCheck> run_oracle_battery(const OracleOptions& opt,
                                            const NoiseStream& stream);

// Wave-group isometry deviation on a given basis; the oracle battery runs it
// on the true basis (expects ~1e-16) and tests run it on a perturbed basis
// to confirm the check has teeth.
double isometry_deviation(const BasisPtr& basis, const NoiseStream& stream,
                          int trials);

}  // namespace slowfast

// Monte Carlo estimators for the averaged drift, the Poisson-equation
// corrector, and the deviation noise intensity, plus the convergence-rate
// fit.  All estimators report per-component standard errors computed across
// independent replicas; none of them assume the linear family, which is used
// only to validate them in tests.
#pragma once

#include <vector>

#include "coefficients.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "noise.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace slowfast {

struct FieldEstimate {
  std::vector<double> value;
  std::vector<double> se;
};

// Budget for ergodic averaging.  The mixing margin a_eff =
// lambda_1 - lip_y(g) paces everything: burn-in must cover 5/a_eff and the
// horizon must dominate the burn-in.
struct ErgodicConfig {
  double burn_in = 2.0;
  double horizon = 640.0;
  double dt = 0.02;
  // Sized so the drift estimate lands well inside a 1% relative-SE budget
  // at the default coefficients.
  int replicas = 160;
  int thinning = 1;

  void validate(double margin) const;
};

// Averaged drift at fixed u: time average of f(u, Y_t) along the frozen
// equation, averaged over replicas.
FieldEstimate estimate_fbar(const BasisPtr& basis,
                            const CoefficientPair& family,
                            const NoiseSpec& q2,
                            const std::vector<double>& u,
                            const ErgodicConfig& cfg,
                            const NoiseStream& stream);

// Time grid for the corrector integral: geometric growth resolves the fast
// initial transient without paying for it on the tail.
struct PsiOptions {
  double t_cut = 1.0;     // must cover 8/a_eff
  // Enough replicas that the per-mode standard error is itself estimated
  // with ~20 degrees of freedom; z-scores against it are then calibrated.
  int replicas = 24;
  double grading = 0.08;  // relative step growth, h ~ grading * (t + t0)
  double dt_max = 0.02;

  std::vector<double> grid(double t0) const;
  void validate(double margin) const;
};

// Corrector Psi(u, y) = integral_0^inf E[f(u, Y_t^u(y)) - Fbar(u)] dt,
// truncated at t_cut; trapezoidal in t, replica-averaged in the expectation.
// The reported tail bound is |deltaF(u,y)| e^{-a_eff t_cut} / a_eff.
FieldEstimate estimate_psi(const BasisPtr& basis,
                           const CoefficientPair& family, const NoiseSpec& q2,
                           const std::vector<double>& u,
                           const std::vector<double>& y,
                           const std::vector<double>& fbar_u,
                           const PsiOptions& opt, const NoiseStream& stream,
                           double* tail_bound = nullptr);

struct SigmaEstimate {
  int n = 0;
  std::vector<double> matrix;  // Sigma Sigma*, clipped to PSD, row-major
  std::vector<double> factor;  // symmetric PSD square root
  std::vector<double> se;      // entrywise SE of the raw symmetrized average
  double clipped_mass = 0.0;   // |negative spectrum| / positive trace
  double trace = 0.0;
};

// Deviation noise intensity at fixed u:
//   Sigma Sigma* = M + M^T,  M = E_mu[ deltaF(u, y) (x) Psi(u, y) ],
// sampled along frozen trajectories with a nested corrector estimate per
// retained sample.  Negative eigenvalues (sampling noise) are clipped and
// their relative mass reported.
SigmaEstimate estimate_sigma(const BasisPtr& basis,
                             const CoefficientPair& family,
                             const NoiseSpec& q2, const std::vector<double>& u,
                             const std::vector<double>& fbar_u,
                             const ErgodicConfig& outer, const PsiOptions& psi,
                             const NoiseStream& stream);

// Directional derivative of the averaged drift by central differencing with
// common random numbers: each replica runs u + dz and u - dz on the same
// stream, so the frozen-path noise cancels in the difference.
FieldEstimate estimate_dfbar(const BasisPtr& basis,
                             const CoefficientPair& family,
                             const NoiseSpec& q2, const std::vector<double>& u,
                             const std::vector<double>& z,
                             const ErgodicConfig& cfg,
                             const NoiseStream& stream, double delta = 0.0);

struct RatePoint {
  double eps = 0.0;
  double err = 0.0;
  double se = 0.0;
  long replicas = 0;
  long aborts = 0;
};

struct RateFit {
  double slope = 0.0;
  double half_width = 0.0;  // 1.96 sd of the slope
  double intercept = 0.0;
};

// Weighted least squares of log(err) on log(eps); weights from the delta
// method, var(log err) = (se/err)^2.  Rejects grids shorter than 4 and any
// noise-dominated point (err <= 3 se).
RateFit fit_rate(const std::vector<RatePoint>& points);

}  // namespace slowfast

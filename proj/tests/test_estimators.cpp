#include <doctest.h>

#include <cmath>
#include <vector>

#include "estimators.hpp"

using namespace slowfast;

namespace {

std::vector<RatePoint> power_law_points(double rate, double noise_frac,
                                        unsigned seed) {
  Rng rng(seed);
  std::vector<RatePoint> pts;
  for (int i = 4; i <= 9; ++i) {
    const double eps = std::pow(2.0, -i);
    RatePoint p;
    p.eps = eps;
    const double clean = 0.8 * std::pow(eps, rate);
    p.err = clean * (1.0 + noise_frac * rng.normal());
    p.se = clean * noise_frac;
    p.replicas = 1000;
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

TEST_CASE("rate fit recovers exact power laws") {
  const RateFit one = fit_rate(power_law_points(1.0, 0.0, 3));
  CHECK(one.slope == doctest::Approx(1.0).epsilon(1e-10));
  const RateFit half = fit_rate(power_law_points(0.5, 0.0, 3));
  CHECK(half.slope == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(half.half_width < 1e-6);
}

TEST_CASE("rate fit tolerates one percent noise") {
  const RateFit fit = fit_rate(power_law_points(0.5, 0.01, 11));
  CHECK(fit.slope > 0.45);
  CHECK(fit.slope < 0.55);
}

TEST_CASE("rate fit is invariant under error rescaling") {
  std::vector<RatePoint> pts = power_law_points(0.5, 0.01, 7);
  const RateFit base = fit_rate(pts);
  for (auto& p : pts) {
    p.err *= 100.0;
    p.se *= 100.0;
  }
  const RateFit scaled = fit_rate(pts);
  CHECK(scaled.slope == doctest::Approx(base.slope).epsilon(1e-12));
}

TEST_CASE("rate fit refuses short grids and noise-dominated points") {
  std::vector<RatePoint> pts = power_law_points(0.5, 0.0, 3);
  pts.resize(3);
  CHECK_THROWS_AS(fit_rate(pts), ExperimentError);

  pts = power_law_points(0.5, 0.0, 3);
  pts[5].se = pts[5].err;  // err <= 3 se
  bool mentioned_replicas = false;
  try {
    fit_rate(pts);
  } catch (const ExperimentError& e) {
    mentioned_replicas = std::string(e.what()).find("replicas") !=
                         std::string::npos;
  }
  CHECK(mentioned_replicas);
}

TEST_CASE("ergodic and corrector budgets validate against the mixing margin") {
  ErgodicConfig cfg;
  CHECK_NOTHROW(cfg.validate(kLambda1 - 1.0));
  ErgodicConfig bad = cfg;
  bad.burn_in = 0.0;
  CHECK_THROWS_AS(bad.validate(kLambda1 - 1.0), ConfigError);
  bad = cfg;
  bad.horizon = bad.burn_in;
  CHECK_THROWS_AS(bad.validate(kLambda1 - 1.0), ConfigError);
  bad = cfg;
  bad.replicas = 0;
  CHECK_THROWS_AS(bad.validate(kLambda1 - 1.0), ConfigError);

  PsiOptions psi;
  CHECK_NOTHROW(psi.validate(kLambda1 - 1.0));
  PsiOptions tight = psi;
  tight.t_cut = 0.1;  // fails to cover 8/margin
  CHECK_THROWS_AS(tight.validate(1.0), ConfigError);
  // grid() yields step sizes: positive, capped at dt_max, summing to t_cut.
  const std::vector<double> steps = psi.grid(0.002);
  REQUIRE(steps.size() > 4);
  double total = 0.0;
  for (const double h : steps) {
    CHECK(h > 0.0);
    CHECK(h <= psi.dt_max + 1e-12);
    total += h;
  }
  CHECK(total == doctest::Approx(psi.t_cut).epsilon(1e-9));
}

TEST_CASE("drift estimator agrees with the linear closed form") {
  const BasisPtr b = make_basis(4);
  const LinearFamily fam(1.0, 1.0, 0.0, 1.0);
  const NoiseSpec q2 = power_law_noise(NoiseRole::Fast, 4, 2.0, 1.0);
  const std::vector<double> u{1.0, -0.5, 0.25, 2.0};
  ErgodicConfig cfg;
  cfg.burn_in = 1.0;
  cfg.horizon = 21.0;
  cfg.dt = 0.02;
  cfg.replicas = 8;
  const FieldEstimate est =
      estimate_fbar(b, fam, q2, u, cfg, NoiseStream(5).child("fbar"));
  REQUIRE(static_cast<int>(est.value.size()) == 4);
  for (int k = 0; k < 4; ++k) {
    const double exact = fam.fbar_coeff(b->lambda[k]) * u[k];
    CHECK(est.se[k] > 0.0);
    CHECK(std::abs(est.value[k] - exact) < 3.0 * est.se[k]);
  }
}

TEST_CASE("drift estimator is exact when f ignores the fast variable") {
  const BasisPtr b = make_basis(3);
  const LinearFamily fam(1.0, 2.0, 0.7, 0.0);
  const NoiseSpec q2 = power_law_noise(NoiseRole::Fast, 3, 2.0, 1.0);
  const std::vector<double> u{1.0, -1.0, 0.5};
  ErgodicConfig cfg;
  cfg.burn_in = 0.6;
  cfg.horizon = 3.0;
  cfg.dt = 0.02;
  cfg.replicas = 2;
  const FieldEstimate est =
      estimate_fbar(b, fam, q2, u, cfg, NoiseStream(5).child("exact"));
  for (int k = 0; k < 3; ++k) {
    CHECK(est.value[k] == doctest::Approx(0.7 * u[k]).epsilon(1e-10));
    CHECK(est.se[k] < 1e-10);
  }
}

TEST_CASE("corrector vanishes where its defining integrand vanishes") {
  const BasisPtr b = make_basis(3);
  const NoiseSpec q2 = power_law_noise(NoiseRole::Fast, 3, 2.0, 1.0);
  const std::vector<double> u{1.0, 0.5, -0.25};
  PsiOptions psi;
  psi.replicas = 2;

  // d = 0: f does not depend on y, so Psi = 0 identically.
  const LinearFamily flat(1.0, 2.0, 0.7, 0.0);
  std::vector<double> fbar_u(3);
  for (int k = 0; k < 3; ++k) fbar_u[k] = flat.fbar_coeff(b->lambda[k]) * u[k];
  const std::vector<double> y{0.8, -0.4, 0.1};
  double tail = -1.0;
  const FieldEstimate zero = estimate_psi(b, flat, q2, u, y, fbar_u, psi,
                                          NoiseStream(9).child("psi"), &tail);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(zero.value[k]) < 1e-12);
  CHECK(tail >= 0.0);
  CHECK(tail < 1e-12);

  // Starting the frozen flow at the stationary mean keeps the integrand
  // centered, so Psi(u, m(u)) = 0 in expectation.
  const LinearFamily fam(1.0, 1.0, 0.0, 1.0);
  std::vector<double> fbar2(3), m(3);
  for (int k = 0; k < 3; ++k) {
    fbar2[k] = fam.fbar_coeff(b->lambda[k]) * u[k];
    m[k] = fam.stationary_mean_coeff(b->lambda[k]) * u[k];
  }
  PsiOptions wide;
  wide.replicas = 24;
  const FieldEstimate centered = estimate_psi(
      b, fam, q2, u, m, fbar2, wide, NoiseStream(9).child("centered"));
  for (int k = 0; k < 3; ++k)
    CHECK(std::abs(centered.value[k]) < 3.0 * centered.se[k] + 1e-9);
}
